//! Writes the synthetic-city fixture: a 7×7 street grid with buildings,
//! accidents and traffic count points around the default study center.
//!
//! cargo run -p sightline --example synthetic_city -- <out_dir>

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sightline::geometry::{meters_to_deg, GeoPoint};

const CENTER: GeoPoint = GeoPoint::new(-0.19123, 51.50212);
const LINES: usize = 7;
const SPACING_M: f64 = 120.0;
const ROAD_HALF_M: f64 = 7.4;

fn grid(i: usize, j: usize) -> GeoPoint {
    let half = (LINES - 1) as f64 / 2.0;
    GeoPoint::new(
        CENTER.lon + meters_to_deg((i as f64 - half) * SPACING_M),
        CENTER.lat + meters_to_deg((j as f64 - half) * SPACING_M),
    )
}

fn node_id(i: usize, j: usize) -> i64 {
    1000 + (j * LINES + i) as i64
}

fn class_of_row(j: usize) -> (&'static str, Option<&'static str>) {
    match j {
        3 => ("primary", Some("30 mph")),
        1 | 5 => ("secondary", None),
        _ => ("residential", Some("20 mph")),
    }
}

fn class_of_col(i: usize) -> (&'static str, Option<&'static str>) {
    match i {
        3 => ("primary", Some("30 mph")),
        0 | 6 => ("tertiary", Some("20 mph")),
        _ => ("secondary", Some("30 mph")),
    }
}

struct Osm {
    nodes: String,
    ways: String,
    next_node: i64,
    next_way: i64,
}

impl Osm {
    fn node(&mut self, id: i64, p: GeoPoint) {
        let _ = writeln!(
            self.nodes,
            r#"  <node id="{id}" lat="{:.7}" lon="{:.7}"/>"#,
            p.lat, p.lon
        );
    }

    fn way(&mut self, refs: &[i64], tags: &[(&str, &str)]) {
        let id = self.next_way;
        self.next_way += 1;
        let _ = writeln!(self.ways, r#"  <way id="{id}">"#);
        for r in refs {
            let _ = writeln!(self.ways, r#"    <nd ref="{r}"/>"#);
        }
        for (k, v) in tags {
            let _ = writeln!(self.ways, r#"    <tag k="{k}" v="{v}"/>"#);
        }
        let _ = writeln!(self.ways, "  </way>");
    }

    fn polygon(&mut self, pts: &[GeoPoint], tags: &[(&str, &str)]) {
        let mut refs = Vec::new();
        for &p in pts {
            let id = self.next_node;
            self.next_node += 1;
            self.node(id, p);
            refs.push(id);
        }
        refs.push(refs[0]);
        self.way(&refs, tags);
    }
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/fixtures/synthetic_city".into())
        .into();
    std::fs::create_dir_all(&out).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut osm = Osm {
        nodes: String::new(),
        ways: String::new(),
        next_node: 100_000,
        next_way: 1,
    };

    for j in 0..LINES {
        for i in 0..LINES {
            osm.node(node_id(i, j), grid(i, j));
        }
    }
    for j in 0..LINES {
        let refs: Vec<i64> = (0..LINES).map(|i| node_id(i, j)).collect();
        let (class, speed) = class_of_row(j);
        let name = format!("Row {j}");
        let mut tags = vec![("highway", class), ("name", name.as_str())];
        if let Some(s) = speed {
            tags.push(("maxspeed", s));
        }
        osm.way(&refs, &tags);
    }
    for i in 0..LINES {
        let refs: Vec<i64> = (0..LINES).map(|j| node_id(i, j)).collect();
        let (class, speed) = class_of_col(i);
        let name = format!("Column {i}");
        let mut tags = vec![("highway", class), ("name", name.as_str())];
        if let Some(s) = speed {
            tags.push(("maxspeed", s));
        }
        osm.way(&refs, &tags);
    }
    // a slip road off the primary crossing, excluded on ingest
    let slip = osm.next_node;
    osm.next_node += 1;
    let p = grid(3, 3);
    osm.node(
        slip,
        GeoPoint::new(p.lon + meters_to_deg(25.0), p.lat + meters_to_deg(25.0)),
    );
    osm.way(&[node_id(3, 3), slip], &[("highway", "primary_link")]);

    let setback = meters_to_deg(ROAD_HALF_M + 2.0);
    let block = meters_to_deg(SPACING_M);
    let mut buildings = 0;
    for j in 0..LINES - 1 {
        for i in 0..LINES - 1 {
            let origin = grid(i, j);
            let count = rng.gen_range(1..=2usize);
            for k in 0..count {
                let room = block - 2.0 * setback;
                let w = room * rng.gen_range(0.25..0.45);
                let h = room * rng.gen_range(0.25..0.45);
                // one building hugs the west edge, a second the east edge
                let x0 = if k == 0 {
                    origin.lon + setback + rng.gen_range(0.0..0.3) * (room / 2.0 - w)
                } else {
                    origin.lon + block - setback - w - rng.gen_range(0.0..0.3) * (room / 2.0 - w)
                };
                let y0 = origin.lat + setback + rng.gen_range(0.0..1.0) * (room - h);
                let pts = if (i + j + k) % 5 == 0 {
                    let (nx, ny) = (w * 0.5, h * 0.5);
                    vec![
                        GeoPoint::new(x0, y0),
                        GeoPoint::new(x0 + w, y0),
                        GeoPoint::new(x0 + w, y0 + ny),
                        GeoPoint::new(x0 + nx, y0 + ny),
                        GeoPoint::new(x0 + nx, y0 + h),
                        GeoPoint::new(x0, y0 + h),
                    ]
                } else {
                    vec![
                        GeoPoint::new(x0, y0),
                        GeoPoint::new(x0 + w, y0),
                        GeoPoint::new(x0 + w, y0 + h),
                        GeoPoint::new(x0, y0 + h),
                    ]
                };
                osm.polygon(&pts, &[("building", "yes")]);
                buildings += 1;
            }
        }
    }
    let xml = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"synthetic_city\">\n{}{}</osm>\n",
        osm.nodes, osm.ways
    );
    std::fs::write(out.join("city.osm"), xml).unwrap();

    let mut acc = String::from("accident_index,longitude,latitude,accident_year,date,accident_severity\n");
    let mut n_acc = 0;
    // the counting radius is 0.0003°, so most points land inside it
    let jitter = 0.00025;
    for j in 0..LINES {
        for i in 0..LINES {
            let major = class_of_row(j).0 == "primary" || class_of_col(i).0 == "primary";
            let mean = if major { 9.0 } else { 5.0 };
            let k = rng.gen_range(0.0..2.0 * mean) as usize;
            let c = grid(i, j);
            for _ in 0..k {
                let p = GeoPoint::new(
                    c.lon + rng.gen_range(-jitter..jitter),
                    c.lat + rng.gen_range(-jitter..jitter),
                );
                let year = rng.gen_range(2007..=2022);
                let severity = ["Fatal", "Serious", "Slight", "Slight", "Slight"][rng.gen_range(0..5)];
                n_acc += 1;
                let _ = writeln!(
                    acc,
                    "SC{n_acc:05},{:.7},{:.7},{year},{:02}/{:02}/{year},{severity}",
                    p.lon,
                    p.lat,
                    rng.gen_range(1..=28),
                    rng.gen_range(1..=12)
                );
            }
        }
    }
    let spread = meters_to_deg(SPACING_M * 3.5);
    for _ in 0..30 {
        let p = GeoPoint::new(
            CENTER.lon + rng.gen_range(-spread..spread),
            CENTER.lat + rng.gen_range(-spread..spread),
        );
        let year = rng.gen_range(2007..=2022);
        n_acc += 1;
        let _ = writeln!(acc, "SC{n_acc:05},{:.7},{:.7},{year},01/06/{year},Slight", p.lon, p.lat);
    }
    std::fs::write(out.join("accidents.csv"), acc).unwrap();

    let mut aadf = String::from("count_point_id,year,longitude,latitude,all_motor_vehicles\n");
    let mut id = 7000;
    for j in (0..LINES).step_by(2) {
        for i in [1, 4] {
            let a = grid(i, j);
            let b = grid(i + 1, j);
            let p = GeoPoint::new((a.lon + b.lon) / 2.0, a.lat);
            let base = if class_of_row(j).0 == "primary" {
                18000.0
            } else {
                6000.0
            };
            id += 1;
            let flow = (base * rng.gen_range(0.6..1.4f64)).round();
            let _ = writeln!(aadf, "{id},2019,{:.7},{:.7},{flow}", p.lon, p.lat);
        }
    }
    let c = grid(3, 3);
    let _ = writeln!(aadf, "7999,2019,{:.7},{:.7},26000", c.lon + meters_to_deg(30.0), c.lat);
    std::fs::write(out.join("aadf.csv"), aadf).unwrap();

    let config = r#"{
  "center": { "lon": -0.19123, "lat": 51.50212 },
  "radius_m": 1000.0,
  "buffer_radius_deg": 0.0003,
  "merge_threshold_deg": 0.0003,
  "min_year": 2010,
  "model": "both",
  "inputs": {
    "osm": "city.osm",
    "accidents": "accidents.csv",
    "traffic": "aadf.csv"
  }
}
"#;
    std::fs::write(out.join("config.json"), config).unwrap();
    println!("{buildings} buildings, {n_acc} accidents written to {}", out.display());
}
