use proptest::prelude::*;
use sightline::geometry::GeoPoint;
use sightline::ingest::{
    parse_aadf_csv, parse_accident_csv, parse_osm_extract, AadfColumns, AccidentColumns, StudyArea,
};

const OSM: &str = r#"<?xml version="1.0"?>
<osm version="0.6">
  <node id="1" lat="51.5000" lon="-0.1900"/>
  <node id="2" lat="51.5010" lon="-0.1900"/>
  <node id="3" lat="51.5010" lon="-0.1890"/>
  <node id="4" lat="51.5000" lon="-0.1890"/>
  <way id="10"><nd ref="1"/><nd ref="2"/><tag k="highway" v="primary"/><tag k="maxspeed" v="30 mph"/></way>
  <way id="11"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/><tag k="building" v="yes"/></way>
</osm>
"#;

const ACCIDENTS: &str = "accident_index,longitude,latitude,accident_year,date,accident_severity
A1,-0.19,51.50,2015,01/02/2015,Slight
A2,-0.19,51.50,2009,01/02/2009,Serious
";

const AADF: &str = "count_point_id,longitude,latitude,all_motor_vehicles
1,-0.19,51.5,24000
2,-0.19,51.5,-5
";

fn area() -> StudyArea {
    StudyArea::new(GeoPoint::new(-0.19, 51.5), 3000.0).unwrap()
}

fn valid(p: GeoPoint) -> bool {
    GeoPoint::try_new(p.lon, p.lat).is_ok()
}

fn mutate(base: &str, edits: &[(usize, u8, bool)]) -> Vec<u8> {
    let mut bytes = base.as_bytes().to_vec();
    for &(pos, b, insert) in edits {
        let i = pos % (bytes.len() + 1);
        if insert || i == bytes.len() {
            bytes.insert(i, b);
        } else {
            bytes[i] = b;
        }
    }
    bytes
}

fn edits() -> impl Strategy<Value = Vec<(usize, u8, bool)>> {
    prop::collection::vec((any::<usize>(), any::<u8>(), any::<bool>()), 1..8)
}

proptest! {
    #[test]
    fn osm_never_panics_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let _ = parse_osm_extract(&bytes[..], &area());
    }

    #[test]
    fn osm_mutations_reject_or_yield_valid_records(e in edits(), cut in any::<usize>()) {
        let mut bytes = mutate(OSM, &e);
        if cut % 3 == 0 {
            bytes.truncate(cut % (bytes.len() + 1));
        }
        if let Ok(x) = parse_osm_extract(&bytes[..], &area()) {
            for r in &x.roads {
                prop_assert!(r.geometry.len() >= 2 && r.geometry.iter().all(|&p| valid(p)));
            }
            for b in &x.buildings {
                prop_assert!(b.ring.vertices().len() >= 3 && b.ring.area() > 0.0);
            }
        }
        let again = parse_osm_extract(&bytes[..], &area());
        let first = parse_osm_extract(&bytes[..], &area());
        prop_assert_eq!(format!("{again:?}"), format!("{first:?}"));
    }

    #[test]
    fn accident_csv_mutations_reject_or_yield_valid_records(e in edits()) {
        let bytes = mutate(ACCIDENTS, &e);
        if let Ok(x) = parse_accident_csv(&bytes[..], &AccidentColumns::default(), 2010) {
            for r in &x.records {
                prop_assert!(valid(r.location) && r.year >= 2010);
            }
        }
    }

    #[test]
    fn aadf_csv_mutations_reject_or_yield_valid_records(e in edits()) {
        let bytes = mutate(AADF, &e);
        if let Ok(x) = parse_aadf_csv(&bytes[..], &AadfColumns::default()) {
            for p in &x.points {
                prop_assert!(valid(p.location) && p.aadf >= 0.0 && p.aadf.is_finite());
            }
        }
    }

    #[test]
    fn csv_never_panics_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..300)) {
        let _ = parse_accident_csv(&bytes[..], &AccidentColumns::default(), 2010);
        let _ = parse_aadf_csv(&bytes[..], &AadfColumns::default());
    }
}

#[test]
fn unmodified_inputs_parse() {
    let x = parse_osm_extract(OSM.as_bytes(), &area()).unwrap();
    assert_eq!((x.roads.len(), x.buildings.len()), (1, 1));
    let a = parse_accident_csv(ACCIDENTS.as_bytes(), &AccidentColumns::default(), 2010).unwrap();
    assert_eq!((a.records.len(), a.rejected_before_min_year), (1, 1));
    let t = parse_aadf_csv(AADF.as_bytes(), &AadfColumns::default()).unwrap();
    assert_eq!((t.points.len(), t.rejected_negative), (1, 1));
}
