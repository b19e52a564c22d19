#![allow(dead_code)]

use std::f64::consts::TAU;

use rand::Rng;
use sightline::geometry::{GeoPoint, PolygonRing};

/// Star-shaped polygon around `c`: convex when `concave` is false,
/// otherwise with alternating inner and outer radii.
pub fn random_polygon<R: Rng>(rng: &mut R, c: GeoPoint, size: f64, concave: bool) -> PolygonRing {
    let n = rng.gen_range(if concave { 6..12 } else { 3..8 });
    // jittered even spacing keeps every angular gap below π, so the ring is simple
    let step = TAU / n as f64;
    let angles: Vec<f64> = (0..n).map(|k| (k as f64 + rng.gen_range(0.0..0.45)) * step).collect();
    let pts: Vec<GeoPoint> = angles
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let r = if concave && i % 2 == 1 {
                size * rng.gen_range(0.3..0.6)
            } else {
                size
            };
            GeoPoint::new(c.lon + r * a.cos(), c.lat + r * a.sin())
        })
        .collect();
    PolygonRing::new(pts).expect("star-shaped ring is simple")
}

/// Up to `max` random buildings within `extent` of `view`, none touching it.
pub fn random_scene<R: Rng>(rng: &mut R, view: GeoPoint, extent: f64, max: usize) -> Vec<PolygonRing> {
    random_scene_with_clearance(rng, view, extent, max, 1e-9)
}

/// As [`random_scene`], keeping every building at least `clearance` away.
pub fn random_scene_with_clearance<R: Rng>(
    rng: &mut R,
    view: GeoPoint,
    extent: f64,
    max: usize,
    clearance: f64,
) -> Vec<PolygonRing> {
    let n = rng.gen_range(1..=max);
    let mut out = Vec::new();
    while out.len() < n {
        let c = GeoPoint::new(
            view.lon + rng.gen_range(-extent..extent),
            view.lat + rng.gen_range(-extent..extent),
        );
        let size = extent * rng.gen_range(0.03..0.2);
        let concave = rng.gen_bool(0.5);
        let ring = random_polygon(rng, c, size, concave);
        if ring.contains_or_touches(view) || ring.edges().any(|(a, b)| segment_distance(view, a, b) < clearance) {
            continue;
        }
        out.push(ring);
    }
    out
}

/// Distance along the ray from `o` with direction `d` to segment `a`-`b`.
fn ray_segment(o: GeoPoint, d: (f64, f64), a: GeoPoint, b: GeoPoint) -> Option<f64> {
    let e = (b.lon - a.lon, b.lat - a.lat);
    let denom = d.0 * e.1 - d.1 * e.0;
    if denom.abs() < 1e-18 {
        return None;
    }
    let w = (a.lon - o.lon, a.lat - o.lat);
    let t = (w.0 * e.1 - w.1 * e.0) / denom;
    let s = (w.0 * d.1 - w.1 * d.0) / denom;
    (t > 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

/// Nearest hit of a ray over all ring edges, or `max_range` if none.
pub fn oracle_ray(o: GeoPoint, bearing: f64, rings: &[PolygonRing], max_range: f64) -> f64 {
    let d = (bearing.cos(), bearing.sin());
    let mut best = max_range;
    for r in rings {
        let v = r.vertices();
        for i in 0..v.len() {
            if let Some(t) = ray_segment(o, d, v[i], v[(i + 1) % v.len()]) {
                best = best.min(t);
            }
        }
    }
    best
}

/// Share of `steps` evenly spaced bearings whose unbounded ray hits nothing.
pub fn full_circle_oracle(o: GeoPoint, rings: &[PolygonRing], steps: usize) -> f64 {
    let open = (0..steps)
        .filter(|&k| {
            let b = TAU * (k as f64 + 0.5) / steps as f64;
            oracle_ray(o, b, rings, f64::INFINITY).is_infinite()
        })
        .count();
    open as f64 / steps as f64
}

/// ½∫r(θ)² dθ over the fan relative to the unobstructed fan, by fine quadrature.
pub fn sector_area_oracle(o: GeoPoint, heading: f64, fov: f64, rings: &[PolygonRing], range: f64) -> f64 {
    let steps = 8000;
    let h = fov / steps as f64;
    let mut area = 0.0;
    for k in 0..steps {
        let b = heading - fov / 2.0 + (k as f64 + 0.5) * h;
        let r = oracle_ray(o, b, rings, range);
        area += 0.5 * r * r * h;
    }
    area / (0.5 * range * range * fov)
}

fn segment_distance(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    let (ex, ey) = (b.lon - a.lon, b.lat - a.lat);
    let t = (((p.lon - a.lon) * ex + (p.lat - a.lat) * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
    ((a.lon + t * ex - p.lon).powi(2) + (a.lat + t * ey - p.lat).powi(2)).sqrt()
}
