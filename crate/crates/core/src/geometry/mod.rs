//! Planar geometric kernel.
//!
//! Everything here works directly in degree coordinates (`lon` as x, `lat`
//! as y). Lengths given in meters are converted with the single fixed factor
//! [`DEG_PER_METER`]; no geodesic correction is applied.

mod interval;
mod polyline;
mod ray;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use interval::{angular_extent, merge_intervals, AngularInterval, MergedIntervals};
pub use polyline::{interpolate_along, polyline_length, rect_buffer};
pub use ray::{cast_ray, ObstacleIndex, RayHit};

/// Degrees per meter at the latitude of the reference study area.
pub const DEG_PER_METER: f64 = 0.000133;
/// Standard urban road width in meters.
pub const ROAD_WIDTH_M: f64 = 14.8;
/// [`ROAD_WIDTH_M`] expressed in degrees.
pub const ROAD_WIDTH_DEG: f64 = ROAD_WIDTH_M * DEG_PER_METER;

/// Distances below this (in coordinate units) count as touching.
pub const BOUNDARY_EPS: f64 = 1e-12;

pub fn meters_to_deg(meters: f64) -> f64 {
    meters * DEG_PER_METER
}

pub fn deg_to_meters(deg: f64) -> f64 {
    deg / DEG_PER_METER
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate bearing: origin and target coincide")]
    DegenerateBearing,
    #[error("enclosed viewpoint: viewpoint lies inside or on the obstacle")]
    EnclosedViewpoint,
    #[error("invalid coordinate ({lon}, {lat})")]
    InvalidCoordinate { lon: f64, lat: f64 },
    #[error("polygon ring needs at least 3 distinct vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon ring has zero area")]
    ZeroArea,
    #[error("polygon ring is self-intersecting (edges {0} and {1})")]
    SelfIntersecting(usize, usize),
    #[error("polyline is empty or has zero length")]
    EmptyPolyline,
    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// A location in degree coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    /// Unchecked constructor, also used for planar test scenes.
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    /// Constructor enforcing finite WGS84 ranges.
    pub fn try_new(lon: f64, lat: f64) -> Result<Self, GeometryError> {
        if lon.is_finite() && lat.is_finite() && (-180.0..=180.0).contains(&lon) && (-90.0..=90.0).contains(&lat) {
            Ok(Self { lon, lat })
        } else {
            Err(GeometryError::InvalidCoordinate { lon, lat })
        }
    }

    pub fn distance(&self, other: &GeoPoint) -> f64 {
        (other.lon - self.lon).hypot(other.lat - self.lat)
    }

    pub fn distance_sq(&self, other: &GeoPoint) -> f64 {
        let dx = other.lon - self.lon;
        let dy = other.lat - self.lat;
        dx * dx + dy * dy
    }

    /// Point reached by moving `distance` along planar `bearing`.
    pub fn offset(&self, bearing: f64, distance: f64) -> GeoPoint {
        GeoPoint::new(self.lon + distance * bearing.cos(), self.lat + distance * bearing.sin())
    }

    pub(crate) fn as_array(&self) -> [f64; 2] {
        [self.lon, self.lat]
    }
}

/// Normalizes an angle in radians to `[0, 2π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Planar bearing (counter-clockwise from +x) of `target` seen from `origin`.
pub fn bearing_of(origin: GeoPoint, target: GeoPoint) -> Result<f64, GeometryError> {
    let dx = target.lon - origin.lon;
    let dy = target.lat - origin.lat;
    if dx == 0.0 && dy == 0.0 {
        return Err(GeometryError::DegenerateBearing);
    }
    Ok(normalize_angle(dy.atan2(dx)))
}

/// Disc membership test with an inclusive boundary.
pub fn within_radius(center: GeoPoint, point: GeoPoint, radius: f64) -> bool {
    center.distance(&point) <= radius
}

pub(crate) fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

/// Squared distance from `p` to segment `a`-`b`.
pub(crate) fn point_segment_distance_sq(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    let ex = b.lon - a.lon;
    let ey = b.lat - a.lat;
    let len_sq = ex * ex + ey * ey;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.lon - a.lon) * ex + (p.lat - a.lat) * ey) / len_sq).clamp(0.0, 1.0)
    };
    let cx = a.lon + t * ex;
    let cy = a.lat + t * ey;
    (p.lon - cx).powi(2) + (p.lat - cy).powi(2)
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: GeoPoint,
    pub max: GeoPoint,
}

impl BBox {
    pub fn of(points: &[GeoPoint]) -> BBox {
        let mut min = GeoPoint::new(f64::INFINITY, f64::INFINITY);
        let mut max = GeoPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.lon = min.lon.min(p.lon);
            min.lat = min.lat.min(p.lat);
            max.lon = max.lon.max(p.lon);
            max.lat = max.lat.max(p.lat);
        }
        BBox { min, max }
    }

    pub fn distance_to(&self, p: GeoPoint) -> f64 {
        let dx = (self.min.lon - p.lon).max(0.0).max(p.lon - self.max.lon);
        let dy = (self.min.lat - p.lat).max(0.0).max(p.lat - self.max.lat);
        dx.hypot(dy)
    }
}

/// A simple closed polygon ring. The closing vertex is implicit: the stored
/// vertex list never repeats the first vertex at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GeoPoint>", into = "Vec<GeoPoint>")]
pub struct PolygonRing {
    vertices: Vec<GeoPoint>,
    bbox: BBox,
}

impl TryFrom<Vec<GeoPoint>> for PolygonRing {
    type Error = GeometryError;

    fn try_from(v: Vec<GeoPoint>) -> Result<Self, Self::Error> {
        PolygonRing::new(v)
    }
}

impl From<PolygonRing> for Vec<GeoPoint> {
    fn from(ring: PolygonRing) -> Self {
        ring.vertices
    }
}

impl PolygonRing {
    /// Validates and normalizes a vertex list. An explicit closing vertex and
    /// consecutive duplicates are removed.
    pub fn new(mut vertices: Vec<GeoPoint>) -> Result<Self, GeometryError> {
        for p in &vertices {
            if !p.lon.is_finite() || !p.lat.is_finite() {
                return Err(GeometryError::InvalidCoordinate { lon: p.lon, lat: p.lat });
            }
        }
        vertices.dedup();
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        let bbox = BBox::of(&vertices);
        let ring = PolygonRing { vertices, bbox };
        let scale = (bbox.max.lon - bbox.min.lon).max(bbox.max.lat - bbox.min.lat);
        if ring.signed_area().abs() <= 1e-12 * scale * scale {
            return Err(GeometryError::ZeroArea);
        }
        if let Some((i, j)) = ring.find_self_intersection() {
            return Err(GeometryError::SelfIntersecting(i, j));
        }
        Ok(ring)
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn edges(&self) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area; positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn on_boundary(&self, p: GeoPoint) -> bool {
        let eps_sq = BOUNDARY_EPS * BOUNDARY_EPS;
        self.edges().any(|(a, b)| point_segment_distance_sq(p, a, b) <= eps_sq)
    }

    /// Crossing-number test; boundary points may go either way, use
    /// [`PolygonRing::contains_or_touches`] when that matters.
    pub fn contains(&self, p: GeoPoint) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.lat > p.lat) != (b.lat > p.lat) {
                let x = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
                if p.lon < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn contains_or_touches(&self, p: GeoPoint) -> bool {
        if self.bbox.distance_to(p) > BOUNDARY_EPS {
            return false;
        }
        self.contains(p) || self.on_boundary(p)
    }

    /// Returns a copy with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(GeoPoint) -> GeoPoint) -> Result<PolygonRing, GeometryError> {
        PolygonRing::new(self.vertices.iter().copied().map(f).collect())
    }

    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (c, d) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if adjacent {
                    // adjacent edges may only share their common vertex
                    if n > 3 && collinear_overlap(a, b, c, d) {
                        return Some((i, j));
                    }
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

pub(crate) fn shoelace(points: &[GeoPoint]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    // shift to the first vertex to limit cancellation at large coordinates
    let o = points[0];
    let mut twice = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        twice += cross(p.lon - o.lon, p.lat - o.lat, q.lon - o.lon, q.lat - o.lat);
    }
    twice / 2.0
}

fn orient(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> f64 {
    cross(b.lon - a.lon, b.lat - a.lat, c.lon - a.lon, c.lat - a.lat)
}

fn on_segment(a: GeoPoint, b: GeoPoint, p: GeoPoint) -> bool {
    p.lon >= a.lon.min(b.lon) && p.lon <= a.lon.max(b.lon) && p.lat >= a.lat.min(b.lat) && p.lat <= a.lat.max(b.lat)
}

/// Closed-segment intersection test.
pub(crate) fn segments_intersect(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Adjacent edges a-b and c-d (sharing one vertex) folding back onto each other.
fn collinear_overlap(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> bool {
    if orient(a, b, c) != 0.0 || orient(a, b, d) != 0.0 {
        return false;
    }
    let (shared, p, q) = if b == c {
        (b, a, d)
    } else if a == d {
        (a, b, c)
    } else {
        return false;
    };
    let dot = (p.lon - shared.lon) * (q.lon - shared.lon) + (p.lat - shared.lat) * (q.lat - shared.lat);
    dot > 0.0
}
