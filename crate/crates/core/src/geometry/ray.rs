use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};

use super::{cross, GeoPoint, GeometryError, PolygonRing};

type Entry = GeomWithData<Rectangle<[f64; 2]>, usize>;

/// Obstacles with an R-tree over their bounding boxes. Obstacle ids are
/// positions in the input vector.
#[derive(Debug, Clone)]
pub struct ObstacleIndex {
    rings: Vec<PolygonRing>,
    tree: RTree<Entry>,
}

impl ObstacleIndex {
    pub fn new(rings: Vec<PolygonRing>) -> Self {
        let entries = rings
            .iter()
            .enumerate()
            .map(|(id, r)| {
                let b = r.bbox();
                GeomWithData::new(Rectangle::from_corners(b.min.as_array(), b.max.as_array()), id)
            })
            .collect();
        Self {
            rings,
            tree: RTree::bulk_load(entries),
        }
    }

    pub fn len(&self) -> usize {
        self.rings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rings.is_empty()
    }

    pub fn ring(&self, id: usize) -> &PolygonRing {
        &self.rings[id]
    }

    pub fn rings(&self) -> &[PolygonRing] {
        &self.rings
    }

    fn candidates(&self, min: [f64; 2], max: [f64; 2]) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .tree
            .locate_in_envelope_intersecting(AABB::from_corners(min, max))
            .map(|e| e.data)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Smallest id of an obstacle containing or touching `p`.
    pub fn containing(&self, p: GeoPoint) -> Option<usize> {
        let eps = super::BOUNDARY_EPS;
        self.candidates([p.lon - eps, p.lat - eps], [p.lon + eps, p.lat + eps])
            .into_iter()
            .find(|&id| self.rings[id].contains_or_touches(p))
    }

    /// Ids (ascending) of obstacles whose bounding box lies within `range` of `p`.
    pub fn within(&self, p: GeoPoint, range: f64) -> Vec<usize> {
        let mut ids = self.candidates([p.lon - range, p.lat - range], [p.lon + range, p.lat + range]);
        ids.retain(|&id| self.rings[id].bbox().distance_to(p) <= range);
        ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub hit: Option<usize>,
}

/// Distance along the ray `origin + t·dir` to segment `a`-`b`, if it is hit
/// at some `t > 0`.
fn ray_segment(origin: GeoPoint, dir: (f64, f64), a: GeoPoint, b: GeoPoint) -> Option<f64> {
    let ex = b.lon - a.lon;
    let ey = b.lat - a.lat;
    let wx = a.lon - origin.lon;
    let wy = a.lat - origin.lat;
    let denom = cross(dir.0, dir.1, ex, ey);
    let scale = ex.abs().max(ey.abs());
    if denom.abs() <= 1e-14 * scale {
        // parallel; a collinear edge is first hit at its nearer endpoint
        if cross(wx, wy, dir.0, dir.1).abs() > 1e-14 * scale.max(wx.abs().max(wy.abs())) {
            return None;
        }
        let ta = wx * dir.0 + wy * dir.1;
        let tb = (b.lon - origin.lon) * dir.0 + (b.lat - origin.lat) * dir.1;
        return match (ta > 0.0, tb > 0.0) {
            (true, true) => Some(ta.min(tb)),
            (true, false) | (false, true) => Some(f64::MIN_POSITIVE),
            (false, false) => None,
        };
    }
    let t = cross(wx, wy, ex, ey) / denom;
    let s = cross(wx, wy, dir.0, dir.1) / denom;
    (t > 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

/// Casts a ray of length `max_range` and returns the nearest obstacle
/// boundary crossing. An origin inside (or on) an obstacle yields distance 0.
pub fn cast_ray(
    origin: GeoPoint,
    bearing: f64,
    max_range: f64,
    obstacles: &ObstacleIndex,
) -> Result<RayHit, GeometryError> {
    if !(max_range > 0.0 && max_range.is_finite()) {
        return Err(GeometryError::NonPositive {
            name: "max_range",
            value: max_range,
        });
    }
    if let Some(id) = obstacles.containing(origin) {
        return Ok(RayHit {
            distance: 0.0,
            hit: Some(id),
        });
    }
    let dir = (bearing.cos(), bearing.sin());
    let end = origin.offset(bearing, max_range);
    let min = [origin.lon.min(end.lon), origin.lat.min(end.lat)];
    let max = [origin.lon.max(end.lon), origin.lat.max(end.lat)];

    let mut best = RayHit {
        distance: max_range,
        hit: None,
    };
    for id in obstacles.candidates(min, max) {
        for (a, b) in obstacles.rings[id].edges() {
            if let Some(t) = ray_segment(origin, dir, a, b) {
                // candidates come in ascending id order, so strict < keeps the smallest id on ties
                if t <= max_range && (t < best.distance || (best.hit.is_none() && t == max_range)) {
                    best = RayHit {
                        distance: t,
                        hit: Some(id),
                    };
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> PolygonRing {
        PolygonRing::new(vec![
            GeoPoint::new(x0, y0),
            GeoPoint::new(x1, y0),
            GeoPoint::new(x1, y1),
            GeoPoint::new(x0, y1),
        ])
        .unwrap()
    }

    #[test]
    fn axis_aligned_hit_and_miss() {
        let idx = ObstacleIndex::new(vec![rect(10.0, -5.0, 20.0, 5.0)]);
        let o = GeoPoint::new(0.0, 0.0);
        let h = cast_ray(o, 0.0, 100.0, &idx).unwrap();
        assert!((h.distance - 10.0).abs() < 1e-12);
        assert_eq!(h.hit, Some(0));
        let m = cast_ray(o, FRAC_PI_2, 100.0, &idx).unwrap();
        assert_eq!(
            m,
            RayHit {
                distance: 100.0,
                hit: None
            }
        );
    }

    #[test]
    fn diagonal_hits_corner() {
        let idx = ObstacleIndex::new(vec![rect(5.0, 5.0, 15.0, 15.0)]);
        let h = cast_ray(GeoPoint::new(0.0, 0.0), FRAC_PI_4, 100.0, &idx).unwrap();
        assert!((h.distance - 50f64.sqrt()).abs() < 1e-9);
        // fine-grid march: first step landing inside the square
        let step = 1e-4;
        let mut t = 0.0;
        while !idx
            .ring(0)
            .contains_or_touches(GeoPoint::new(0.0, 0.0).offset(FRAC_PI_4, t))
        {
            t += step;
        }
        assert!((h.distance - t).abs() <= step);
    }

    #[test]
    fn inside_origin_reports_zero() {
        let idx = ObstacleIndex::new(vec![rect(-1.0, -1.0, 1.0, 1.0)]);
        let h = cast_ray(GeoPoint::new(0.0, 0.0), 1.0, 10.0, &idx).unwrap();
        assert_eq!(
            h,
            RayHit {
                distance: 0.0,
                hit: Some(0)
            }
        );
    }

    #[test]
    fn nearest_of_several_and_bad_range() {
        let idx = ObstacleIndex::new(vec![rect(30.0, -1.0, 31.0, 1.0), rect(10.0, -1.0, 11.0, 1.0)]);
        let h = cast_ray(GeoPoint::new(0.0, 0.0), 0.0, 100.0, &idx).unwrap();
        assert_eq!(h.hit, Some(1));
        assert!((h.distance - 10.0).abs() < 1e-12);
        assert!(cast_ray(GeoPoint::new(0.0, 0.0), 0.0, 0.0, &idx).is_err());
    }

    #[test]
    fn grazing_collinear_edge() {
        // ray runs along the bottom edge of the square
        let idx = ObstacleIndex::new(vec![rect(10.0, 0.0, 20.0, 5.0)]);
        let h = cast_ray(GeoPoint::new(0.0, 0.0), 0.0, 100.0, &idx).unwrap();
        assert!((h.distance - 10.0).abs() < 1e-12);
    }

    #[test]
    fn within_range_filters_by_bbox_distance() {
        let idx = ObstacleIndex::new(vec![rect(10.0, -1.0, 11.0, 1.0), rect(50.0, -1.0, 51.0, 1.0)]);
        assert_eq!(idx.within(GeoPoint::new(0.0, 0.0), 20.0), vec![0]);
        assert_eq!(idx.within(GeoPoint::new(0.0, 0.0), 60.0), vec![0, 1]);
    }
}
