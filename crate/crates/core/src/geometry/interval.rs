use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{bearing_of, normalize_angle, GeoPoint, GeometryError, PolygonRing};

/// A closed arc of bearings traversed counter-clockwise from `start` to `end`.
///
/// Non-wrapping arcs satisfy `start < end <= 2π`. Arcs crossing bearing 0
/// set `wraps` and cover `[start, 2π) ∪ [0, end]` with `0 < end < start`.
/// The full circle is always `[0, 2π]` without the wrap flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularInterval {
    start: f64,
    end: f64,
    wraps: bool,
}

impl AngularInterval {
    pub const FULL: AngularInterval = AngularInterval {
        start: 0.0,
        end: TAU,
        wraps: false,
    };

    /// Arc running counter-clockwise from bearing `from` to bearing `to`.
    /// Returns `None` for a zero-width arc.
    pub fn from_endpoints(from: f64, to: f64) -> Option<AngularInterval> {
        let from = normalize_angle(from);
        let to = normalize_angle(to);
        if from == to {
            None
        } else if to == 0.0 {
            Some(AngularInterval {
                start: from,
                end: TAU,
                wraps: false,
            })
        } else if to > from {
            Some(AngularInterval {
                start: from,
                end: to,
                wraps: false,
            })
        } else {
            Some(AngularInterval {
                start: from,
                end: to,
                wraps: true,
            })
        }
    }

    /// Arc of the given width starting at `start`; widths of 2π or more give
    /// the full circle.
    pub fn from_start_width(start: f64, width: f64) -> Option<AngularInterval> {
        if width.is_nan() || width <= 0.0 {
            return None;
        }
        if width >= TAU {
            return Some(Self::FULL);
        }
        let s = normalize_angle(start);
        let e = s + width;
        if e <= TAU {
            Some(AngularInterval {
                start: s,
                end: e,
                wraps: false,
            })
        } else {
            Some(AngularInterval {
                start: s,
                end: e - TAU,
                wraps: true,
            })
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn wraps(&self) -> bool {
        self.wraps
    }

    pub fn measure(&self) -> f64 {
        if self.wraps {
            (TAU - self.start) + self.end
        } else {
            self.end - self.start
        }
    }

    pub fn contains(&self, bearing: f64) -> bool {
        let b = normalize_angle(bearing);
        if self.wraps {
            b >= self.start || b <= self.end
        } else {
            b >= self.start && b <= self.end
        }
    }

    /// Splits into non-wrapping `(start, end)` pieces within `[0, 2π]`.
    fn pieces(&self) -> impl Iterator<Item = (f64, f64)> {
        let (first, second) = if self.wraps {
            ((self.start, TAU), Some((0.0, self.end)))
        } else {
            ((self.start, self.end), None)
        };
        std::iter::once(first).chain(second)
    }
}

/// Result of [`merge_intervals`]: pairwise disjoint arcs sorted by start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedIntervals {
    pub intervals: Vec<AngularInterval>,
    pub total_measure: f64,
}

/// Union of arcs. Touching arcs are joined; an arc ending at 2π and one
/// starting at 0 collapse into a single wrapping arc.
pub fn merge_intervals(intervals: &[AngularInterval]) -> MergedIntervals {
    let mut pieces: Vec<(f64, f64)> = intervals.iter().flat_map(|i| i.pieces()).collect();
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
    for (s, e) in pieces {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    let total_measure = merged.iter().map(|(s, e)| e - s).sum::<f64>().min(TAU);

    let mut out: Vec<AngularInterval> = Vec::with_capacity(merged.len());
    let n = merged.len();
    if n == 1 && merged[0] == (0.0, TAU) {
        out.push(AngularInterval::FULL);
    } else if n >= 2 && merged[0].0 == 0.0 && merged[n - 1].1 == TAU {
        for &(s, e) in &merged[1..n - 1] {
            out.push(AngularInterval {
                start: s,
                end: e,
                wraps: false,
            });
        }
        out.push(AngularInterval {
            start: merged[n - 1].0,
            end: merged[0].1,
            wraps: true,
        });
    } else {
        out.extend(merged.into_iter().map(|(s, e)| AngularInterval {
            start: s,
            end: e,
            wraps: false,
        }));
    }

    MergedIntervals {
        intervals: out,
        total_measure,
    }
}

/// Bearings at which a ray from `viewpoint` hits `obstacle`.
///
/// Each edge subtends the short arc between its endpoint bearings; the union
/// of those arcs is exactly the blocked set, including for concave rings.
pub fn angular_extent(viewpoint: GeoPoint, obstacle: &PolygonRing) -> Result<Vec<AngularInterval>, GeometryError> {
    if obstacle.contains_or_touches(viewpoint) {
        return Err(GeometryError::EnclosedViewpoint);
    }
    let bearings: Vec<f64> = obstacle
        .vertices()
        .iter()
        .map(|&v| bearing_of(viewpoint, v))
        .collect::<Result<_, _>>()?;
    let n = bearings.len();
    let mut arcs = Vec::with_capacity(n);
    for i in 0..n {
        let a = bearings[i];
        let b = bearings[(i + 1) % n];
        let mut d = b - a;
        if d > PI {
            d -= TAU;
        } else if d <= -PI {
            d += TAU;
        }
        let arc = if d > 0.0 {
            AngularInterval::from_endpoints(a, b)
        } else {
            AngularInterval::from_endpoints(b, a)
        };
        arcs.extend(arc);
    }
    Ok(merge_intervals(&arcs).intervals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(s: f64, e: f64) -> AngularInterval {
        AngularInterval::from_endpoints(s, e).unwrap()
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> PolygonRing {
        PolygonRing::new(vec![
            GeoPoint::new(x0, y0),
            GeoPoint::new(x1, y0),
            GeoPoint::new(x1, y1),
            GeoPoint::new(x0, y1),
        ])
        .unwrap()
    }

    /// Bearing-by-bearing hit test, independent of the edge-arc construction.
    fn ray_hits(origin: GeoPoint, bearing: f64, ring: &PolygonRing) -> bool {
        let (dx, dy) = (bearing.cos(), bearing.sin());
        ring.edges().any(|(a, b)| {
            let ex = b.lon - a.lon;
            let ey = b.lat - a.lat;
            let denom = dx * ey - dy * ex;
            if denom.abs() < 1e-15 {
                return false;
            }
            let wx = a.lon - origin.lon;
            let wy = a.lat - origin.lat;
            let t = (wx * ey - wy * ex) / denom;
            let s = (wx * dy - wy * dx) / denom;
            t > 0.0 && (0.0..=1.0).contains(&s)
        })
    }

    fn oracle_agrees(origin: GeoPoint, rings: &[PolygonRing], arcs: &[AngularInterval]) {
        let tol = 0.02f64.to_radians();
        for k in 0..36_000 {
            let b = (k as f64 * 0.01).to_radians();
            let hit = rings.iter().any(|r| ray_hits(origin, b, r));
            let inside = arcs.iter().any(|a| a.contains(b));
            if hit != inside {
                let near_end = arcs.iter().any(|a| {
                    let ds = (b - a.start()).abs().min(TAU - (b - a.start()).abs());
                    let de = (b - a.end()).abs().min(TAU - (b - a.end()).abs());
                    ds < tol || de < tol
                });
                assert!(near_end, "disagreement at bearing {b}");
            }
        }
    }

    #[test]
    fn merge_overlapping() {
        let m = merge_intervals(&[iv(0.0, 1.0), iv(0.5, 2.0)]);
        assert_eq!(m.intervals, vec![iv(0.0, 2.0)]);
        assert!((m.total_measure - 2.0).abs() < 1e-15);
    }

    #[test]
    fn merge_empty() {
        let m = merge_intervals(&[]);
        assert!(m.intervals.is_empty());
        assert_eq!(m.total_measure, 0.0);
    }

    #[test]
    fn merge_wrapped_with_overlap() {
        let wrapped = iv(5.8, 0.5);
        assert!(wrapped.wraps());
        let m = merge_intervals(&[wrapped, iv(0.4, 1.0)]);
        assert_eq!(m.intervals.len(), 1);
        let w = m.intervals[0];
        assert!(w.wraps());
        assert_eq!((w.start(), w.end()), (5.8, 1.0));

        // brute-force membership over 10^5 sampled bearings
        let samples = 100_000;
        let hits = (0..samples)
            .filter(|k| {
                let b = TAU * (*k as f64 + 0.5) / samples as f64;
                wrapped.contains(b) || iv(0.4, 1.0).contains(b)
            })
            .count();
        let brute = TAU * hits as f64 / samples as f64;
        assert!((m.total_measure - brute).abs() < 1e-3);
        assert!((m.total_measure - 1.4831853071795863).abs() < 1e-12);
    }

    #[test]
    fn merge_full_circle() {
        let m = merge_intervals(&[iv(0.0, 4.0), iv(3.0, 0.0)]);
        assert_eq!(m.intervals, vec![AngularInterval::FULL]);
        assert_eq!(m.total_measure, TAU);
    }

    #[test]
    fn square_straddling_axis() {
        let vp = GeoPoint::new(0.0, 0.0);
        let r = rect(10.0, -5.0, 20.0, 5.0);
        let arcs = angular_extent(vp, &r).unwrap();
        assert_eq!(arcs.len(), 1);
        let a = arcs[0];
        assert!(a.wraps());
        assert!((a.measure() - 2.0 * 0.5f64.atan()).abs() < 1e-12);
        assert!((a.measure() - 0.9273).abs() < 1e-4);
        assert!(a.contains(0.0));
        oracle_agrees(vp, &[r], &arcs);
    }

    #[test]
    fn two_opposite_squares() {
        let vp = GeoPoint::new(0.0, 0.0);
        let east = rect(100.0, -5.0, 110.0, 5.0);
        let west = rect(-110.0, -5.0, -100.0, 5.0);
        let mut arcs = angular_extent(vp, &east).unwrap();
        arcs.extend(angular_extent(vp, &west).unwrap());
        let m = merge_intervals(&arcs);
        assert_eq!(m.intervals.len(), 2);
        assert_eq!(m.intervals.iter().filter(|a| a.wraps()).count(), 1);
        oracle_agrees(vp, &[east, west], &m.intervals);
    }

    #[test]
    fn concave_ring_matches_oracle() {
        // U shape opening toward the viewpoint
        let p = GeoPoint::new;
        let u = PolygonRing::new(vec![
            p(10.0, -10.0),
            p(20.0, -10.0),
            p(20.0, 10.0),
            p(10.0, 10.0),
            p(10.0, 6.0),
            p(16.0, 6.0),
            p(16.0, -6.0),
            p(10.0, -6.0),
        ])
        .unwrap();
        let vp = p(0.0, 1.0);
        let arcs = angular_extent(vp, &u).unwrap();
        oracle_agrees(vp, &[u], &arcs);
    }

    #[test]
    fn slotted_ring_around_viewpoint() {
        // square annulus with a slit on the +x side; viewpoint sits in the hollow
        let p = GeoPoint::new;
        let c = PolygonRing::new(vec![
            p(10.0, -1.0),
            p(10.0, -10.0),
            p(-10.0, -10.0),
            p(-10.0, 10.0),
            p(10.0, 10.0),
            p(10.0, 1.0),
            p(8.0, 1.0),
            p(8.0, 8.0),
            p(-8.0, 8.0),
            p(-8.0, -8.0),
            p(8.0, -8.0),
            p(8.0, -1.0),
        ])
        .unwrap();
        let vp = p(0.0, 0.0);
        let arcs = angular_extent(vp, &c).unwrap();
        assert_eq!(arcs.len(), 1);
        // the slit walls shadow everything but the narrow outer mouth
        let gap = 2.0 * (1.0f64 / 10.0).atan();
        assert!((arcs[0].measure() - (TAU - gap)).abs() < 1e-12);
        oracle_agrees(vp, &[c], &arcs);
    }

    #[test]
    fn viewpoint_inside_or_on_boundary() {
        let r = rect(-1.0, -1.0, 1.0, 1.0);
        assert_eq!(
            angular_extent(GeoPoint::new(0.0, 0.0), &r),
            Err(GeometryError::EnclosedViewpoint)
        );
        assert_eq!(
            angular_extent(GeoPoint::new(1.0, 0.5), &r),
            Err(GeometryError::EnclosedViewpoint)
        );
    }
}
