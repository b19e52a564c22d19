use super::{GeoPoint, GeometryError, PolygonRing};

pub fn polyline_length(polyline: &[GeoPoint]) -> f64 {
    polyline.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Points at arc-length offsets `0, spacing, 2·spacing, …` from the start of
/// `polyline`, always ending with its last vertex.
pub fn interpolate_along(polyline: &[GeoPoint], spacing: f64) -> Result<Vec<GeoPoint>, GeometryError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(GeometryError::NonPositive {
            name: "spacing",
            value: spacing,
        });
    }
    let total = polyline_length(polyline);
    if polyline.len() < 2 || (total.is_nan() || total <= 0.0) {
        return Err(GeometryError::EmptyPolyline);
    }
    // offsets this close to the end are the end itself
    let slack = spacing * 1e-9;

    let mut out = vec![polyline[0]];
    let mut k = 1usize;
    let mut walked = 0.0;
    for w in polyline.windows(2) {
        let seg = w[0].distance(&w[1]);
        if seg == 0.0 {
            continue;
        }
        loop {
            let target = k as f64 * spacing;
            if target >= total - slack || target > walked + seg {
                break;
            }
            let f = (target - walked) / seg;
            out.push(GeoPoint::new(
                w[0].lon + f * (w[1].lon - w[0].lon),
                w[0].lat + f * (w[1].lat - w[0].lat),
            ));
            k += 1;
        }
        walked += seg;
    }
    out.push(*polyline.last().unwrap());
    Ok(out)
}

/// Rectangle of total width `width` with `a`-`b` as its centerline.
pub fn rect_buffer(a: GeoPoint, b: GeoPoint, width: f64) -> Result<PolygonRing, GeometryError> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(GeometryError::NonPositive {
            name: "width",
            value: width,
        });
    }
    let len = a.distance(&b);
    if len.is_nan() || len <= 0.0 {
        return Err(GeometryError::DegenerateSegment);
    }
    let half = width / 2.0;
    // left-hand unit normal scaled to half the width
    let nx = -(b.lat - a.lat) / len * half;
    let ny = (b.lon - a.lon) / len * half;
    PolygonRing::new(vec![
        GeoPoint::new(a.lon - nx, a.lat - ny),
        GeoPoint::new(b.lon - nx, b.lat - ny),
        GeoPoint::new(b.lon + nx, b.lat + ny),
        GeoPoint::new(a.lon + nx, a.lat + ny),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ROAD_WIDTH_DEG;

    fn p(x: f64, y: f64) -> GeoPoint {
        GeoPoint::new(x, y)
    }

    #[test]
    fn exact_division_keeps_both_endpoints() {
        let pts = interpolate_along(&[p(0.0, 0.0), p(0.0, 0.001)], 0.0005).unwrap();
        assert_eq!(pts.len(), 3);
        assert!((pts[1].lat - 0.0005).abs() < 1e-15);
        assert_eq!(pts[2], p(0.0, 0.001));
    }

    #[test]
    fn short_segment_gives_endpoints() {
        let pts = interpolate_along(&[p(0.0, 0.0), p(0.0003, 0.0)], 0.001).unwrap();
        assert_eq!(pts, vec![p(0.0, 0.0), p(0.0003, 0.0)]);
    }

    #[test]
    fn multi_vertex_walk() {
        // legs of 0.0015 and 0.001: offsets 0, 0.001, 0.002 and the end at 0.0025
        let line = [p(0.0, 0.0), p(0.0015, 0.0), p(0.0015, 0.001)];
        let pts = interpolate_along(&line, 0.001).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts[1].distance(&p(0.001, 0.0)) < 1e-15);
        assert!(pts[2].distance(&p(0.0015, 0.0005)) < 1e-15);
        assert_eq!(pts[3], p(0.0015, 0.001));
        for w in pts.windows(2) {
            assert!(w[0].distance(&w[1]) <= 0.001 + 1e-15);
        }
    }

    #[test]
    fn empty_inputs_error() {
        assert_eq!(interpolate_along(&[], 1.0), Err(GeometryError::EmptyPolyline));
        assert_eq!(
            interpolate_along(&[p(1.0, 1.0), p(1.0, 1.0)], 1.0),
            Err(GeometryError::EmptyPolyline)
        );
        assert!(interpolate_along(&[p(0.0, 0.0), p(1.0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn road_buffer_corners() {
        let r = rect_buffer(p(0.0, 0.0), p(0.001, 0.0), ROAD_WIDTH_DEG).unwrap();
        let want = [
            p(0.0, -0.0009842),
            p(0.001, -0.0009842),
            p(0.001, 0.0009842),
            p(0.0, 0.0009842),
        ];
        for (got, want) in r.vertices().iter().zip(want) {
            assert!(got.distance(&want) < 1e-15, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn diagonal_buffer_area() {
        let w = ROAD_WIDTH_DEG;
        let r = rect_buffer(p(0.0, 0.0), p(0.001, 0.001), w).unwrap();
        assert!((r.area() - 0.001 * 2f64.sqrt() * w).abs() < 1e-12);
    }

    #[test]
    fn buffer_area_vanishes_with_width() {
        let a = rect_buffer(p(0.0, 0.0), p(1.0, 0.0), 1e-9).unwrap().area();
        assert!(a < 1e-8);
        assert!(rect_buffer(p(0.0, 0.0), p(0.0, 0.0), 1.0).is_err());
        assert!(rect_buffer(p(0.0, 0.0), p(1.0, 0.0), 0.0).is_err());
    }
}
