//! Road-visible percentage at intersections.
//!
//! Two measures are computed for every intersection:
//!
//! * **full circle**: the fraction of the 360° panorama at the node that is not
//!   occluded by buildings, taken as the measure of the union of the angular
//!   extents of nearby footprints;
//! * **sector**: drivers approaching along each arm look toward the node
//!   through a fan of rays spanning the field of view. Each ray stops at the
//!   first building it meets or at the maximum range, and the visible share is
//!   the area of the resulting fan relative to the unobstructed fan.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::{
    angular_extent, bearing_of, cast_ray, interpolate_along, merge_intervals, meters_to_deg, GeoPoint, GeometryError,
    ObstacleIndex,
};
use crate::ingest::{OsmId, RoadSegment};
use crate::network::IntersectionNode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisibilityError {
    #[error("invalid visibility config: {0}")]
    InvalidConfig(String),
    #[error("intersection {0} has no approach arms")]
    NoApproaches(OsmId),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityMeasure {
    Sector,
    FullCircle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisibilityConfig {
    pub fov_deg: f64,
    pub ray_step_deg: f64,
    /// Rays per fan, both edges of the field of view included.
    pub ray_count: usize,
    pub max_range_m: f64,
    pub interp_spacing_m: f64,
    /// How far back along each arm viewpoints are placed.
    pub sample_extent_m: f64,
    pub aggregation: Aggregation,
    /// Which measure feeds the modeling table.
    pub measure: VisibilityMeasure,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            fov_deg: 80.0,
            ray_step_deg: 1.0,
            ray_count: 81,
            max_range_m: 100.0,
            interp_spacing_m: 10.0,
            sample_extent_m: 50.0,
            aggregation: Aggregation::Mean,
            measure: VisibilityMeasure::Sector,
        }
    }
}

impl VisibilityConfig {
    /// Config with the given field of view and step; the ray count follows.
    pub fn with_fov(fov_deg: f64, ray_step_deg: f64) -> Self {
        Self {
            fov_deg,
            ray_step_deg,
            ray_count: (fov_deg / ray_step_deg).round() as usize + 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), VisibilityError> {
        let positive = [
            ("fov_deg", self.fov_deg),
            ("ray_step_deg", self.ray_step_deg),
            ("max_range_m", self.max_range_m),
            ("interp_spacing_m", self.interp_spacing_m),
            ("sample_extent_m", self.sample_extent_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(VisibilityError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.fov_deg >= 360.0 {
            return Err(VisibilityError::InvalidConfig("fov_deg must be below 360".into()));
        }
        let implied = self.fov_deg / self.ray_step_deg + 1.0;
        if self.ray_count < 2 || (implied - self.ray_count as f64).abs() > 1e-9 {
            return Err(VisibilityError::InvalidConfig(format!(
                "ray_count {} inconsistent with fov {} / step {} + 1",
                self.ray_count, self.fov_deg, self.ray_step_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSample {
    pub point: GeoPoint,
    /// Planar heading of the fan's center ray, radians.
    pub heading: f64,
    pub view_percentage: f64,
    /// Closed ring: viewpoint, ray endpoints in order, viewpoint again.
    pub view_polygon: Vec<GeoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionVisibility {
    pub node_id: OsmId,
    pub location: GeoPoint,
    pub full_circle_percentage: f64,
    pub sector_mean_percentage: f64,
    pub sector_min_percentage: f64,
    pub samples: Vec<ViewSample>,
}

impl IntersectionVisibility {
    /// The value used as the visibility covariate under `config`.
    pub fn modeling_value(&self, config: &VisibilityConfig) -> f64 {
        match (config.measure, config.aggregation) {
            (VisibilityMeasure::FullCircle, _) => self.full_circle_percentage,
            (VisibilityMeasure::Sector, Aggregation::Mean) => self.sector_mean_percentage,
            (VisibilityMeasure::Sector, Aggregation::Min) => self.sector_min_percentage,
        }
    }
}

/// Unoccluded share of the full panorama at `location`, considering
/// footprints whose bounding box lies within `max_range` (degrees).
pub fn view_percentage_full_circle(location: GeoPoint, buildings: &ObstacleIndex, max_range: f64) -> f64 {
    let nearby = buildings.within(location, max_range);
    full_circle_over(location, nearby.iter().map(|&id| buildings.ring(id)))
}

/// Full-circle visibility against an explicit set of obstacles.
pub fn full_circle_over<'a>(
    location: GeoPoint,
    obstacles: impl IntoIterator<Item = &'a crate::geometry::PolygonRing>,
) -> f64 {
    let mut arcs = Vec::new();
    for ring in obstacles {
        match angular_extent(location, ring) {
            Ok(a) => arcs.extend(a),
            Err(_) => return 0.0,
        }
    }
    let blocked = merge_intervals(&arcs).total_measure;
    (1.0 - blocked / TAU).clamp(0.0, 1.0)
}

/// Fan area from consecutive ray lengths separated by `step` radians.
fn fan_area(radii: &[f64], step: f64) -> f64 {
    0.5 * step.sin() * radii.windows(2).map(|w| w[0] * w[1]).sum::<f64>()
}

/// One fan of rays centered on `heading`.
pub fn sector_view_sample(
    point: GeoPoint,
    heading: f64,
    buildings: &ObstacleIndex,
    config: &VisibilityConfig,
) -> Result<ViewSample, VisibilityError> {
    config.validate()?;
    if buildings.containing(point).is_some() {
        return Ok(ViewSample {
            point,
            heading,
            view_percentage: 0.0,
            view_polygon: vec![point; 4],
        });
    }
    let step = config.ray_step_deg.to_radians();
    let range = meters_to_deg(config.max_range_m);
    let half = (config.ray_count - 1) as f64 / 2.0;

    let mut radii = Vec::with_capacity(config.ray_count);
    let mut polygon = Vec::with_capacity(config.ray_count + 2);
    polygon.push(point);
    for k in 0..config.ray_count {
        let bearing = heading + (k as f64 - half) * step;
        let hit = cast_ray(point, bearing, range, buildings)?;
        radii.push(hit.distance);
        polygon.push(point.offset(bearing, hit.distance));
    }
    polygon.push(point);

    let open = vec![range; config.ray_count];
    let fraction = fan_area(&radii, step) / fan_area(&open, step);
    Ok(ViewSample {
        point,
        heading,
        view_percentage: fraction.clamp(0.0, 1.0),
        view_polygon: polygon,
    })
}

/// Polylines leaving the intersection along every incident way, each starting
/// at the constituent OSM node it leaves from.
pub fn approach_arms(node: &IntersectionNode, segments: &BTreeMap<OsmId, &RoadSegment>) -> Vec<Vec<GeoPoint>> {
    let mut arms = Vec::new();
    for way in &node.incident_segments {
        let Some(seg) = segments.get(way) else { continue };
        for (i, id) in seg.node_ids.iter().enumerate() {
            if !node.merged_from.contains(id) {
                continue;
            }
            if i > 0 {
                arms.push(seg.geometry[..=i].iter().rev().copied().collect());
            }
            if i + 1 < seg.geometry.len() {
                arms.push(seg.geometry[i..].to_vec());
            }
        }
    }
    arms
}

/// The first `extent` units of `arm`.
fn truncate(arm: &[GeoPoint], extent: f64) -> Vec<GeoPoint> {
    let mut out = vec![arm[0]];
    let mut walked = 0.0;
    for w in arm.windows(2) {
        let seg = w[0].distance(&w[1]);
        if walked + seg >= extent {
            let f = if seg > 0.0 { (extent - walked) / seg } else { 0.0 };
            out.push(GeoPoint::new(
                w[0].lon + f * (w[1].lon - w[0].lon),
                w[0].lat + f * (w[1].lat - w[0].lat),
            ));
            return out;
        }
        walked += seg;
        out.push(w[1]);
    }
    out
}

/// Viewpoints along one arm with headings pointing back toward the node.
fn arm_viewpoints(arm: &[GeoPoint], config: &VisibilityConfig) -> Result<Vec<(GeoPoint, f64)>, GeometryError> {
    let line = truncate(arm, meters_to_deg(config.sample_extent_m));
    let spacing = meters_to_deg(config.interp_spacing_m);
    let points = interpolate_along(&line, spacing)?;

    // cumulative arc length at the end of each leg
    let mut ends = Vec::with_capacity(line.len() - 1);
    let mut acc = 0.0;
    for w in line.windows(2) {
        acc += w[0].distance(&w[1]);
        ends.push(acc);
    }
    let last = points.len() - 1;
    points
        .into_iter()
        .enumerate()
        .map(|(j, p)| {
            let offset = if j == last { acc } else { j as f64 * spacing };
            let mut leg = ends.iter().position(|&e| e >= offset).unwrap_or(ends.len() - 1);
            // skip zero-length legs
            while leg + 1 < ends.len() && line[leg] == line[leg + 1] {
                leg += 1;
            }
            Ok((p, bearing_of(line[leg + 1], line[leg])?))
        })
        .collect()
}

/// Visibility for one intersection given its approach arms.
pub fn intersection_visibility(
    node: &IntersectionNode,
    arms: &[Vec<GeoPoint>],
    buildings: &ObstacleIndex,
    config: &VisibilityConfig,
) -> Result<IntersectionVisibility, VisibilityError> {
    config.validate()?;
    let mut samples = Vec::new();
    for arm in arms {
        if arm.len() < 2 || arm.windows(2).all(|w| w[0] == w[1]) {
            continue;
        }
        for (p, heading) in arm_viewpoints(arm, config)? {
            samples.push(sector_view_sample(p, heading, buildings, config)?);
        }
    }
    if samples.is_empty() {
        return Err(VisibilityError::NoApproaches(node.node_id));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.view_percentage).sum::<f64>() / n;
    let min = samples.iter().map(|s| s.view_percentage).fold(f64::INFINITY, f64::min);
    Ok(IntersectionVisibility {
        node_id: node.node_id,
        location: node.location,
        full_circle_percentage: view_percentage_full_circle(
            node.location,
            buildings,
            meters_to_deg(config.max_range_m),
        ),
        sector_mean_percentage: mean.clamp(0.0, 1.0),
        sector_min_percentage: min,
        samples,
    })
}

/// Visibility for every node, computed in parallel. Output order follows
/// `nodes`, and results match a sequential run exactly.
pub fn compute_all(
    nodes: &[IntersectionNode],
    segments: &[RoadSegment],
    buildings: &ObstacleIndex,
    config: &VisibilityConfig,
) -> Result<Vec<IntersectionVisibility>, VisibilityError> {
    config.validate()?;
    let by_id: BTreeMap<OsmId, &RoadSegment> = segments.iter().map(|s| (s.way_id, s)).collect();
    nodes
        .par_iter()
        .map(|n| intersection_visibility(n, &approach_arms(n, &by_id), buildings, config))
        .collect()
}

fn coords(p: &GeoPoint) -> Value {
    json!([p.lon, p.lat])
}

/// GeoJSON FeatureCollection: for each intersection a Point feature followed
/// by one Polygon feature per view sample.
pub fn visibility_geojson(results: &[IntersectionVisibility]) -> Value {
    let mut features = Vec::new();
    for r in results {
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": coords(&r.location) },
            "properties": {
                "node_id": r.node_id,
                "full_circle_percentage": r.full_circle_percentage,
                "sector_mean_percentage": r.sector_mean_percentage,
            },
        }));
        for s in &r.samples {
            let mut ring: Vec<Value> = s.view_polygon.iter().map(coords).collect();
            if s.view_polygon.first() != s.view_polygon.last() {
                ring.push(coords(&s.view_polygon[0]));
            }
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [ring] },
                "properties": {
                    "node_id": r.node_id,
                    "view_percentage": s.view_percentage,
                },
            }));
        }
    }
    json!({ "type": "FeatureCollection", "features": features })
}
