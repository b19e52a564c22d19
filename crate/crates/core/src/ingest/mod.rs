//! Input datasets: OSM XML extracts, accident records and traffic counts.

mod osm;
mod tables;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{meters_to_deg, within_radius, GeoPoint, PolygonRing};

pub use osm::{parse_max_speed, parse_osm_extract, OsmExtract, OsmStats};
pub use tables::{parse_aadf_csv, parse_accident_csv, AadfColumns, AccidentColumns, AccidentParse, TrafficParse};

pub type OsmId = i64;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("study area radius must be positive, got {0}")]
    InvalidRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HighwayClass {
    Primary,
    Secondary,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedUnit {
    Mph,
    Kmh,
}

/// A speed limit exactly as tagged; values are never converted between units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedLimit {
    pub value: f64,
    pub unit: SpeedUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub way_id: OsmId,
    pub highway: String,
    pub highway_class: HighwayClass,
    pub max_speed: Option<SpeedLimit>,
    pub node_ids: Vec<OsmId>,
    pub geometry: Vec<GeoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingFootprint {
    pub way_id: OsmId,
    pub ring: PolygonRing,
    /// Source tags (height, usage, ...). Carried through, not used for occlusion.
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Fatal,
    Serious,
    Slight,
    Unknown,
}

impl Severity {
    pub fn parse(raw: &str) -> Severity {
        match raw.trim().to_ascii_lowercase().as_str() {
            "1" | "fatal" => Severity::Fatal,
            "2" | "serious" => Severity::Serious,
            "3" | "slight" => Severity::Slight,
            _ => Severity::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccidentRecord {
    pub accident_id: String,
    pub location: GeoPoint,
    pub year: i32,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficCountPoint {
    pub count_point_id: i64,
    pub location: GeoPoint,
    /// Annual average daily flow, vehicles per day.
    pub aadf: f64,
}

/// Disc of `radius_m` meters around `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyArea {
    pub center: GeoPoint,
    pub radius_m: f64,
}

impl StudyArea {
    pub fn new(center: GeoPoint, radius_m: f64) -> Result<Self, IngestError> {
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(IngestError::InvalidRadius(radius_m));
        }
        Ok(Self { center, radius_m })
    }

    pub fn radius_deg(&self) -> f64 {
        meters_to_deg(self.radius_m)
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        within_radius(self.center, p, self.radius_deg())
    }
}

/// Anything with representative points for study-area clipping.
pub trait Located {
    fn points(&self) -> &[GeoPoint];
}

impl Located for AccidentRecord {
    fn points(&self) -> &[GeoPoint] {
        std::slice::from_ref(&self.location)
    }
}

impl Located for TrafficCountPoint {
    fn points(&self) -> &[GeoPoint] {
        std::slice::from_ref(&self.location)
    }
}

impl Located for RoadSegment {
    fn points(&self) -> &[GeoPoint] {
        &self.geometry
    }
}

impl Located for BuildingFootprint {
    fn points(&self) -> &[GeoPoint] {
        self.ring.vertices()
    }
}

/// Keeps items with at least one representative point inside the area.
pub fn clip_to_area<T: Located>(mut items: Vec<T>, area: &StudyArea) -> Vec<T> {
    items.retain(|item| item.points().iter().any(|&p| area.contains(p)));
    items
}
