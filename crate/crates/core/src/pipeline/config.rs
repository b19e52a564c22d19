use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::geometry::GeoPoint;
use crate::glm::IrlsOptions;
use crate::ingest::{AadfColumns, AccidentColumns};
use crate::visibility::VisibilityConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSelection {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[default]
    Both,
}

impl ModelSelection {
    pub fn includes_m1(self) -> bool {
        self != ModelSelection::Two
    }

    pub fn includes_m2(self) -> bool {
        self != ModelSelection::One
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub osm: PathBuf,
    pub accidents: PathBuf,
    pub traffic: PathBuf,
}

/// Output file names, resolved against the stage directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub modeling_table: PathBuf,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
    pub geojson: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            modeling_table: "modeling_table.csv".into(),
            report_json: "report.json".into(),
            report_text: "report.txt".into(),
            geojson: "visibility.geojson".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        let o = IrlsOptions::default();
        Self {
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

impl From<FitOptions> for IrlsOptions {
    fn from(o: FitOptions) -> Self {
        IrlsOptions {
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

fn default_center() -> GeoPoint {
    GeoPoint::new(-0.19123, 51.50212)
}

fn default_radius() -> f64 {
    3000.0
}

fn default_buffer() -> f64 {
    0.0003
}

fn default_min_year() -> i32 {
    2010
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_center")]
    pub center: GeoPoint,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    /// Accident counting radius around each intersection, degrees.
    #[serde(default = "default_buffer")]
    pub buffer_radius_deg: f64,
    /// Intersections closer than this are merged, degrees.
    #[serde(default = "default_buffer")]
    pub merge_threshold_deg: f64,
    #[serde(default = "default_min_year")]
    pub min_year: i32,
    #[serde(default)]
    pub visibility: VisibilityConfig,
    #[serde(default)]
    pub accident_columns: AccidentColumns,
    #[serde(default)]
    pub aadf_columns: AadfColumns,
    #[serde(default)]
    pub model: ModelSelection,
    #[serde(default)]
    pub fit: FitOptions,
    pub inputs: InputPaths,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl RunConfig {
    /// Config with default parameters for the given inputs.
    pub fn with_inputs(inputs: InputPaths) -> Self {
        Self {
            center: default_center(),
            radius_m: default_radius(),
            buffer_radius_deg: default_buffer(),
            merge_threshold_deg: default_buffer(),
            min_year: default_min_year(),
            visibility: VisibilityConfig::default(),
            accident_columns: AccidentColumns::default(),
            aadf_columns: AadfColumns::default(),
            model: ModelSelection::default(),
            fit: FitOptions::default(),
            inputs,
            outputs: OutputPaths::default(),
        }
    }

    /// Reads a JSON config; relative input paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.inputs.osm,
            &mut config.inputs.accidents,
            &mut config.inputs.traffic,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        GeoPoint::try_new(self.center.lon, self.center.lat)
            .map_err(|e| PipelineError::Config(format!("center: {e}")))?;
        for (name, v) in [
            ("radius_m", self.radius_m),
            ("buffer_radius_deg", self.buffer_radius_deg),
            ("merge_threshold_deg", self.merge_threshold_deg),
            ("fit.tol", self.fit.tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PipelineError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.fit.max_iter == 0 {
            return Err(PipelineError::Config("fit.max_iter must be positive".into()));
        }
        self.visibility
            .validate()
            .map_err(|e| PipelineError::Config(format!("visibility: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let c: RunConfig =
            serde_json::from_str(r#"{"inputs": {"osm": "a.osm", "accidents": "b.csv", "traffic": "c.csv"}}"#).unwrap();
        assert_eq!(c.center, GeoPoint::new(-0.19123, 51.50212));
        assert_eq!(c.radius_m, 3000.0);
        assert_eq!(c.buffer_radius_deg, 0.0003);
        assert_eq!(c.merge_threshold_deg, 0.0003);
        assert_eq!(c.min_year, 2010);
        assert_eq!(c.model, ModelSelection::Both);
        assert_eq!(c.visibility, VisibilityConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn model_selection_spelling() {
        let m: ModelSelection = serde_json::from_str("\"2\"").unwrap();
        assert_eq!(m, ModelSelection::Two);
        assert!(!m.includes_m1() && m.includes_m2());
    }

    #[test]
    fn rejects_non_positive_thresholds() {
        let mut c = RunConfig::with_inputs(InputPaths {
            osm: "a".into(),
            accidents: "b".into(),
            traffic: "c".into(),
        });
        c.merge_threshold_deg = 0.0;
        assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
    }
}
