//! Staged pipeline: ingest → network → visibility → assign → fit, with a
//! hashed checkpoint written after every stage.

mod checkpoint;
mod config;
mod report;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::ObstacleIndex;
use crate::glm::{self, GlmError, GlmFit, ModelComparison, ModelKind};
use crate::ingest::{
    parse_aadf_csv, parse_accident_csv, parse_osm_extract, AccidentRecord, BuildingFootprint, IngestError, OsmId,
    OsmStats, RoadSegment, StudyArea, TrafficCountPoint,
};
use crate::network::{self, AccidentAssignment, IntersectionNode, ModelingTable, NetworkError};
use crate::visibility::{self, IntersectionVisibility, VisibilityConfig, VisibilityError};

pub use checkpoint::{content_hash, Checkpoint, Stage};
pub use config::{FitOptions, InputPaths, ModelSelection, OutputPaths, RunConfig};
pub use report::{emit_geojson, emit_report, summarize, DatasetSummary, ReportFormat, VariableSummary};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage} has not been run ({} not found); run the preceding stage first", path.display())]
    MissingStage { stage: Stage, path: PathBuf },
    #[error("checkpoint {stage} was not computed from the current {parent} checkpoint; rerun {stage}")]
    StaleCheckpoint { stage: Stage, parent: Stage },
    #[error("checkpoint {}: {reason}", path.display())]
    CorruptCheckpoint { path: PathBuf, reason: String },
    #[error("serialization failed: {0}")]
    Serialize(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
    #[error(transparent)]
    Glm(#[from] GlmError),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. }
            | PipelineError::Ingest(IngestError::Io(_))
            | PipelineError::Network(NetworkError::Io(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub osm: OsmStats,
    pub accidents_in_area: usize,
    pub accidents_outside_area: usize,
    pub accidents_before_min_year: usize,
    pub accidents_invalid: usize,
    pub traffic_points: usize,
    pub traffic_rejected_negative: usize,
    pub traffic_rejected_invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestedPayload {
    pub area: StudyArea,
    pub roads: Vec<RoadSegment>,
    pub buildings: Vec<BuildingFootprint>,
    pub accidents: Vec<AccidentRecord>,
    pub traffic_points: Vec<TrafficCountPoint>,
    pub summary: IngestSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkedPayload {
    /// Intersections detected before close ones were merged.
    pub raw_intersections: usize,
    pub nodes: Vec<IntersectionNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisiblePayload {
    pub config: VisibilityConfig,
    pub results: Vec<IntersectionVisibility>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedPayload {
    pub nodes: Vec<IntersectionNode>,
    pub assignment: AccidentAssignment,
    pub table: ModelingTable,
    pub raw_intersections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPayload {
    pub summary: DatasetSummary,
    pub model_1: Option<GlmFit>,
    pub model_2: Option<GlmFit>,
    pub comparison: Option<ModelComparison>,
}

impl FittedPayload {
    pub fn fits(&self) -> Vec<(ModelKind, &GlmFit)> {
        [(ModelKind::M1, &self.model_1), (ModelKind::M2, &self.model_2)]
            .into_iter()
            .filter_map(|(k, f)| f.as_ref().map(|f| (k, f)))
            .collect()
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PipelineError::io(path, e))
}

pub fn ingest(config: &RunConfig) -> Result<IngestedPayload> {
    let area = StudyArea::new(config.center, config.radius_m)?;
    let osm = parse_osm_extract(open(&config.inputs.osm)?, &area)?;
    let acc = parse_accident_csv(
        open(&config.inputs.accidents)?,
        &config.accident_columns,
        config.min_year,
    )?;
    let traffic = parse_aadf_csv(open(&config.inputs.traffic)?, &config.aadf_columns)?;
    let total = acc.records.len();
    let accidents: Vec<AccidentRecord> = acc.records.into_iter().filter(|a| area.contains(a.location)).collect();
    let summary = IngestSummary {
        osm: osm.stats,
        accidents_in_area: accidents.len(),
        accidents_outside_area: total - accidents.len(),
        accidents_before_min_year: acc.rejected_before_min_year,
        accidents_invalid: acc.rejected_invalid,
        traffic_points: traffic.points.len(),
        traffic_rejected_negative: traffic.rejected_negative,
        traffic_rejected_invalid: traffic.rejected_invalid,
    };
    Ok(IngestedPayload {
        area,
        roads: osm.roads,
        buildings: osm.buildings,
        accidents,
        traffic_points: traffic.points,
        summary,
    })
}

pub fn build_network(ingested: &IngestedPayload, config: &RunConfig) -> Result<NetworkedPayload> {
    let raw = network::detect_intersections(&ingested.roads);
    let raw_intersections = raw.len();
    let mut nodes = network::merge_close(raw, config.merge_threshold_deg)?;
    network::fill_missing_speeds(&mut nodes, &ingested.roads);
    Ok(NetworkedPayload {
        raw_intersections,
        nodes,
    })
}

pub fn compute_visibility(
    ingested: &IngestedPayload,
    networked: &NetworkedPayload,
    config: &RunConfig,
) -> Result<VisiblePayload> {
    let index = ObstacleIndex::new(ingested.buildings.iter().map(|b| b.ring.clone()).collect());
    let results = visibility::compute_all(&networked.nodes, &ingested.roads, &index, &config.visibility)?;
    Ok(VisiblePayload {
        config: config.visibility.clone(),
        results,
    })
}

pub fn assign(
    ingested: &IngestedPayload,
    networked: &NetworkedPayload,
    visible: &VisiblePayload,
    config: &RunConfig,
) -> Result<AssignedPayload> {
    let mut nodes = networked.nodes.clone();
    network::assign_traffic(&mut nodes, &ingested.traffic_points)?;
    let assignment = network::assign_accidents(&mut nodes, &ingested.accidents, config.buffer_radius_deg)?;
    let vis: BTreeMap<OsmId, f64> = visible
        .results
        .iter()
        .map(|r| (r.node_id, r.modeling_value(&visible.config)))
        .collect();
    let table = network::finalize_dataset(&nodes, &vis)?;
    Ok(AssignedPayload {
        nodes,
        assignment,
        table,
        raw_intersections: networked.raw_intersections,
    })
}

pub fn fit(assigned: &AssignedPayload, config: &RunConfig) -> Result<FittedPayload> {
    let opts = config.fit.into();
    let run = |kind| -> Result<GlmFit> {
        let design = glm::build_design(&assigned.table, kind)?;
        Ok(glm::fit_poisson_irls(&design, opts)?)
    };
    let model_1 = config.model.includes_m1().then(|| run(ModelKind::M1)).transpose()?;
    let model_2 = config.model.includes_m2().then(|| run(ModelKind::M2)).transpose()?;
    let comparison = match (&model_1, &model_2) {
        (Some(a), Some(b)) => Some(glm::compare_models(a, b)?),
        _ => None,
    };
    Ok(FittedPayload {
        summary: summarize(assigned),
        model_1,
        model_2,
        comparison,
    })
}

/// Loads the checkpoint for `stage` and every earlier one, checking that
/// each was derived from its predecessor.
struct Chain {
    ingested: Option<Checkpoint<IngestedPayload>>,
    networked: Option<Checkpoint<NetworkedPayload>>,
    visible: Option<Checkpoint<VisiblePayload>>,
    assigned: Option<Checkpoint<AssignedPayload>>,
}

impl Chain {
    fn load(dir: &Path, upto: Option<Stage>) -> Result<Self> {
        let mut chain = Chain {
            ingested: None,
            networked: None,
            visible: None,
            assigned: None,
        };
        let Some(upto) = upto else { return Ok(chain) };
        let needs = |s: Stage| s <= upto;
        let ingested = Checkpoint::<IngestedPayload>::load(dir, Stage::Ingested)?;
        if needs(Stage::Networked) {
            let n = Checkpoint::<NetworkedPayload>::load(dir, Stage::Networked)?;
            n.check_parent(&ingested)?;
            if needs(Stage::Visible) {
                let v = Checkpoint::<VisiblePayload>::load(dir, Stage::Visible)?;
                v.check_parent(&n)?;
                if needs(Stage::Assigned) {
                    let a = Checkpoint::<AssignedPayload>::load(dir, Stage::Assigned)?;
                    a.check_parent(&v)?;
                    chain.assigned = Some(a);
                }
                chain.visible = Some(v);
            }
            chain.networked = Some(n);
        }
        chain.ingested = Some(ingested);
        Ok(chain)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub hash: String,
    pub checkpoint: PathBuf,
}

fn save<T: Serialize + serde::de::DeserializeOwned>(
    dir: &Path,
    stage: Stage,
    parent: Option<String>,
    payload: T,
) -> Result<StageOutcome> {
    let cp = Checkpoint::new(stage, parent, payload)?;
    let path = cp.save(dir)?;
    Ok(StageOutcome {
        stage,
        hash: cp.hash,
        checkpoint: path,
    })
}

/// Runs one stage from the checkpoints already in `dir` and writes its own.
pub fn run_stage(stage: Stage, config: &RunConfig, dir: &Path) -> Result<StageOutcome> {
    config.validate()?;
    let chain = Chain::load(dir, stage.prior())?;
    match stage {
        Stage::Ingested => save(dir, stage, None, ingest(config)?),
        Stage::Networked => {
            let i = chain.ingested.expect("loaded");
            save(dir, stage, Some(i.hash.clone()), build_network(&i.payload, config)?)
        }
        Stage::Visible => {
            let i = chain.ingested.expect("loaded");
            let n = chain.networked.expect("loaded");
            let payload = compute_visibility(&i.payload, &n.payload, config)?;
            save(dir, stage, Some(n.hash), payload)
        }
        Stage::Assigned => {
            let i = chain.ingested.expect("loaded");
            let n = chain.networked.expect("loaded");
            let v = chain.visible.expect("loaded");
            let payload = assign(&i.payload, &n.payload, &v.payload, config)?;
            let csv_path = dir.join(&config.outputs.modeling_table);
            let file = File::create(&csv_path).map_err(|e| PipelineError::io(&csv_path, e))?;
            payload.table.write_csv(file)?;
            save(dir, stage, Some(v.hash), payload)
        }
        Stage::Fitted => {
            let a = chain.assigned.expect("loaded");
            save(dir, stage, Some(a.hash.clone()), fit(&a.payload, config)?)
        }
    }
}

/// Loads the fitted checkpoint, verifying the whole chain behind it.
pub fn load_fitted(dir: &Path) -> Result<Checkpoint<FittedPayload>> {
    let chain = Chain::load(dir, Some(Stage::Assigned))?;
    let f = Checkpoint::<FittedPayload>::load(dir, Stage::Fitted)?;
    f.check_parent(chain.assigned.as_ref().expect("loaded"))?;
    Ok(f)
}

/// Loads the visibility checkpoint, verifying the chain behind it.
pub fn load_visible(dir: &Path) -> Result<Checkpoint<VisiblePayload>> {
    let chain = Chain::load(dir, Some(Stage::Visible))?;
    Ok(chain.visible.expect("loaded"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub stages: Vec<StageOutcome>,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
    pub geojson: PathBuf,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

/// Runs every stage in order, then writes both reports and the GeoJSON.
pub fn run_all(config: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    let stages = Stage::ALL
        .iter()
        .map(|&s| run_stage(s, config, dir))
        .collect::<Result<Vec<_>>>()?;
    let fitted = load_fitted(dir)?;
    let visible = load_visible(dir)?;
    let out = &config.outputs;
    let (report_json, report_text, geojson) = (
        dir.join(&out.report_json),
        dir.join(&out.report_text),
        dir.join(&out.geojson),
    );
    write(
        &report_json,
        &emit_report(&fitted.payload, ReportFormat::Json, ModelSelection::Both)?,
    )?;
    write(
        &report_text,
        &emit_report(&fitted.payload, ReportFormat::Text, ModelSelection::Both)?,
    )?;
    write(&geojson, &emit_geojson(&visible.payload)?)?;
    Ok(RunOutcome {
        stages,
        report_json,
        report_text,
        geojson,
    })
}
