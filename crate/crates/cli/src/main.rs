use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sightline::pipeline::{
    self, emit_geojson, emit_report, ModelSelection, PipelineError, ReportFormat, RunConfig, Stage,
};

#[derive(Parser)]
#[command(
    name = "sightline",
    version,
    about = "Intersection visibility and accident-risk modeling"
)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding stage checkpoints and outputs.
    #[arg(long, global = true, default_value = "stages")]
    stage_dir: PathBuf,
    /// Models to fit or report; overrides the config.
    #[arg(long, global = true)]
    model: Option<ModelArg>,
    /// Report format.
    #[arg(long, global = true, default_value = "text")]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the OSM extract, accidents and traffic counts.
    Ingest,
    /// Detect, merge and attribute intersections.
    Network,
    /// Compute view percentages at every intersection.
    Visibility,
    /// Assign accidents and traffic, and write the modeling table.
    Assign,
    /// Fit the Poisson models.
    Fit,
    /// Print the regression report.
    Report,
    /// Print the visibility GeoJSON.
    ExportGeojson,
    /// Run every stage and write reports and GeoJSON to the stage directory.
    RunAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

impl From<ModelArg> for ModelSelection {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::One => ModelSelection::One,
            ModelArg::Two => ModelSelection::Two,
            ModelArg::Both => ModelSelection::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| PipelineError::Config("--config is required for this command".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(m) = cli.model {
        config.model = m.into();
    }
    Ok(config)
}

fn stage(cli: &Cli, stage: Stage) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    let out = pipeline::run_stage(stage, &config, &cli.stage_dir)?;
    println!("{} {} {}", out.stage, out.hash, out.checkpoint.display());
    Ok(())
}

fn stdout(bytes: &[u8]) -> Result<(), PipelineError> {
    std::io::stdout()
        .write_all(bytes)
        .map_err(|e| PipelineError::io(Path::new("<stdout>"), e))
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Ingest => stage(cli, Stage::Ingested),
        Command::Network => stage(cli, Stage::Networked),
        Command::Visibility => stage(cli, Stage::Visible),
        Command::Assign => stage(cli, Stage::Assigned),
        Command::Fit => stage(cli, Stage::Fitted),
        Command::Report => {
            let fitted = pipeline::load_fitted(&cli.stage_dir)?;
            let format = match cli.format {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Text => ReportFormat::Text,
            };
            let selection = cli.model.map(Into::into).unwrap_or_default();
            stdout(&emit_report(&fitted.payload, format, selection)?)
        }
        Command::ExportGeojson => {
            let visible = pipeline::load_visible(&cli.stage_dir)?;
            let mut bytes = emit_geojson(&visible.payload)?;
            bytes.push(b'\n');
            stdout(&bytes)
        }
        Command::RunAll => {
            let config = load_config(cli)?;
            let out = pipeline::run_all(&config, &cli.stage_dir)?;
            for s in &out.stages {
                println!("{} {} {}", s.stage, s.hash, s.checkpoint.display());
            }
            println!("report {}", out.report_json.display());
            println!("report {}", out.report_text.display());
            println!("geojson {}", out.geojson.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
