use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{AssignedPayload, FittedPayload, ModelSelection, PipelineError, Result, VisiblePayload};
use crate::glm::{GlmFit, ModelKind};
use crate::visibility::visibility_geojson;

const Z_975: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
}

impl VariableSummary {
    pub fn of(name: &str, values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Self {
            name: name.to_string(),
            count: n,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            sd: if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub intersections_detected: usize,
    pub intersections_after_merge: usize,
    pub observations: usize,
    pub accidents_in_area: usize,
    pub accidents_counted: usize,
    pub accidents_uncounted: usize,
    pub variables: Vec<VariableSummary>,
}

pub fn summarize(assigned: &AssignedPayload) -> DatasetSummary {
    let rows = &assigned.table.rows;
    let col =
        |f: &dyn Fn(&crate::network::ModelingRow) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(f).collect() };
    let mut variables = vec![VariableSummary::of(
        "accident_count",
        &col(&|r| Some(f64::from(r.accident_count))),
    )];
    let vis = col(&|r| r.visible_percentage);
    if !vis.is_empty() {
        variables.push(VariableSummary::of("visible_percentage", &vis));
    }
    variables.push(VariableSummary::of("traffic", &col(&|r| Some(r.traffic))));
    variables.push(VariableSummary::of("max_speed", &col(&|r| Some(r.max_speed))));
    variables.push(VariableSummary::of(
        "road_type_primary",
        &col(&|r| Some(f64::from(r.road_type_primary))),
    ));
    variables.push(VariableSummary::of(
        "road_type_secondary",
        &col(&|r| Some(f64::from(r.road_type_secondary))),
    ));
    DatasetSummary {
        intersections_detected: assigned.raw_intersections,
        intersections_after_merge: assigned.table.candidate_nodes,
        observations: rows.len(),
        accidents_in_area: assigned.assignment.assigned_to.len(),
        accidents_counted: assigned.assignment.counted,
        accidents_uncounted: assigned.assignment.uncounted,
        variables,
    }
}

fn title(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::M1 => "Model 1",
        ModelKind::M2 => "Model 2",
    }
}

fn num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e7) {
        format!("{v:.4e}")
    } else {
        format!("{v:.4}")
    }
}

fn selected(payload: &FittedPayload, selection: ModelSelection) -> Vec<(ModelKind, &GlmFit)> {
    payload
        .fits()
        .into_iter()
        .filter(|(k, _)| match k {
            ModelKind::M1 => selection.includes_m1(),
            ModelKind::M2 => selection.includes_m2(),
        })
        .collect()
}

fn model_block(out: &mut String, kind: ModelKind, fit: &GlmFit) {
    let rule = "-".repeat(86);
    let left: [(&str, String); 8] = [
        ("Dep. Variable:", "accident_count".into()),
        ("Model:", "GLM".into()),
        ("Model Family:", "Poisson".into()),
        ("Link Function:", "Log".into()),
        ("Method:", "IRLS".into()),
        ("No. Iterations:", fit.iterations.to_string()),
        ("Converged:", if fit.converged { "yes" } else { "no" }.into()),
        (
            "Dropped:",
            if fit.dropped_columns.is_empty() {
                "none".into()
            } else {
                fit.dropped_columns.join(", ")
            },
        ),
    ];
    let right: [(&str, String); 8] = [
        ("No. Observations:", fit.n_obs.to_string()),
        ("Df Residuals:", fit.df_residual.to_string()),
        ("Df Model:", fit.df_model.to_string()),
        ("Scale:", "1.0000".into()),
        ("Log-Likelihood:", format!("{:.2}", fit.log_likelihood)),
        ("Deviance:", format!("{:.2}", fit.deviance)),
        ("Pearson chi2:", format!("{:.2}", fit.pearson_chi2)),
        ("Pseudo R-squ. (CS):", format!("{:.4}", fit.pseudo_r2_cs)),
    ];
    let _ = writeln!(out, "Generalized Linear Model Regression Results: {}", title(kind));
    let _ = writeln!(out, "{rule}");
    for ((lk, lv), (rk, rv)) in left.iter().zip(&right) {
        let _ = writeln!(out, "{lk:<16}{lv:<27}{rk:<21}{rv:>22}");
    }
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(
        out,
        "{:<22}{:>12}{:>12}{:>10}{:>10}{:>10}{:>10}",
        "", "coef", "std err", "z", "P>|z|", "[0.025", "0.975]"
    );
    let _ = writeln!(out, "{rule}");
    for c in &fit.coefficients {
        let _ = writeln!(
            out,
            "{:<22}{:>12}{:>12}{:>10.3}{:>10.3}{:>10}{:>10}",
            c.name,
            num(c.estimate),
            num(c.std_error),
            c.z,
            c.p_value,
            num(c.estimate - Z_975 * c.std_error),
            num(c.estimate + Z_975 * c.std_error),
        );
    }
    let _ = writeln!(out, "{rule}");
}

fn text_report(payload: &FittedPayload, fits: &[(ModelKind, &GlmFit)]) -> String {
    let mut out = String::new();
    let s = &payload.summary;
    let _ = writeln!(out, "Dataset summary");
    let _ = writeln!(out, "  Intersections detected:     {}", s.intersections_detected);
    let _ = writeln!(out, "  Intersections after merge:  {}", s.intersections_after_merge);
    let _ = writeln!(out, "  Observations after filters: {}", s.observations);
    let _ = writeln!(
        out,
        "  Accidents in area:          {} (counted {}, uncounted {})",
        s.accidents_in_area, s.accidents_counted, s.accidents_uncounted
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<22}{:>8}{:>28}{:>14}{:>14}",
        "Variable", "Count", "Range", "Mean", "SD"
    );
    for v in &s.variables {
        let range = format!("{} - {}", num(v.min), num(v.max));
        let _ = writeln!(
            out,
            "{:<22}{:>8}{:>28}{:>14}{:>14}",
            v.name,
            v.count,
            range,
            num(v.mean),
            num(v.sd)
        );
    }
    for (kind, fit) in fits {
        let _ = writeln!(out);
        model_block(&mut out, *kind, fit);
    }
    if !fits.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Coefficients");
        let mut header = format!("{:<22}", "Variable");
        for (kind, _) in fits {
            let _ = write!(header, "{:>16}{:>10}", format!("{} Coef.", title(*kind)), "P>|z|");
        }
        let _ = writeln!(out, "{header}");
        let mut names: Vec<&str> = Vec::new();
        for (_, fit) in fits {
            for c in &fit.coefficients {
                if !names.contains(&c.name.as_str()) {
                    names.push(&c.name);
                }
            }
        }
        for name in names {
            let mut line = format!("{name:<22}");
            for (_, fit) in fits {
                match fit.coefficient(name) {
                    Some(c) => {
                        let _ = write!(line, "{:>16}{:>10.3}", num(c.estimate), c.p_value);
                    }
                    None => {
                        let _ = write!(line, "{:>16}{:>10}", "", "");
                    }
                }
            }
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Information criteria");
        let _ = writeln!(
            out,
            "{:<10}{:>14}{:>18}{:>22}",
            "Model", "AIC", "BIC (deviance)", "BIC (-2LL + k ln n)"
        );
        for (kind, fit) in fits {
            let _ = writeln!(
                out,
                "{:<10}{:>14.2}{:>18.2}{:>22.2}",
                title(*kind),
                fit.aic,
                fit.bic_deviance,
                fit.bic_standard
            );
        }
        if let (Some(c), 2) = (&payload.comparison, fits.len()) {
            let _ = writeln!(
                out,
                "{:<10}{:>14.2}{:>18.2}{:>22.2}",
                "Decrease", c.delta_aic, c.delta_bic_deviance, c.delta_bic_standard
            );
            let _ = writeln!(out, "Preferred by AIC: {}", title(c.preferred));
        }
    }
    out
}

/// Report for the fitted stage, limited to the selected models.
pub fn emit_report(payload: &FittedPayload, format: ReportFormat, selection: ModelSelection) -> Result<Vec<u8>> {
    let fits = selected(payload, selection);
    match format {
        ReportFormat::Text => Ok(text_report(payload, &fits).into_bytes()),
        ReportFormat::Json => {
            let models: serde_json::Map<String, serde_json::Value> = fits
                .iter()
                .map(|(k, f)| Ok((k.label().to_string(), serde_json::to_value(f)?)))
                .collect::<std::result::Result<_, serde_json::Error>>()
                .map_err(|e| PipelineError::Serialize(e.to_string()))?;
            let comparison = payload.comparison.as_ref().filter(|_| fits.len() == 2).map(|c| {
                json!({
                    "delta_aic": c.delta_aic,
                    "delta_bic_deviance": c.delta_bic_deviance,
                    "delta_bic_standard": c.delta_bic_standard,
                    "preferred": c.preferred.label(),
                })
            });
            let doc = json!({
                "dataset": payload.summary,
                "models": models,
                "comparison": comparison,
            });
            let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| PipelineError::Serialize(e.to_string()))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

pub fn emit_geojson(payload: &VisiblePayload) -> Result<Vec<u8>> {
    serde_json::to_vec(&visibility_geojson(&payload.results)).map_err(|e| PipelineError::Serialize(e.to_string()))
}
