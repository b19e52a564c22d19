//! Poisson regression with a log link, fitted by iteratively reweighted least squares.

mod irls;
pub mod stats;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::network::ModelingTable;

pub use irls::{fit_poisson_irls, wald_stats, IrlsOptions};

#[derive(Debug, thiserror::Error)]
pub enum GlmError {
    #[error("column {0} is missing or unpopulated")]
    MissingColumn(String),
    #[error("design has no rows")]
    Empty,
    #[error("response must be non-negative integer counts (row {row}: {value})")]
    InvalidResponse { row: usize, value: f64 },
    #[error("non-finite value in column {column} at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("response is zero for every observation")]
    AllZeroResponse,
    #[error("{n} observations cannot identify {k} parameters")]
    TooFewObservations { n: usize, k: usize },
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("fits use different observation counts ({0} vs {1})")]
    MismatchedObservations(usize, usize),
    #[error("column count {columns} does not match names ({names})")]
    Shape { columns: usize, names: usize },
}

pub type Result<T> = std::result::Result<T, GlmError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Traffic, speed and road type.
    M1,
    /// Model 1 plus visible percentage.
    M2,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::M1 => "model_1",
            ModelKind::M2 => "model_2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    x: DMatrix<f64>,
    y: Vec<f64>,
}

impl DesignMatrix {
    /// Builds a design from named columns and a count response.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(GlmError::Shape {
                columns: columns.len(),
                names: names.len(),
            });
        }
        let n = response.len();
        if n == 0 {
            return Err(GlmError::Empty);
        }
        for (row, &value) in response.iter().enumerate() {
            if !value.is_finite() || value < 0.0 || value.fract() != 0.0 {
                return Err(GlmError::InvalidResponse { row, value });
            }
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(GlmError::Shape {
                    columns: col.len(),
                    names: n,
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(GlmError::NonFinite {
                    column: name.clone(),
                    row,
                });
            }
        }
        let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Ok(Self { names, x, y: response })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j).iter().copied().collect()
    }

    pub(crate) fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }
}

/// Assembles the model matrix for one model from the modeling table.
pub fn build_design(table: &ModelingTable, model: ModelKind) -> Result<DesignMatrix> {
    if table.rows.is_empty() {
        return Err(GlmError::Empty);
    }
    let n = table.rows.len();
    let mut names = vec!["const".to_string()];
    let mut columns = vec![vec![1.0; n]];
    if model == ModelKind::M2 {
        let vis = table
            .rows
            .iter()
            .map(|r| r.visible_percentage)
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| GlmError::MissingColumn("visible_percentage".into()))?;
        names.push("visible_percentage".into());
        columns.push(vis);
    }
    names.extend(["traffic", "max_speed", "road_type_primary", "road_type_secondary"].map(String::from));
    columns.push(table.rows.iter().map(|r| r.traffic).collect());
    columns.push(table.rows.iter().map(|r| r.max_speed).collect());
    columns.push(table.rows.iter().map(|r| f64::from(r.road_type_primary)).collect());
    columns.push(table.rows.iter().map(|r| f64::from(r.road_type_secondary)).collect());
    let y = table.rows.iter().map(|r| f64::from(r.accident_count)).collect();
    DesignMatrix::new(names, columns, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub coefficients: Vec<Coefficient>,
    pub dropped_columns: Vec<String>,
    pub log_likelihood: f64,
    pub log_likelihood_null: f64,
    pub deviance: f64,
    pub pearson_chi2: f64,
    pub pseudo_r2_cs: f64,
    pub aic: f64,
    /// Deviance − df_residual·ln n.
    pub bic_deviance: f64,
    /// −2LL + k·ln n.
    pub bic_standard: f64,
    pub df_residual: usize,
    pub df_model: usize,
    pub n_obs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub max_abs_score: f64,
}

impl GlmFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub fits: (GlmFit, GlmFit),
    /// AIC of the first fit minus AIC of the second.
    pub delta_aic: f64,
    pub delta_bic_deviance: f64,
    pub delta_bic_standard: f64,
    pub preferred: ModelKind,
}

/// Compares Model 1 (`fit1`) against Model 2 (`fit2`); ties prefer Model 1.
pub fn compare_models(fit1: &GlmFit, fit2: &GlmFit) -> Result<ModelComparison> {
    if fit1.n_obs != fit2.n_obs {
        return Err(GlmError::MismatchedObservations(fit1.n_obs, fit2.n_obs));
    }
    let d = criteria_deltas(fit1.aic, fit2.aic, fit1.bic_deviance, fit2.bic_deviance);
    Ok(ModelComparison {
        fits: (fit1.clone(), fit2.clone()),
        delta_aic: d.0,
        delta_bic_deviance: d.1,
        delta_bic_standard: fit1.bic_standard - fit2.bic_standard,
        preferred: if fit2.aic < fit1.aic {
            ModelKind::M2
        } else {
            ModelKind::M1
        },
    })
}

/// (ΔAIC, ΔBIC) as first minus second.
pub fn criteria_deltas(aic1: f64, aic2: f64, bic1: f64, bic2: f64) -> (f64, f64) {
    (aic1 - aic2, bic1 - bic2)
}
