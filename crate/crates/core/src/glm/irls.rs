use nalgebra::{DMatrix, DVector};

use super::stats;
use super::{Coefficient, DesignMatrix, GlmError, GlmFit, Result};

const RANK_TOL: f64 = 1e-9;
const MAX_ETA: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 25,
        }
    }
}

/// Indices of columns kept by left-to-right Gram-Schmidt; a column lying in
/// the span of those before it is dropped.
fn independent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = col / norm;
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v -= q * proj;
            }
        }
        let r = v.norm();
        if r > RANK_TOL {
            basis.push(v / r);
            kept.push(j);
        }
    }
    kept
}

/// Weighted least squares via thin QR of √W·X.
fn weighted_solve(x: &DMatrix<f64>, w: &[f64], z: &[f64]) -> Result<DVector<f64>> {
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let a = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * sw[i]);
    let b = DVector::from_fn(x.nrows(), |i, _| z[i] * sw[i]);
    let qr = a.qr();
    let r = qr.r();
    if r.diagonal().iter().any(|d| !d.is_finite() || *d == 0.0) {
        return Err(GlmError::SingularInformation);
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb).ok_or(GlmError::SingularInformation)
}

fn means(x: &DMatrix<f64>, beta: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let eta: Vec<f64> = (x * beta).iter().map(|e| e.min(MAX_ETA)).collect();
    let mu = eta.iter().map(|e| e.exp()).collect();
    (eta, mu)
}

struct Core {
    beta: DVector<f64>,
    mu: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn irls_core(x: &DMatrix<f64>, y: &[f64], opts: IrlsOptions) -> Result<Core> {
    let mut eta: Vec<f64> = y.iter().map(|v| (v + 0.5).ln()).collect();
    let mut mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
    let mut prev: Option<DVector<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut beta = DVector::zeros(x.ncols());
    while iterations < opts.max_iter {
        iterations += 1;
        let z: Vec<f64> = (0..y.len()).map(|i| eta[i] + (y[i] - mu[i]) / mu[i]).collect();
        beta = weighted_solve(x, &mu, &z)?;
        (eta, mu) = means(x, &beta);
        if let Some(p) = &prev {
            if (&beta - p).amax() < opts.tol {
                converged = true;
                break;
            }
        }
        prev = Some(beta.clone());
    }
    Ok(Core {
        beta,
        mu,
        iterations,
        converged,
    })
}

/// Standard errors, z and two-sided p-values at the given estimates.
pub fn wald_stats(design: &DesignMatrix, fit: &GlmFit) -> Result<Vec<Coefficient>> {
    let idx: Vec<usize> = fit
        .coefficients
        .iter()
        .map(|c| {
            design
                .names()
                .iter()
                .position(|n| *n == c.name)
                .ok_or_else(|| GlmError::MissingColumn(c.name.clone()))
        })
        .collect::<Result<_>>()?;
    let x = design.matrix().select_columns(&idx);
    let beta = DVector::from_vec(fit.estimates());
    let (_, mu) = means(&x, &beta);
    wald_table(&x, &mu, &beta, fit.coefficients.iter().map(|c| c.name.clone()))
}

fn wald_table(
    x: &DMatrix<f64>,
    mu: &[f64],
    beta: &DVector<f64>,
    names: impl Iterator<Item = String>,
) -> Result<Vec<Coefficient>> {
    let a = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * mu[i].sqrt());
    let r = a.qr().r();
    if r.diagonal().iter().any(|d| !d.is_finite() || *d == 0.0) {
        return Err(GlmError::SingularInformation);
    }
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(x.ncols(), x.ncols()))
        .ok_or(GlmError::SingularInformation)?;
    Ok(names
        .enumerate()
        .map(|(j, name)| {
            let se = r_inv.row(j).norm();
            let estimate = beta[j];
            let z = estimate / se;
            Coefficient {
                name,
                estimate,
                std_error: se,
                z,
                p_value: stats::two_sided_p(z),
            }
        })
        .collect())
}

/// Fits a Poisson log-link model, dropping collinear columns from the right.
pub fn fit_poisson_irls(design: &DesignMatrix, opts: IrlsOptions) -> Result<GlmFit> {
    let y = design.response();
    if y.iter().all(|&v| v == 0.0) {
        return Err(GlmError::AllZeroResponse);
    }
    let n = y.len();
    let kept = independent_columns(design.matrix());
    let k = kept.len();
    if n <= k || k == 0 {
        return Err(GlmError::TooFewObservations { n, k });
    }
    let dropped_columns = (0..design.n_cols())
        .filter(|j| !kept.contains(j))
        .map(|j| design.names()[j].clone())
        .collect();
    let x = design.matrix().select_columns(&kept);
    let core = irls_core(&x, y, opts)?;

    let resid = DVector::from_fn(n, |i, _| y[i] - core.mu[i]);
    let max_abs_score = (x.transpose() * resid).amax();
    let coefficients = wald_table(
        &x,
        &core.mu,
        &core.beta,
        kept.iter().map(|&j| design.names()[j].clone()),
    )?;

    let ones = DMatrix::from_element(n, 1, 1.0);
    let null = irls_core(&ones, y, opts)?;
    let log_likelihood_null = stats::log_likelihood(y, &null.mu);

    let log_likelihood = stats::log_likelihood(y, &core.mu);
    let deviance = stats::deviance(y, &core.mu);
    let df_residual = n - k;
    Ok(GlmFit {
        coefficients,
        dropped_columns,
        log_likelihood,
        log_likelihood_null,
        deviance,
        pearson_chi2: stats::pearson_chi2(y, &core.mu),
        pseudo_r2_cs: stats::pseudo_r2_cs(log_likelihood, log_likelihood_null, n),
        aic: stats::aic(log_likelihood, k),
        bic_deviance: stats::bic_deviance(deviance, df_residual, n),
        bic_standard: stats::bic_standard(log_likelihood, k, n),
        df_residual,
        df_model: k - 1,
        n_obs: n,
        iterations: core.iterations,
        converged: core.converged,
        max_abs_score,
    })
}
