//! Likelihood-based fit statistics for Poisson models.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// Poisson log-likelihood Σ(y·ln μ − μ − ln y!).
pub fn log_likelihood(y: &[f64], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&y, &m)| {
            let term = if y == 0.0 { 0.0 } else { y * m.ln() };
            term - m - ln_gamma(y + 1.0)
        })
        .sum()
}

/// Poisson deviance 2Σ(y·ln(y/μ) − (y − μ)), with the log term 0 when y = 0.
pub fn deviance(y: &[f64], mu: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(mu)
        .map(|(&y, &m)| {
            let term = if y == 0.0 { 0.0 } else { y * (y / m).ln() };
            term - (y - m)
        })
        .sum::<f64>()
}

pub fn pearson_chi2(y: &[f64], mu: &[f64]) -> f64 {
    y.iter().zip(mu).map(|(&y, &m)| (y - m).powi(2) / m).sum()
}

/// Cox-Snell pseudo-R²: 1 − exp(−(2/n)(LL − LL₀)).
pub fn pseudo_r2_cs(ll: f64, ll_null: f64, n: usize) -> f64 {
    1.0 - (-(2.0 / n as f64) * (ll - ll_null)).exp()
}

/// Null log-likelihood implied by a Cox-Snell value.
pub fn null_ll_from_pseudo_r2(r2: f64, ll: f64, n: usize) -> f64 {
    ll + (n as f64 / 2.0) * (1.0 - r2).ln()
}

pub fn aic(ll: f64, k: usize) -> f64 {
    -2.0 * ll + 2.0 * k as f64
}

/// BIC as −2LL + k·ln n.
pub fn bic_standard(ll: f64, k: usize, n: usize) -> f64 {
    -2.0 * ll + k as f64 * (n as f64).ln()
}

/// Deviance-based BIC, deviance − df_residual·ln n.
pub fn bic_deviance(deviance: f64, df_residual: usize, n: usize) -> f64 {
    deviance - df_residual as f64 * (n as f64).ln()
}

/// Two-sided normal p-value for a Wald statistic.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}
