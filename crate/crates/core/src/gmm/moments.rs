use nalgebra::{DMatrix, DVector};

use super::FiniteGMM;
use crate::error::{invalid, Error, Result};
use crate::numeric::log_sum_exp;

/// Largest covariance eigenvalue over all components.
pub fn max_covariance_eigenvalue(g: &FiniteGMM) -> f64 {
    g.components()
        .iter()
        .map(|c| {
            if c.dim() == 1 {
                c.cov[0]
            } else {
                c.cov_matrix().symmetric_eigenvalues().max()
            }
        })
        .fold(0.0, f64::max)
}

/// `1/(8·λ_max)`: a quarter of the closed-form convergence radius.
pub fn default_t0(g: &FiniteGMM) -> f64 {
    1.0 / (8.0 * max_covariance_eigenvalue(g))
}

/// `Σ πⱼ(‖μⱼ‖² + tr Σⱼ)`.
pub fn gmm_second_moment(g: &FiniteGMM) -> f64 {
    let d = g.dim();
    crate::numeric::stable_sum(g.components().iter().map(|c| {
        let mu2: f64 = c.mean.iter().map(|m| m * m).sum();
        let tr: f64 = (0..d).map(|i| c.cov[i * d + i]).sum();
        c.weight * (mu2 + tr)
    }))
}

/// `log ∫ exp(t0‖x‖²) g(x) dx`.
///
/// Per component the integral is `det(I − 2t0Σ)^{-1/2}·exp(t0·μᵀ(I − 2t0Σ)⁻¹μ)`,
/// finite only when `2·t0·λ_max(Σ) < 1`.
pub fn log_exp_quadratic_moment(g: &FiniteGMM, t0: f64) -> Result<f64> {
    if !(t0 >= 0.0 && t0.is_finite()) {
        return Err(invalid("t0", format!("must be a finite nonnegative number, got {t0}")));
    }
    let d = g.dim();
    let mut terms = Vec::with_capacity(g.len());
    for (j, c) in g.components().iter().enumerate() {
        let lam = if d == 1 {
            c.cov[0]
        } else {
            c.cov_matrix().symmetric_eigenvalues().max()
        };
        let ratio = 2.0 * t0 * lam;
        if ratio >= 1.0 {
            return Err(Error::MomentDiverges { t0, ratio, component: j });
        }
        if c.weight == 0.0 {
            continue;
        }
        let m = DMatrix::<f64>::identity(d, d) - c.cov_matrix() * (2.0 * t0);
        let chol = nalgebra::Cholesky::new(m).ok_or(Error::MomentDiverges { t0, ratio, component: j })?;
        let log_det: f64 = 2.0 * (0..d).map(|i| chol.l()[(i, i)].ln()).sum::<f64>();
        let mu = DVector::from_column_slice(&c.mean);
        let quad = mu.dot(&chol.solve(&mu));
        terms.push(c.weight.ln() - 0.5 * log_det + t0 * quad);
    }
    Ok(log_sum_exp(&terms))
}

/// `∫ exp(t0‖x‖²) g(x) dx` in closed form.
pub fn exp_quadratic_moment(g: &FiniteGMM, t0: f64) -> Result<f64> {
    log_exp_quadratic_moment(g, t0).map(f64::exp)
}
