use std::sync::Arc;

use serde::Serialize;

use super::{kl_quadrature_1d, KLEstimate};
use crate::densities::{truncated_second_moment, Density, DensityMixture};
use crate::error::{invalid, Error, Result};
use crate::gmm::{log_exp_quadratic_moment, FiniteGMM};
use crate::numeric::{log_plus, xlogy_ratio, NeumaierSum};
use crate::quadrature::QuadratureBudget;

/// Both sides of `(Σa)·log(Σa/Σb) ≤ Σ aᵢ·log(aᵢ/bᵢ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogSumRecord {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`, nonnegative up to rounding.
    pub gap: f64,
}

pub fn check_log_sum(a: &[f64], b: &[f64]) -> Result<LogSumRecord> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.iter().any(|&x| !(x >= 0.0)) || b.iter().any(|&x| !(x > 0.0)) {
        return Err(invalid("a, b", "need a ≥ 0 and b > 0"));
    }
    let sa = a.iter().copied().collect::<NeumaierSum>().value();
    let sb = b.iter().copied().collect::<NeumaierSum>().value();
    let lhs = xlogy_ratio(sa, sb);
    let rhs = a.iter().zip(b).map(|(&x, &y)| xlogy_ratio(x, y)).collect::<NeumaierSum>().value();
    Ok(LogSumRecord { lhs, rhs, gap: rhs - lhs })
}

/// `KL(Σaᵢqᵢ ‖ Σaᵢrᵢ)` against `Σ aᵢ·KL(qᵢ‖rᵢ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// Combined quadrature error of both sides.
    pub error: f64,
    pub per_index: Vec<KLEstimate>,
}

impl ConvexityRecord {
    pub fn holds(&self) -> bool {
        self.gap >= -self.error
    }
}

pub fn check_mixture_convexity(
    a: &[f64],
    qs: &[Arc<dyn Density>],
    rs: &[FiniteGMM],
    budget: QuadratureBudget,
) -> Result<ConvexityRecord> {
    if a.len() != qs.len() || a.len() != rs.len() || a.is_empty() {
        return Err(invalid("a", "weights, targets and approximants must have equal nonzero length"));
    }
    let per_index: Vec<KLEstimate> = qs
        .iter()
        .zip(rs)
        .map(|(q, r)| kl_quadrature_1d(q.as_ref(), r, budget))
        .collect::<Result<_>>()?;
    let rhs = a.iter().zip(&per_index).map(|(w, k)| w * k.value).collect::<NeumaierSum>().value();
    let rhs_err: f64 = a.iter().zip(&per_index).map(|(w, k)| w * k.error).sum();
    let (lhs, lhs_err) = if a.len() == 1 {
        (per_index[0].value, per_index[0].error)
    } else {
        let q = DensityMixture::new(a.to_vec(), qs.to_vec())?;
        let parts: Vec<(f64, &FiniteGMM)> = a.iter().copied().zip(rs).collect();
        let r = FiniteGMM::convex_combination(&parts)?;
        let k = kl_quadrature_1d(&q, &r, budget)?;
        (k.value, k.error)
    };
    let gap = if a.len() == 1 { 0.0 } else { rhs - lhs };
    Ok(ConvexityRecord {
        lhs,
        rhs,
        gap,
        error: lhs_err + rhs_err,
        per_index,
    })
}

/// One radius of the variational inequality
/// `t0·∫_{B_R}‖x‖² dF ≤ KL(f‖g) + log ∫exp(t0‖x‖²) g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationalRecord {
    pub r: f64,
    pub lhs_truncated: f64,
    #[serde(with = "crate::json::extended")]
    pub rhs: f64,
    pub error: f64,
    pub holds: bool,
}

/// Evaluates the variational inequality on `r_grid`.
///
/// `kl` overrides the measured divergence, which lets a caller test an
/// assumed finite value against a heavy-tailed target.
pub fn check_variational(
    f: &dyn Density,
    g: &FiniteGMM,
    t0: f64,
    r_grid: &[f64],
    kl: Option<f64>,
    budget: QuadratureBudget,
) -> Result<Vec<VariationalRecord>> {
    let log_z = log_exp_quadratic_moment(g, t0)?;
    let (kl_value, kl_err) = match kl {
        Some(v) => (v, 0.0),
        None => {
            let k = kl_quadrature_1d(f, g, budget)?;
            (k.value, k.error)
        }
    };
    let rhs = kl_value + log_z;
    r_grid
        .iter()
        .map(|&r| {
            let m = truncated_second_moment(f, r, budget)?;
            let lhs = t0 * m.value;
            let error = t0 * m.error + kl_err;
            Ok(VariationalRecord {
                r,
                lhs_truncated: lhs,
                rhs,
                error,
                holds: lhs <= rhs + error,
            })
        })
        .collect()
}

/// `max_t (t·log₊t − t^p/(p−1))` over the grid; nonpositive when the
/// inequality holds.
pub fn check_plogp(p: f64, t_grid: &[f64]) -> Result<f64> {
    if !(p > 1.0) {
        return Err(invalid("p", "must exceed 1"));
    }
    Ok(t_grid
        .iter()
        .map(|&t| t * log_plus(t) - t.powf(p) / (p - 1.0))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{Cauchy, Normal};

    #[test]
    fn log_sum_examples() {
        let r = check_log_sum(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((r.lhs - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(r.rhs, 0.0);
        assert!((r.gap - 2f64.ln()).abs() < 1e-15);
        let p = check_log_sum(&[0.6, 1.5, 0.9], &[0.2, 0.5, 0.3]).unwrap();
        assert!(p.gap.abs() < 1e-12);
        assert!(check_log_sum(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn convexity_single_index_is_exact() {
        let q: Arc<dyn Density> = Arc::new(Normal::standard(1));
        let r = FiniteGMM::isotropic_gaussian(vec![0.5], 2.0).unwrap();
        let rec = check_mixture_convexity(&[1.0], &[q], &[r], QuadratureBudget::default()).unwrap();
        assert_eq!(rec.lhs, rec.rhs);
    }

    #[test]
    fn variational_normal_case() {
        let f = Normal::standard(1);
        let g = FiniteGMM::standard_normal(1);
        let recs = check_variational(&f, &g, 0.25, &[1.0, 5.0, 50.0], None, QuadratureBudget::default()).unwrap();
        for r in &recs {
            assert!(r.holds);
            assert!(r.lhs_truncated <= 0.25 + 1e-12);
            assert!((r.rhs - 2f64.sqrt().ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn variational_detects_cauchy_contradiction() {
        let g = FiniteGMM::standard_normal(1);
        let recs = check_variational(&Cauchy, &g, 0.25, &[10.0, 1e3, 1e5], Some(5.0), QuadratureBudget::default()).unwrap();
        assert!(recs[0].holds);
        assert!(!recs[2].holds);
    }

    #[test]
    fn plogp_examples() {
        assert!(check_plogp(2.0, &[0.0, 0.5, 1.0]).unwrap() <= 0.0);
        let e = std::f64::consts::E;
        assert!((check_plogp(2.0, &[e]).unwrap() - (e - e * e)).abs() < 1e-14);
        assert!(check_plogp(1.0, &[1.0]).is_err());
    }
}
