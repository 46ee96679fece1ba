//! KL divergence estimators, the log-ratio uniform-integrability diagnostic,
//! and numerical checks of the supporting inequalities.

mod inequalities;
mod monte_carlo;

pub use inequalities::{
    check_log_sum, check_mixture_convexity, check_plogp, check_variational, ConvexityRecord, LogSumRecord,
    VariationalRecord,
};
pub use monte_carlo::{kl_monte_carlo, log_ratio_profile, sample_points, LogRatioProfile, McConfig, ProfileRow};

use serde::Serialize;

use crate::densities::{tails::integrate_over_support, Density};
use crate::error::{invalid, Result};
use crate::gmm::FiniteGMM;
use crate::quadrature::{QuadratureBudget, TailIntegral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlMethod {
    Quadrature1d,
    MonteCarlo,
}

/// A KL value with its error bar: a certified-style quadrature bound or a
/// Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KLEstimate {
    #[serde(with = "crate::json::extended")]
    pub value: f64,
    pub method: KlMethod,
    pub error: f64,
    pub n_evals: usize,
    /// Present when the value is a numerical judgment rather than a sum,
    /// e.g. `+∞` from a non-converging tail.
    pub diagnostic: Option<String>,
}

impl KLEstimate {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `KL(f‖g)` integrand with `0·log 0 = 0`.
#[inline]
pub(crate) fn kl_integrand(f: &dyn Density, g: &FiniteGMM, x: f64) -> f64 {
    let lf = f.ln_pdf(&[x]);
    if lf == f64::NEG_INFINITY {
        return 0.0;
    }
    lf.exp() * (lf - g.logpdf1(x))
}

/// Adaptive quadrature of `∫ f·(log f − log g)` over the support of `f`.
///
/// A tail whose shell contributions stop shrinking yields `+∞` with a diagnostic.
pub fn kl_quadrature_1d(f: &dyn Density, g: &FiniteGMM, budget: QuadratureBudget) -> Result<KLEstimate> {
    if f.dim() != 1 || g.dim() != 1 {
        return Err(invalid("f", "quadrature KL is 1-D only"));
    }
    let h = |x: f64| kl_integrand(f, g, x);
    Ok(match integrate_over_support(f, &h, &[], budget)? {
        TailIntegral::Converged(q) => KLEstimate {
            value: q.value,
            method: KlMethod::Quadrature1d,
            error: q.error,
            n_evals: q.n_evals,
            diagnostic: None,
        },
        TailIntegral::Diverging { partial, shells } => KLEstimate {
            value: f64::INFINITY,
            method: KlMethod::Quadrature1d,
            error: 0.0,
            n_evals: 0,
            diagnostic: Some(format!(
                "tail integrand does not decay: {shells} doubling shells without shrinkage (partial sum {partial:.6e})"
            )),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{Cauchy, Normal, UniformOnUnion};

    #[test]
    fn self_divergence_vanishes() {
        let g = FiniteGMM::standard_normal(1);
        let k = kl_quadrature_1d(&Normal::standard(1), &g, QuadratureBudget::default()).unwrap();
        assert!(k.value.abs() < 1e-9);
    }

    #[test]
    fn shifted_normal_closed_form() {
        let g = FiniteGMM::isotropic_gaussian(vec![1.0], 1.0).unwrap();
        let k = kl_quadrature_1d(&Normal::standard(1), &g, QuadratureBudget::default()).unwrap();
        assert!((k.value - 0.5).abs() < 1e-6);
        assert!(k.error < 1e-8);
    }

    #[test]
    fn uniform_against_normal() {
        // ½log(2π) + 1/6 − 0 for U(0,1) vs N(0,1).
        let u = UniformOnUnion::interval(0.0, 1.0).unwrap();
        let k = kl_quadrature_1d(&u, &FiniteGMM::standard_normal(1), QuadratureBudget::default()).unwrap();
        let exact = 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / 6.0;
        assert!((k.value - exact).abs() < 1e-10);
    }

    #[test]
    fn cauchy_is_reported_infinite() {
        let k = kl_quadrature_1d(&Cauchy, &FiniteGMM::standard_normal(1), QuadratureBudget::default()).unwrap();
        assert!(k.value.is_infinite());
        assert!(k.diagnostic.is_some());
    }
}
