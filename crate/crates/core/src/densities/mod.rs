//! Target densities: the evaluable objects `f` that the constructions
//! approximate, with support descriptors and certified tail envelopes.

mod catalog;
mod fat_cantor;
mod fnatural;
mod mixture;
mod ramp;
mod standard;
pub(crate) mod tails;
mod union;

pub use catalog::{by_name, catalog, CatalogEntry, CATALOG_NAMES, FAT_CANTOR_DEPTH, FSTAR_N_MAX};
pub use fat_cantor::{make_fat_cantor, FatCantor, MAX_CANTOR_DEPTH, MAX_MATERIALIZED_DEPTH};
pub use fnatural::{fnatural_params, FNaturalParams};
pub use mixture::DensityMixture;
pub use ramp::UrysohnRamp;
pub use standard::{Cauchy, Laplace, Normal, StudentT3};
pub use tails::{
    integration_segments, tail_quantities, tail_quantities_quadrature, total_mass, truncated_second_moment,
};
pub use union::{make_fstar, UniformOnUnion};

use std::fmt;

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmm::FiniteGMM;
use crate::numeric::normal_sf;

/// Where a density may be nonzero.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportDescriptor {
    FullSpace,
    /// Sorted, pairwise disjoint, nondegenerate closed intervals (1-D only).
    IntervalUnion(Vec<(f64, f64)>),
    Ball(f64),
}

impl SupportDescriptor {
    /// Validated interval union.
    pub fn interval_union(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Validation("interval union must be nonempty".into()));
        }
        for (i, &(a, b)) in intervals.iter().enumerate() {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Validation(format!("interval {i} = [{a}, {b}] is degenerate")));
            }
            if i > 0 && intervals[i - 1].1 >= a {
                return Err(Error::Validation(format!("intervals {} and {i} overlap or are unsorted", i - 1)));
            }
        }
        Ok(Self::IntervalUnion(intervals))
    }

    pub fn intervals(&self) -> Option<&[(f64, f64)]> {
        match self {
            Self::IntervalUnion(v) => Some(v),
            _ => None,
        }
    }

    /// Lebesgue measure in 1-D (`∞` for the full line).
    pub fn measure_1d(&self) -> f64 {
        match self {
            Self::FullSpace => f64::INFINITY,
            Self::IntervalUnion(v) => v.iter().map(|(a, b)| b - a).sum(),
            Self::Ball(r) => 2.0 * r,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::FullSpace => true,
            Self::Ball(r) => x.iter().map(|v| v * v).sum::<f64>() <= r * r,
            Self::IntervalUnion(v) => {
                let t = x[0];
                let i = v.partition_point(|iv| iv.1 < t);
                i < v.len() && v[i].0 <= t
            }
        }
    }
}

/// What is known about `∫‖x‖² dF`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SecondMoment {
    Finite(f64),
    Infinite,
    Unknown,
}

impl SecondMoment {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

/// Definitional regularity metadata (not inferred numerically).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Regularity {
    pub continuous: bool,
    pub strictly_positive: bool,
    pub bounded: bool,
}

impl Regularity {
    pub const SMOOTH_POSITIVE: Self = Self {
        continuous: true,
        strictly_positive: true,
        bounded: true,
    };
    pub const INDICATOR: Self = Self {
        continuous: false,
        strictly_positive: false,
        bounded: true,
    };
}

/// Tail mass `α_R`, tail positive entropy `β_R = ∫_{‖x‖>R} f log₊f` and
/// tail second moment `μ_{2,R} = ∫_{‖x‖>R} ‖x‖² f` at radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailQuantities {
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(with = "crate::json::extended")]
    pub mu2: f64,
    /// Combined absolute error estimate (0 for closed forms).
    pub error: f64,
    /// Set when the second-moment tail failed to converge; `mu2` is then `+∞`.
    pub mu2_diverging: bool,
}

impl TailQuantities {
    pub fn exact(r: f64, alpha: f64, beta: f64, mu2: f64) -> Self {
        Self {
            r,
            alpha,
            beta,
            mu2,
            error: 0.0,
            mu2_diverging: false,
        }
    }
}

/// An evaluable probability density on `R^d`.
pub trait Density: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    /// `log f(x)`, `-∞` where `f(x) = 0`.
    fn ln_pdf(&self, x: &[f64]) -> f64;

    fn pdf(&self, x: &[f64]) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Draws one point into `out` (length `dim`).
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    fn support(&self) -> SupportDescriptor;

    /// `T(R) ≥ ∫_{‖x‖>R} f`, nonincreasing with `T(R) → 0`.
    fn tail_envelope(&self, r: f64) -> Option<f64>;

    fn second_moment(&self) -> SecondMoment;

    fn regularity(&self) -> Regularity;

    /// Interior points where `f` is not smooth (kinks, jumps).
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Closed-form tail quantities, when available.
    fn analytic_tails(&self, _r: f64) -> Option<TailQuantities> {
        None
    }

    /// Upper bound on `sup f`, when known.
    fn sup_bound(&self) -> Option<f64> {
        None
    }
}

/// `f(x)` for a 1-D density.
pub fn pdf1(f: &dyn Density, x: f64) -> f64 {
    f.pdf(&[x])
}

/// `log f(x)` for a 1-D density.
pub fn ln_pdf1(f: &dyn Density, x: f64) -> f64 {
    f.ln_pdf(&[x])
}

impl Density for FiniteGMM {
    fn name(&self) -> String {
        format!("gmm[{} components]", self.len())
    }

    fn dim(&self) -> usize {
        FiniteGMM::dim(self)
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        self.logpdf(x)
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        self.sample_into(rng, out)
    }

    fn support(&self) -> SupportDescriptor {
        SupportDescriptor::FullSpace
    }

    fn tail_envelope(&self, r: f64) -> Option<f64> {
        let d = FiniteGMM::dim(self);
        let s = r / (d as f64).sqrt();
        let mut acc = 0.0;
        for c in self.components() {
            for i in 0..d {
                let sd = c.cov[i * d + i].sqrt();
                acc += c.weight * (normal_sf((s - c.mean[i]) / sd) + normal_sf((s + c.mean[i]) / sd));
            }
        }
        Some(acc.min(1.0))
    }

    fn second_moment(&self) -> SecondMoment {
        SecondMoment::Finite(crate::gmm::gmm_second_moment(self))
    }

    fn regularity(&self) -> Regularity {
        Regularity::SMOOTH_POSITIVE
    }

    fn analytic_tails(&self, r: f64) -> Option<TailQuantities> {
        if FiniteGMM::dim(self) != 1 || self.sup_bound()? > 1.0 {
            return None;
        }
        let (mut alpha, mut mu2) = (0.0, 0.0);
        for c in self.components() {
            let sd = c.cov[0].sqrt();
            for mu in [c.mean[0], -c.mean[0]] {
                // E[X²; X > R] for X ~ N(mu, sd²).
                let z = (r - mu) / sd;
                let (sf, pdf) = (normal_sf(z), crate::numeric::normal_pdf(z));
                alpha += c.weight * sf;
                mu2 += c.weight * (mu * mu * sf + 2.0 * mu * sd * pdf + sd * sd * (z * pdf + sf));
            }
        }
        Some(TailQuantities::exact(r, alpha, 0.0, mu2))
    }

    fn sup_bound(&self) -> Option<f64> {
        let d = FiniteGMM::dim(self);
        let mut acc = 0.0;
        for c in self.components() {
            let det = if d == 1 {
                c.cov[0]
            } else {
                c.cov_matrix().determinant()
            };
            acc += c.weight / ((2.0 * std::f64::consts::PI).powi(d as i32) * det).sqrt();
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_validation() {
        assert!(SupportDescriptor::interval_union(vec![(0.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(SupportDescriptor::interval_union(vec![(1.0, 1.0)]).is_err());
        let s = SupportDescriptor::interval_union(vec![(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert!(s.contains(&[1.0]) && s.contains(&[2.5]) && !s.contains(&[1.5]));
        assert_eq!(s.measure_1d(), 2.0);
    }

    #[test]
    fn gmm_tails_match_normal() {
        let g = FiniteGMM::standard_normal(1);
        let n = Normal::standard(1);
        for r in [0.5, 1.0, 3.0] {
            let a = g.analytic_tails(r).unwrap();
            let b = n.analytic_tails(r).unwrap();
            assert!((a.alpha - b.alpha).abs() < 1e-15);
            assert!((a.mu2 - b.mu2).abs() < 1e-14);
        }
    }
}
