use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::{Density, Regularity, SecondMoment, SupportDescriptor, TailQuantities};
use crate::numeric::{normal_pdf, normal_sf};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Centered isotropic Gaussian `N(0, σ²I_d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    dim: usize,
    sigma: f64,
}

impl Normal {
    pub fn new(dim: usize, sigma: f64) -> Self {
        assert!(dim >= 1 && sigma > 0.0);
        Self { dim, sigma }
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(dim, 1.0)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Density for Normal {
    fn name(&self) -> String {
        match (self.dim, self.sigma) {
            (1, s) if s == 1.0 => "normal".into(),
            (2, s) if s == 1.0 => "normal-2d".into(),
            (d, s) => format!("normal[d={d},sigma={s}]"),
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        let s2 = self.sigma * self.sigma;
        let q: f64 = x.iter().map(|v| v * v).sum();
        -0.5 * self.dim as f64 * (LN_2PI + s2.ln()) - 0.5 * q / s2
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = self.sigma * z;
        }
    }

    fn support(&self) -> SupportDescriptor {
        SupportDescriptor::FullSpace
    }

    fn tail_envelope(&self, r: f64) -> Option<f64> {
        match self.dim {
            1 => Some(2.0 * normal_sf(r / self.sigma)),
            2 => Some((-0.5 * (r / self.sigma).powi(2)).exp()),
            d => {
                // Coordinatewise union bound.
                let s = r / (self.sigma * (d as f64).sqrt());
                Some((2.0 * d as f64 * normal_sf(s)).min(1.0))
            }
        }
    }

    fn second_moment(&self) -> SecondMoment {
        SecondMoment::Finite(self.dim as f64 * self.sigma * self.sigma)
    }

    fn regularity(&self) -> Regularity {
        Regularity::SMOOTH_POSITIVE
    }

    fn analytic_tails(&self, r: f64) -> Option<TailQuantities> {
        if self.sup_bound()? > 1.0 {
            return None;
        }
        let s = self.sigma;
        let z = r / s;
        match self.dim {
            1 => {
                let alpha = 2.0 * normal_sf(z);
                let mu2 = 2.0 * s * s * (z * normal_pdf(z) + normal_sf(z));
                Some(TailQuantities::exact(r, alpha, 0.0, mu2))
            }
            2 => {
                // ‖X‖²/σ² is chi-square with two degrees of freedom.
                let e = (-0.5 * z * z).exp();
                Some(TailQuantities::exact(r, e, 0.0, s * s * (z * z + 2.0) * e))
            }
            _ => None,
        }
    }

    fn sup_bound(&self) -> Option<f64> {
        Some((2.0 * PI * self.sigma * self.sigma).powf(-0.5 * self.dim as f64))
    }
}

/// Standard Laplace density `½·exp(−|x|)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Laplace;

impl Density for Laplace {
    fn name(&self) -> String {
        "laplace".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        -std::f64::consts::LN_2 - x[0].abs()
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let e: f64 = Exp1.sample(rng);
        out[0] = if rng.random::<bool>() { e } else { -e };
    }

    fn support(&self) -> SupportDescriptor {
        SupportDescriptor::FullSpace
    }

    fn tail_envelope(&self, r: f64) -> Option<f64> {
        Some((-r.max(0.0)).exp())
    }

    fn second_moment(&self) -> SecondMoment {
        SecondMoment::Finite(2.0)
    }

    fn regularity(&self) -> Regularity {
        Regularity::SMOOTH_POSITIVE
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn analytic_tails(&self, r: f64) -> Option<TailQuantities> {
        let e = (-r).exp();
        Some(TailQuantities::exact(r, e, 0.0, e * (r * r + 2.0 * r + 2.0)))
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(0.5)
    }
}

/// Student-t with three degrees of freedom: finite variance 3, polynomial tails.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StudentT3;

impl StudentT3 {
    const NORM: f64 = 2.0 / (PI * SQRT_3);

    /// `θ_R = atan(R/√3)`; both tail integrals are elementary in `θ`.
    fn theta(r: f64) -> f64 {
        (r / SQRT_3).atan()
    }
}

impl Density for StudentT3 {
    fn name(&self) -> String {
        "student-t3".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        Self::NORM.ln() - 2.0 * (x[0] * x[0] / 3.0).ln_1p()
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: f64 = StandardNormal.sample(rng);
        let chi2: f64 = (0..3)
            .map(|_| {
                let u: f64 = StandardNormal.sample(rng);
                u * u
            })
            .sum();
        out[0] = z / (chi2 / 3.0).sqrt();
    }

    fn support(&self) -> SupportDescriptor {
        SupportDescriptor::FullSpace
    }

    fn tail_envelope(&self, r: f64) -> Option<f64> {
        Some(self.analytic_tails(r.max(0.0))?.alpha)
    }

    fn second_moment(&self) -> SecondMoment {
        SecondMoment::Finite(3.0)
    }

    fn regularity(&self) -> Regularity {
        Regularity::SMOOTH_POSITIVE
    }

    fn analytic_tails(&self, r: f64) -> Option<TailQuantities> {
        // With x = √3·tan θ: f dx = (2/π)cos²θ dθ and x² f dx = (6/π)sin²θ dθ.
        let t = Self::theta(r);
        let rest = 0.5 * PI - t;
        let s2 = (2.0 * t).sin();
        let alpha = (4.0 / PI) * (0.5 * rest - 0.25 * s2);
        let mu2 = (12.0 / PI) * (0.5 * rest + 0.25 * s2);
        Some(TailQuantities::exact(r, alpha.max(0.0), 0.0, mu2.max(0.0)))
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(Self::NORM)
    }
}

/// Standard Cauchy: no second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cauchy;

impl Density for Cauchy {
    fn name(&self) -> String {
        "cauchy".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        -PI.ln() - (x[0] * x[0]).ln_1p()
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let u: f64 = rng.random();
        out[0] = (PI * (u - 0.5)).tan();
    }

    fn support(&self) -> SupportDescriptor {
        SupportDescriptor::FullSpace
    }

    fn tail_envelope(&self, r: f64) -> Option<f64> {
        if r <= 0.0 {
            return Some(1.0);
        }
        Some((2.0 / PI) * (1.0 / r).atan())
    }

    fn second_moment(&self) -> SecondMoment {
        SecondMoment::Infinite
    }

    fn regularity(&self) -> Regularity {
        Regularity::SMOOTH_POSITIVE
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(1.0 / PI)
    }
}
