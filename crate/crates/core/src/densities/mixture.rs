use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{Density, Regularity, SecondMoment, SupportDescriptor, TailQuantities};
use crate::error::{invalid, Result};
use crate::numeric::{log_sum_exp, stable_sum};

/// Finite convex combination `Σ aᵢ qᵢ` of arbitrary densities.
#[derive(Debug, Clone)]
pub struct DensityMixture {
    weights: Vec<f64>,
    parts: Vec<Arc<dyn Density>>,
}

impl DensityMixture {
    pub fn new(weights: Vec<f64>, parts: Vec<Arc<dyn Density>>) -> Result<Self> {
        if weights.len() != parts.len() || parts.is_empty() {
            return Err(invalid("weights", "need one weight per part and at least one part"));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) || (stable_sum(weights.iter().copied()) - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", "must lie on the simplex"));
        }
        let d = parts[0].dim();
        if parts.iter().any(|p| p.dim() != d) {
            return Err(invalid("parts", "dimensions differ"));
        }
        Ok(Self { weights, parts })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn parts(&self) -> &[Arc<dyn Density>] {
        &self.parts
    }
}

impl Density for DensityMixture {
    fn name(&self) -> String {
        let names: Vec<String> = self.parts.iter().map(|p| p.name()).collect();
        format!("mixture[{}]", names.join(","))
    }

    fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.parts)
            .map(|(w, p)| if *w > 0.0 { w.ln() + p.ln_pdf(x) } else { f64::NEG_INFINITY })
            .collect();
        log_sum_exp(&terms)
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(&self.parts).map(|(w, p)| w * p.pdf(x)).sum()
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, p) in self.weights.iter().zip(&self.parts) {
            acc += w;
            if u < acc {
                return p.sample(rng, out);
            }
        }
        self.parts.last().unwrap().sample(rng, out)
    }

    fn support(&self) -> SupportDescriptor {
        let mut all = Vec::new();
        for (w, p) in self.weights.iter().zip(&self.parts) {
            if *w == 0.0 {
                continue;
            }
            match p.support() {
                SupportDescriptor::IntervalUnion(v) => all.extend(v),
                _ => return SupportDescriptor::FullSpace,
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in all {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        SupportDescriptor::IntervalUnion(merged)
    }

    fn tail_envelope(&self, r: f64) -> Option<f64> {
        let mut acc = 0.0;
        for (w, p) in self.weights.iter().zip(&self.parts) {
            acc += w * p.tail_envelope(r)?;
        }
        Some(acc)
    }

    fn second_moment(&self) -> SecondMoment {
        let mut acc = 0.0;
        for (w, p) in self.weights.iter().zip(&self.parts) {
            match p.second_moment() {
                SecondMoment::Finite(m) => acc += w * m,
                SecondMoment::Infinite if *w > 0.0 => return SecondMoment::Infinite,
                SecondMoment::Infinite => {}
                SecondMoment::Unknown => return SecondMoment::Unknown,
            }
        }
        SecondMoment::Finite(acc)
    }

    fn regularity(&self) -> Regularity {
        let active = || self.weights.iter().zip(&self.parts).filter(|(w, _)| **w > 0.0).map(|(_, p)| p.regularity());
        Regularity {
            continuous: active().all(|r| r.continuous),
            strictly_positive: active().any(|r| r.strictly_positive),
            bounded: active().all(|r| r.bounded),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.parts.iter().flat_map(|p| p.breakpoints()).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn analytic_tails(&self, r: f64) -> Option<TailQuantities> {
        // β is not additive over parts, so only the zero-entropy case is closed form.
        if self.sup_bound()? > 1.0 {
            return None;
        }
        let (mut alpha, mut mu2) = (0.0, 0.0);
        for (w, p) in self.weights.iter().zip(&self.parts) {
            let t = p.analytic_tails(r)?;
            alpha += w * t.alpha;
            mu2 += w * t.mu2;
        }
        Some(TailQuantities::exact(r, alpha, 0.0, mu2))
    }

    fn sup_bound(&self) -> Option<f64> {
        let mut acc = 0.0;
        for (w, p) in self.weights.iter().zip(&self.parts) {
            acc += w * p.sup_bound()?;
        }
        Some(acc)
    }
}
