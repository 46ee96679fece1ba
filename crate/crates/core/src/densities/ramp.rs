use rand::{Rng, RngCore};

use super::{Density, Regularity, SecondMoment, SupportDescriptor};
use crate::error::{invalid, Result};
use crate::numeric::NeumaierSum;

/// Continuous density `c·u(x)` with `u(x) = max(0, 1 − dist(x, A)/δ)` for a
/// finite interval union `A`: equal to `c` on `A`, linear ramps of width `δ`
/// outside, zero once `dist(x, A) ≥ δ`.
#[derive(Debug, Clone)]
pub struct UrysohnRamp {
    intervals: Vec<(f64, f64)>,
    delta: f64,
    integral: f64,
    level: f64,
}

impl UrysohnRamp {
    pub fn new(intervals: Vec<(f64, f64)>, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid("delta", "must be positive"));
        }
        SupportDescriptor::interval_union(intervals.clone())?;
        let mut acc = NeumaierSum::new();
        for &(a, b) in &intervals {
            acc.add(b - a);
        }
        for w in intervals.windows(2) {
            let g = w[1].0 - w[0].1;
            acc.add(if g >= 2.0 * delta { delta } else { g - g * g / (4.0 * delta) });
        }
        // Two outer ramps of area δ/2 each.
        acc.add(delta);
        let integral = acc.value();
        Ok(Self {
            intervals,
            delta,
            integral,
            level: 1.0 / integral,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `I = ∫u`.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// `c = 1/I`, the value on `A`.
    pub fn level(&self) -> f64 {
        self.level
    }

    /// `λ(O ∖ A)` for `O = {dist(·, A) < δ}`.
    pub fn excess_measure(&self) -> f64 {
        excess_measure(&self.intervals, self.delta)
    }

    fn dist(&self, x: f64) -> f64 {
        let i = self.intervals.partition_point(|iv| iv.1 < x);
        let mut d = f64::INFINITY;
        if i < self.intervals.len() {
            d = (self.intervals[i].0 - x).max(0.0);
        }
        if i > 0 {
            d = d.min(x - self.intervals[i - 1].1);
        }
        d
    }

    fn u(&self, x: f64) -> f64 {
        (1.0 - self.dist(x) / self.delta).max(0.0)
    }
}

/// `λ({dist(·, A) < δ} ∖ A) = Σ_gaps min(G, 2δ) + 2δ`.
pub(crate) fn excess_measure(intervals: &[(f64, f64)], delta: f64) -> f64 {
    let mut acc = NeumaierSum::new();
    for w in intervals.windows(2) {
        acc.add((w[1].0 - w[0].1).min(2.0 * delta));
    }
    acc.add(2.0 * delta);
    acc.value()
}

impl Density for UrysohnRamp {
    fn name(&self) -> String {
        format!("ramp[delta={}]", self.delta)
    }

    fn dim(&self) -> usize {
        1
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        self.pdf(x).ln()
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        self.level * self.u(x[0])
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        // Rejection from the uniform law on the δ-neighbourhood hull.
        let (lo, hi) = (self.intervals[0].0 - self.delta, self.intervals.last().unwrap().1 + self.delta);
        loop {
            let x = lo + (hi - lo) * rng.random::<f64>();
            if rng.random::<f64>() < self.u(x) {
                out[0] = x;
                return;
            }
        }
    }

    fn support(&self) -> SupportDescriptor {
        let d = self.delta;
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for &(a, b) in &self.intervals {
            match merged.last_mut() {
                Some(last) if a - d <= last.1 => last.1 = b + d,
                _ => merged.push((a - d, b + d)),
            }
        }
        SupportDescriptor::IntervalUnion(merged)
    }

    fn tail_envelope(&self, r: f64) -> Option<f64> {
        let (lo, hi) = (self.intervals[0].0 - self.delta, self.intervals.last().unwrap().1 + self.delta);
        Some(if r >= lo.abs().max(hi.abs()) { 0.0 } else { 1.0 })
    }

    fn second_moment(&self) -> SecondMoment {
        let hi = self.intervals[0].0.abs().max(self.intervals.last().unwrap().1.abs()) + self.delta;
        SecondMoment::Finite(hi * hi)
    }

    fn regularity(&self) -> Regularity {
        Regularity {
            continuous: true,
            strictly_positive: false,
            bounded: true,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let d = self.delta;
        let mut out = Vec::with_capacity(self.intervals.len() * 4);
        out.push(self.intervals[0].0 - d);
        for (i, &(a, b)) in self.intervals.iter().enumerate() {
            out.push(a);
            out.push(b);
            if let Some(&(next, _)) = self.intervals.get(i + 1) {
                let g = next - b;
                if g >= 2.0 * d {
                    out.push(b + d);
                    out.push(next - d);
                } else {
                    out.push(b + 0.5 * g);
                }
            }
        }
        out.push(self.intervals.last().unwrap().1 + d);
        out
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(self.level)
    }
}
