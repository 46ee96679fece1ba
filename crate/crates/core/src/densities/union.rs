use rand::{Rng, RngCore};

use super::{Density, Regularity, SecondMoment, SupportDescriptor, TailQuantities};
use crate::error::{invalid, Result};
use crate::numeric::{log_plus, stable_sum, NeumaierSum};

/// Uniform density on a finite union of disjoint closed intervals.
///
/// Intervals are stored as `(left, length)` so that very short pieces far
/// from the origin keep their exact length.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformOnUnion {
    label: String,
    pieces: Vec<(f64, f64)>,
    /// Cumulative lengths, for sampling.
    cumulative: Vec<f64>,
    measure: f64,
    level: f64,
}

impl UniformOnUnion {
    pub fn new(label: impl Into<String>, pieces: Vec<(f64, f64)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(invalid("pieces", "need at least one interval"));
        }
        for (i, &(a, len)) in pieces.iter().enumerate() {
            if !(len > 0.0) || !a.is_finite() || !len.is_finite() {
                return Err(invalid("pieces", format!("piece {i} has nonpositive length {len}")));
            }
            if i > 0 {
                let (pa, pl) = pieces[i - 1];
                if pa + pl >= a {
                    return Err(invalid("pieces", format!("pieces {} and {i} overlap or are unsorted", i - 1)));
                }
            }
        }
        let mut acc = NeumaierSum::new();
        let cumulative = pieces
            .iter()
            .map(|p| {
                acc.add(p.1);
                acc.value()
            })
            .collect();
        let measure = acc.value();
        Ok(Self {
            label: label.into(),
            pieces,
            cumulative,
            measure,
            level: 1.0 / measure,
        })
    }

    /// Uniform on `[a, b]`.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(invalid("interval", format!("need a < b, got [{a}, {b}]")));
        }
        Self::new(if (a, b) == (0.0, 1.0) { "uniform".to_string() } else { format!("uniform[{a},{b}]") }, vec![(a, b - a)])
    }

    /// `(left, length)` of every piece.
    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    /// `(left, right)` of every piece.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.pieces.iter().map(|&(a, l)| (a, a + l)).collect()
    }

    /// Lebesgue measure of the support.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// The constant density value on the support.
    pub fn level(&self) -> f64 {
        self.level
    }

    /// Restriction to pieces `range`, renormalized.
    pub fn restrict(&self, range: std::ops::Range<usize>, label: impl Into<String>) -> Result<Self> {
        Self::new(label, self.pieces[range].to_vec())
    }

    /// `∫ x² over [a, a+len]`, written in terms of `len` to avoid cancellation.
    fn piece_second_moment(a: f64, len: f64) -> f64 {
        len * (a * a + a * len + len * len / 3.0)
    }

    fn piece_index(&self, x: f64) -> Option<usize> {
        let i = self.pieces.partition_point(|p| p.0 <= x);
        if i == 0 {
            return None;
        }
        let (a, l) = self.pieces[i - 1];
        (x <= a + l).then_some(i - 1)
    }

    /// Length and `∫x²` of the part of `[a, a+len]` with `|x| > r`.
    fn outside(a: f64, len: f64, r: f64) -> (f64, f64) {
        let b = a + len;
        let mut out = (0.0, 0.0);
        let mut add = |lo: f64, hi: f64| {
            if hi > lo {
                out.0 += hi - lo;
                out.1 += (hi * hi * hi - lo * lo * lo) / 3.0;
            }
        };
        if a >= r || b <= -r {
            // whole piece outside the ball
            out = (len, Self::piece_second_moment(a, len));
        } else {
            add(a, b.min(-r));
            add(a.max(r), b);
        }
        out
    }
}

impl Density for UniformOnUnion {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn dim(&self) -> usize {
        1
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        match self.piece_index(x[0]) {
            Some(_) => self.level.ln(),
            None => f64::NEG_INFINITY,
        }
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        match self.piece_index(x[0]) {
            Some(_) => self.level,
            None => 0.0,
        }
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let u: f64 = rng.random::<f64>() * self.measure;
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.pieces.len() - 1);
        let (a, l) = self.pieces[i];
        let v: f64 = rng.random();
        out[0] = a + v * l;
    }

    fn support(&self) -> SupportDescriptor {
        SupportDescriptor::IntervalUnion(self.intervals())
    }

    fn tail_envelope(&self, r: f64) -> Option<f64> {
        Some(self.analytic_tails(r)?.alpha)
    }

    fn second_moment(&self) -> SecondMoment {
        SecondMoment::Finite(stable_sum(self.pieces.iter().map(|&(a, l)| Self::piece_second_moment(a, l))) * self.level)
    }

    fn regularity(&self) -> Regularity {
        Regularity::INDICATOR
    }

    fn analytic_tails(&self, r: f64) -> Option<TailQuantities> {
        let r = r.max(0.0);
        let (mut len, mut m2) = (NeumaierSum::new(), NeumaierSum::new());
        for &(a, l) in &self.pieces {
            let (ol, om) = Self::outside(a, l, r);
            len.add(ol);
            m2.add(om);
        }
        let alpha = (len.value() * self.level).min(1.0);
        Some(TailQuantities::exact(r, alpha, alpha * log_plus(self.level), m2.value() * self.level))
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(self.level)
    }
}

/// Truncation of the interval-comb density: uniform on `J_n = [n², n² + n⁻⁶]`,
/// `n = 1..=n_max`, renormalized by the truncated `Z = Σ n⁻⁶`.
pub fn make_fstar(n_max: usize) -> Result<UniformOnUnion> {
    if n_max < 2 {
        return Err(invalid("n_max", "must be at least 2"));
    }
    let pieces = (1..=n_max)
        .map(|n| {
            let nf = n as f64;
            (nf * nf, nf.powi(-6))
        })
        .collect();
    UniformOnUnion::new("fstar", pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fstar_normalization_matches_series() {
        let f = make_fstar(50).unwrap();
        // Σ_{n≤50} n⁻⁶, summed in extended precision.
        assert!((f.measure() - 1.017_343_061_375_809_4).abs() < 1e-15);
        let full = make_fstar(1000).unwrap().measure();
        let zeta6 = std::f64::consts::PI.powi(6) / 945.0;
        assert!((full - zeta6).abs() < 1e-14);
    }

    #[test]
    fn fstar_second_moment_matches_termwise_integration() {
        // (1/Z)·Σ ((n² + n⁻⁶)³ − n⁶)/3 in 40-digit arithmetic.
        let SecondMoment::Finite(m2) = make_fstar(50).unwrap().second_moment() else { panic!() };
        assert!((m2 - 2.909_010_762_319_963_8).abs() < 1e-14);
    }

    #[test]
    fn tails_at_zero_are_totals() {
        let f = make_fstar(10).unwrap();
        let t = f.analytic_tails(0.0).unwrap();
        assert!((t.alpha - 1.0).abs() < 1e-15);
        let SecondMoment::Finite(m2) = f.second_moment() else { panic!() };
        assert!((t.mu2 - m2).abs() < 1e-12 * m2);
    }

    #[test]
    fn partial_tail_splits_interval() {
        let u = UniformOnUnion::interval(-1.0, 3.0).unwrap();
        let t = u.analytic_tails(2.0).unwrap();
        assert!((t.alpha - 0.25).abs() < 1e-15);
        assert!((t.mu2 - (27.0 - 8.0) / 3.0 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn pdf_closed_on_both_ends() {
        let f = make_fstar(3).unwrap();
        assert!(f.pdf(&[4.0]) > 0.0);
        assert!(f.pdf(&[4.0 + 2f64.powi(-6)]) > 0.0);
        assert_eq!(f.pdf(&[3.0]), 0.0);
    }
}
