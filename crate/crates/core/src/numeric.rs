//! Small numerical helpers shared by every module.

/// `log₊ t = max(log t, 0)`, with `log₊ 0 = 0`.
#[inline]
pub fn log_plus(t: f64) -> f64 {
    if t > 1.0 {
        t.ln()
    } else {
        0.0
    }
}

/// `u·log(u/v)` with the continuous extension `0·log 0 = 0`.
#[inline]
pub fn xlogy_ratio(u: f64, v: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * (u / v).ln()
    }
}

/// `u·log(1/u)`, zero at `u = 0`.
#[inline]
pub fn entropy_term(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        -u * u.ln()
    }
}

/// Stable `log Σ exp(terms)`. Returns `-∞` for an empty or all `-∞` input.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + s.ln()
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of an iterator.
pub fn stable_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
