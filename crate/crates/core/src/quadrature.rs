//! Adaptive Gauss–Kronrod (10/21) quadrature with a conservative error bar.
//!
//! Each panel reports `10·|K21 − G10|` (floored at the rounding level of the
//! panel) as its error, and the worst panel is bisected until the summed error
//! meets the budget. Semi-infinite ranges are covered by doubling shells; a
//! shell sequence that stops shrinking is reported as divergent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_745_182,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Safety factor applied to the Kronrod–Gauss panel difference.
pub const ERROR_SAFETY: f64 = 10.0;

/// Accuracy target and work cap for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QuadratureBudget {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureBudget {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 20_000,
        }
    }
}

impl QuadratureBudget {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }

    /// Same budget with the absolute tolerance divided among `parts` pieces.
    pub fn split(&self, parts: usize) -> Self {
        Self {
            abs_tol: self.abs_tol / parts.max(1) as f64,
            ..*self
        }
    }
}

/// Integral estimate with its error bar and evaluation count.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub n_evals: usize,
}

impl Quadrature {
    pub fn zero() -> Self {
        Self::default()
    }
}

impl std::ops::Add for Quadrature {
    type Output = Quadrature;
    fn add(self, rhs: Self) -> Self {
        Quadrature {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
            n_evals: self.n_evals + rhs.n_evals,
        }
    }
}

impl std::iter::Sum for Quadrature {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        let mut value = NeumaierSum::new();
        let mut error = 0.0;
        let mut n_evals = 0;
        for q in iter {
            value.add(q.value);
            error += q.error;
            n_evals += q.n_evals;
        }
        Quadrature {
            value: value.value(),
            error,
            n_evals,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = (fc * WGK[10]).abs();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let diff = ((kronrod - gauss) * half).abs();
    let floor = 50.0 * f64::EPSILON * abs_sum * half.abs();
    let error = if diff.is_finite() {
        (ERROR_SAFETY * diff).max(floor)
    } else {
        f64::INFINITY
    };
    Panel { a, b, value, error }
}

fn splittable(p: &Panel) -> bool {
    let mid = 0.5 * (p.a + p.b);
    mid > p.a && mid < p.b && (p.b - p.a) > 8.0 * f64::EPSILON * p.a.abs().max(p.b.abs())
}

/// Adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, budget: QuadratureBudget) -> Result<Quadrature> {
    integrate_with_breaks(&f, &[a, b], budget)
}

/// Adaptive integration over consecutive panels `[breaks[i], breaks[i+1]]`.
///
/// The break points seed the initial partition (kinks, support edges).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    budget: QuadratureBudget,
) -> Result<Quadrature> {
    if breaks.len() < 2 {
        return Ok(Quadrature::zero());
    }
    let mut heap = BinaryHeap::with_capacity(breaks.len() * 4);
    let mut n_evals = 0usize;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(gauss_kronrod(f, w[0], w[1]));
            n_evals += 21;
        }
    }
    let mut done: Vec<Panel> = Vec::new();
    let mut subdivisions = heap.len();
    let mut value: f64 = heap.iter().map(|p| p.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.error).sum();
    let mut since_resum = 0usize;
    loop {
        if value.is_nan() {
            return Err(Error::DivergentIntegrand(format!(
                "non-finite integrand encountered on [{}, {}]",
                breaks[0],
                breaks[breaks.len() - 1]
            )));
        }
        if error <= budget.target(value) || since_resum >= 256 {
            // Refresh the running totals to avoid drift before deciding.
            value = heap.iter().chain(done.iter()).map(|p| p.value).collect::<NeumaierSum>().value();
            error = heap.iter().chain(done.iter()).map(|p| p.error).sum();
            since_resum = 0;
            if error <= budget.target(value) {
                return Ok(Quadrature {
                    value,
                    error,
                    n_evals,
                });
            }
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => {
                return Err(Error::BudgetExceeded {
                    value,
                    achieved: error,
                    requested: budget.target(value),
                })
            }
        };
        if subdivisions >= budget.max_subdivisions || !worst.error.is_finite() && !splittable(&worst) {
            heap.push(worst);
            return Err(Error::BudgetExceeded {
                value,
                achieved: error,
                requested: budget.target(value),
            });
        }
        if !splittable(&worst) {
            done.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = gauss_kronrod(f, worst.a, mid);
        let right = gauss_kronrod(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        if !error.is_finite() {
            error = heap.iter().chain(done.iter()).map(|p| p.error).sum::<f64>() + left.error + right.error;
        }
        heap.push(left);
        heap.push(right);
        n_evals += 42;
        subdivisions += 1;
        since_resum += 1;
    }
}

/// Outcome of integrating over a semi-infinite range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailIntegral {
    Converged(Quadrature),
    /// Shell contributions stopped shrinking; `partial` is the sum so far.
    Diverging { partial: f64, shells: usize },
}

impl TailIntegral {
    pub fn converged(self) -> Option<Quadrature> {
        match self {
            TailIntegral::Converged(q) => Some(q),
            TailIntegral::Diverging { .. } => None,
        }
    }
}

const MAX_SHELLS: usize = 80;
const GROWTH_RUN: usize = 6;

/// Integrates `f` over `[start, ∞)` (`upward = true`) or `(-∞, start]`.
///
/// Shell `k` covers a width `w₀·2^k` adjacent to the previous one.
pub fn integrate_tail<F: Fn(f64) -> f64>(
    f: &F,
    start: f64,
    upward: bool,
    budget: QuadratureBudget,
) -> Result<TailIntegral> {
    let w0 = start.abs().max(1.0);
    let shell_budget = QuadratureBudget {
        abs_tol: budget.abs_tol / 16.0,
        ..budget
    };
    let mut total = Quadrature::zero();
    let mut prev_abs = f64::INFINITY;
    let mut growth = 0usize;
    let mut shrink = 0usize;
    let mut inner = 0.0f64;
    for k in 0..MAX_SHELLS {
        let width = w0 * 2f64.powi(k as i32);
        let (a, b) = if upward {
            (start + inner, start + inner + width)
        } else {
            (start - inner - width, start - inner)
        };
        inner += width;
        let shell = match integrate(f, a, b, shell_budget) {
            Ok(q) => q,
            Err(Error::BudgetExceeded { value, achieved, .. }) if achieved < value.abs() => Quadrature {
                value,
                error: achieved,
                n_evals: 0,
            },
            Err(e) => return Err(e),
        };
        total = total + shell;
        let mag = shell.value.abs();
        if !total.value.is_finite() {
            return Ok(TailIntegral::Diverging {
                partial: total.value,
                shells: k + 1,
            });
        }
        if mag >= prev_abs && mag > 0.0 {
            growth += 1;
            shrink = 0;
            if growth >= GROWTH_RUN {
                return Ok(TailIntegral::Diverging {
                    partial: total.value,
                    shells: k + 1,
                });
            }
        } else {
            growth = 0;
            let q = if prev_abs.is_finite() && prev_abs > 0.0 {
                mag / prev_abs
            } else {
                0.0
            };
            if mag <= budget.abs_tol / 16.0 && q <= 0.75 {
                shrink += 1;
                if shrink >= 2 || mag == 0.0 {
                    // Geometric remainder estimate for the unseen shells.
                    total.error += mag * q / (1.0 - q).max(0.25);
                    return Ok(TailIntegral::Converged(total));
                }
            } else {
                shrink = 0;
            }
        }
        prev_abs = mag;
    }
    Ok(TailIntegral::Diverging {
        partial: total.value,
        shells: MAX_SHELLS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, QuadratureBudget::default()).unwrap();
        // ∫_{-1}^{2} x³ − 2x + 1 dx = 15/4 − 3 + 3
        assert!((q.value - 3.75).abs() < 1e-13, "{}", q.value);
    }

    #[test]
    fn gaussian_mass() {
        let q = integrate(crate::numeric::normal_pdf, -12.0, 12.0, QuadratureBudget::default()).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
        assert!(q.error < 1e-10);
    }

    #[test]
    fn kink_with_break_point() {
        let q = integrate_with_breaks(&|x: f64| 0.5 * (-x.abs()).exp(), &[-40.0, 0.0, 40.0], QuadratureBudget::default())
            .unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_of_cauchy_mass_converges() {
        let cauchy = |x: f64| 1.0 / (std::f64::consts::PI * (1.0 + x * x));
        let t = integrate_tail(&cauchy, 10.0, true, QuadratureBudget::default()).unwrap();
        let q = t.converged().expect("converges");
        let exact = 0.5 - (10.0f64).atan() / std::f64::consts::PI;
        assert!((q.value - exact).abs() < 1e-8, "{} vs {}", q.value, exact);
    }

    #[test]
    fn tail_of_cauchy_second_moment_diverges() {
        let f = |x: f64| x * x / (std::f64::consts::PI * (1.0 + x * x));
        let t = integrate_tail(&f, 10.0, true, QuadratureBudget::default()).unwrap();
        assert!(matches!(t, TailIntegral::Diverging { .. }));
    }

    #[test]
    fn lower_tail_mirrors_upper() {
        let up = integrate_tail(&crate::numeric::normal_pdf, 1.0, true, QuadratureBudget::default())
            .unwrap()
            .converged()
            .unwrap();
        let down = integrate_tail(&crate::numeric::normal_pdf, -1.0, false, QuadratureBudget::default())
            .unwrap()
            .converged()
            .unwrap();
        assert!((up.value - down.value).abs() < 1e-13);
        assert!((up.value - crate::numeric::normal_sf(1.0)).abs() < 1e-12);
    }

    #[test]
    fn budget_exceeded_is_reported() {
        let b = QuadratureBudget {
            abs_tol: 1e-30,
            rel_tol: 0.0,
            max_subdivisions: 5,
        };
        let r = integrate(|x: f64| x.sin() * 1e3, 0.0, 100.0, b);
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }
}
