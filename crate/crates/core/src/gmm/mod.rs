//! Finite Gaussian mixtures: validated construction, stable log-density
//! evaluation, sampling and closed-form moments.

mod io;
mod moments;

pub use io::{read_mixture, write_mixture, mixture_from_str, mixture_to_string};
pub use moments::{
    default_t0, exp_quadratic_moment, gmm_second_moment, log_exp_quadratic_moment, max_covariance_eigenvalue,
};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, stable_sum};

/// Tolerance on `Σ πⱼ = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Half-width (in standard deviations) of the evaluation windows.
const WINDOW_SIGMAS: f64 = 12.0;

/// One weighted Gaussian component `π·φ(·; μ, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major `d×d` covariance.
    pub cov: Vec<f64>,
}

impl GaussComponent {
    pub fn new(weight: f64, mean: Vec<f64>, cov: Vec<f64>) -> Self {
        Self { weight, mean, cov }
    }

    /// Component with covariance `variance·I`.
    pub fn isotropic(weight: f64, mean: Vec<f64>, variance: f64) -> Self {
        let d = mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = variance;
        }
        Self { weight, mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.cov)
    }
}

#[derive(Debug, Clone)]
struct Factor {
    /// Lower Cholesky factor, row-major.
    chol: Vec<f64>,
    /// `log π − (d/2)·log 2π − ½·log det Σ`, or `-∞` for zero weight.
    log_coef: f64,
}

/// Same-bandwidth components sorted by mean; 1-D only.
#[derive(Debug, Clone)]
struct BandGroup {
    sigma: f64,
    means: Vec<f64>,
    log_coefs: Vec<f64>,
    log_total: f64,
}

#[derive(Debug, Clone)]
struct Evaluator1d {
    groups: Vec<BandGroup>,
}

/// A validated finite Gaussian mixture density.
#[derive(Debug, Clone)]
pub struct FiniteGMM {
    dim: usize,
    components: Vec<GaussComponent>,
    factors: Vec<Factor>,
    fast: Option<Evaluator>,
}

impl PartialEq for FiniteGMM {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.components == other.components
    }
}

impl FiniteGMM {
    /// Validates weights (simplex within `WEIGHT_SUM_TOL`), shared dimension,
    /// symmetry and positive-definiteness of every covariance.
    pub fn new(components: Vec<GaussComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Validation("mixture has no components".into()))?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        let mut factors = Vec::with_capacity(components.len());
        for (j, c) in components.iter().enumerate() {
            if c.dim() != dim {
                return Err(Error::Validation(format!(
                    "component {j} has dimension {} but mixture dimension is {dim}",
                    c.dim()
                )));
            }
            if c.cov.len() != dim * dim {
                return Err(Error::Validation(format!(
                    "component {j}: covariance has {} entries, expected {}",
                    c.cov.len(),
                    dim * dim
                )));
            }
            if !(c.weight.is_finite() && (0.0..=1.0).contains(&c.weight)) {
                return Err(Error::Validation(format!("component {j}: weight {} outside [0, 1]", c.weight)));
            }
            if c.mean.iter().chain(c.cov.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("component {j}: non-finite parameter")));
            }
            factors.push(factor(j, c)?);
        }
        let total = stable_sum(components.iter().map(|c| c.weight));
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Validation(format!(
                "weights sum to {total:.17} (must be 1 within {WEIGHT_SUM_TOL:e})"
            )));
        }
        let fast = match dim {
            1 => Some(Evaluator::One(build_evaluator(&components, &factors))),
            2 => Some(Evaluator::Two(build_evaluator_2d(&components, &factors))),
            _ => None,
        };
        Ok(Self {
            dim,
            components,
            factors,
            fast,
        })
    }

    /// Single component `N(mean, variance·I)`.
    pub fn isotropic_gaussian(mean: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(vec![GaussComponent::isotropic(1.0, mean, variance)])
    }

    pub fn standard_normal(dim: usize) -> Self {
        Self::isotropic_gaussian(vec![0.0; dim], 1.0).expect("standard normal is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[GaussComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// `Σ aᵢ·gᵢ` flattened into one mixture.
    pub fn convex_combination(parts: &[(f64, &FiniteGMM)]) -> Result<Self> {
        let mut comps = Vec::new();
        for (a, g) in parts {
            for c in g.components() {
                comps.push(GaussComponent {
                    weight: a * c.weight,
                    ..c.clone()
                });
            }
        }
        Self::new(comps)
    }

    fn component_log_density(&self, j: usize, x: &[f64]) -> f64 {
        let f = &self.factors[j];
        if f.log_coef == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        f.log_coef - 0.5 * mahalanobis_sq(&f.chol, &self.components[j].mean, x, self.dim)
    }

    /// `log Σⱼ πⱼ φ(x; μⱼ, Σⱼ)`, stable for exponents far below `-5000`.
    pub fn logpdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let fast = match &self.fast {
            Some(Evaluator::One(ev)) => ev.windowed(x[0]),
            Some(Evaluator::Two(ev)) => self.windowed_2d(ev, x),
            None => None,
        };
        if let Some(v) = fast {
            return v;
        }
        self.logpdf_exhaustive(x)
    }

    fn logpdf_exhaustive(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.components.len())
            .map(|j| self.component_log_density(j, x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.logpdf(x).exp()
    }

    pub fn logpdf1(&self, x: f64) -> f64 {
        self.logpdf(&[x])
    }

    pub fn pdf1(&self, x: f64) -> f64 {
        self.logpdf(&[x]).exp()
    }

    /// Draws one point into `out` (length `dim`).
    pub fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let u: f64 = rand::Rng::random(rng);
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (j, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = j;
                break;
            }
        }
        let d = self.dim;
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let l = &self.factors[pick].chol;
        let mean = &self.components[pick].mean;
        for i in 0..d {
            let mut v = mean[i];
            for k in 0..=i {
                v += l[i * d + k] * z[k];
            }
            out[i] = v;
        }
    }

    pub fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut out = vec![0.0; n * self.dim];
        for chunk in out.chunks_mut(self.dim) {
            self.sample_into(rng, chunk);
        }
        out
    }
}

fn factor(j: usize, c: &GaussComponent) -> Result<Factor> {
    let d = c.dim();
    for r in 0..d {
        for s in 0..r {
            let (a, b) = (c.cov[r * d + s], c.cov[s * d + r]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1e-300) {
                return Err(Error::Validation(format!("component {j}: covariance is not symmetric")));
            }
        }
    }
    let chol = nalgebra::Cholesky::new(c.cov_matrix()).ok_or_else(|| {
        Error::Validation(format!("component {j}: covariance is not positive definite (Cholesky failed)"))
    })?;
    let l = chol.l();
    let mut flat = vec![0.0; d * d];
    let mut half_log_det = 0.0;
    for r in 0..d {
        for s in 0..=r {
            flat[r * d + s] = l[(r, s)];
        }
        half_log_det += l[(r, r)].ln();
    }
    let log_coef = if c.weight > 0.0 {
        c.weight.ln() - 0.5 * d as f64 * LN_2PI - half_log_det
    } else {
        f64::NEG_INFINITY
    };
    Ok(Factor { chol: flat, log_coef })
}

/// `(x−μ)ᵀ Σ⁻¹ (x−μ)` through forward substitution with the Cholesky factor.
fn mahalanobis_sq(chol: &[f64], mean: &[f64], x: &[f64], d: usize) -> f64 {
    if d == 1 {
        let z = (x[0] - mean[0]) / chol[0];
        return z * z;
    }
    let mut y = [0.0f64; 8];
    let mut heap;
    let y: &mut [f64] = if d <= 8 {
        &mut y[..d]
    } else {
        heap = vec![0.0; d];
        &mut heap
    };
    let mut acc = 0.0;
    for i in 0..d {
        let mut v = x[i] - mean[i];
        for k in 0..i {
            v -= chol[i * d + k] * y[k];
        }
        v /= chol[i * d + i];
        y[i] = v;
        acc += v * v;
    }
    acc
}

fn build_evaluator(components: &[GaussComponent], factors: &[Factor]) -> Evaluator1d {
    let mut by_sigma: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for (c, f) in components.iter().zip(factors) {
        if f.log_coef == f64::NEG_INFINITY {
            continue;
        }
        let sigma = f.chol[0];
        by_sigma.entry(sigma.to_bits()).or_default().push((c.mean[0], f.log_coef));
    }
    let groups = by_sigma
        .into_iter()
        .map(|(bits, mut entries)| {
            entries.sort_by(|a, b| a.0.total_cmp(&b.0));
            let log_coefs: Vec<f64> = entries.iter().map(|e| e.1).collect();
            BandGroup {
                sigma: f64::from_bits(bits),
                means: entries.iter().map(|e| e.0).collect(),
                log_total: log_sum_exp(&log_coefs),
                log_coefs,
            }
        })
        .collect();
    Evaluator1d { groups }
}

/// Running log-sum-exp without allocation.
#[derive(Clone, Copy)]
struct StreamingLse {
    max: f64,
    acc: f64,
}

impl StreamingLse {
    const EMPTY: Self = Self {
        max: f64::NEG_INFINITY,
        acc: 0.0,
    };

    #[inline]
    fn push(&mut self, t: f64) {
        if t > self.max {
            self.acc = self.acc * (self.max - t).exp() + 1.0;
            self.max = t;
        } else {
            self.acc += (t - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.acc.ln()
    }
}

/// Accept a windowed value when the ignored part is below 1e-16 relative.
const IGNORED_LOG_MARGIN: f64 = 37.0;

impl Evaluator1d {
    /// Windowed evaluation; `None` when the ignored mass could matter.
    ///
    /// In each group the window reaches `WINDOW_SIGMAS·σ` past the nearest
    /// mean, so points far from every component still see a few terms.
    fn windowed(&self, x: f64) -> Option<f64> {
        let mut sum = StreamingLse::EMPTY;
        let mut ignored = StreamingLse::EMPTY;
        for g in &self.groups {
            let k = g.means.partition_point(|&m| m < x);
            let mut near = f64::INFINITY;
            if k < g.means.len() {
                near = g.means[k] - x;
            }
            if k > 0 {
                near = near.min(x - g.means[k - 1]);
            }
            let reach = near + WINDOW_SIGMAS * g.sigma;
            let lo = g.means.partition_point(|&m| m < x - reach);
            let hi = g.means.partition_point(|&m| m <= x + reach);
            let inv = 1.0 / g.sigma;
            for i in lo..hi {
                let z = (x - g.means[i]) * inv;
                sum.push(g.log_coefs[i] - 0.5 * z * z);
            }
            if lo > 0 || hi < g.means.len() {
                let zr = reach * inv;
                ignored.push(g.log_total - 0.5 * zr * zr);
            }
        }
        let v = sum.value();
        (v.is_finite() && v - ignored.value() > IGNORED_LOG_MARGIN).then_some(v)
    }
}

/// Isotropic 2-D components sharing one σ, bucketed into columns of width σ
/// and sorted by the second coordinate inside each column.
#[derive(Debug, Clone)]
struct ColumnGroup {
    sigma: f64,
    columns: Vec<i64>,
    /// `starts[c]..starts[c+1]` indexes the entries of column `c`.
    starts: Vec<usize>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    log_coefs: Vec<f64>,
    log_total: f64,
}

#[derive(Debug, Clone)]
struct Evaluator2d {
    groups: Vec<ColumnGroup>,
    /// Components that are not isotropic, always evaluated exactly.
    others: Vec<usize>,
}

fn build_evaluator_2d(components: &[GaussComponent], factors: &[Factor]) -> Evaluator2d {
    let mut by_sigma: BTreeMap<u64, Vec<(i64, f64, f64, f64)>> = BTreeMap::new();
    let mut others = Vec::new();
    for (j, (c, f)) in components.iter().zip(factors).enumerate() {
        if f.log_coef == f64::NEG_INFINITY {
            continue;
        }
        let isotropic = c.cov[1] == 0.0 && c.cov[2] == 0.0 && c.cov[0] == c.cov[3];
        if !isotropic {
            others.push(j);
            continue;
        }
        let sigma = f.chol[0];
        let col = (c.mean[0] / sigma).floor() as i64;
        by_sigma
            .entry(sigma.to_bits())
            .or_default()
            .push((col, c.mean[0], c.mean[1], f.log_coef));
    }
    let groups = by_sigma
        .into_iter()
        .map(|(bits, mut entries)| {
            entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.total_cmp(&b.2)));
            let mut columns = Vec::new();
            let mut starts = Vec::new();
            for (i, e) in entries.iter().enumerate() {
                if columns.last() != Some(&e.0) {
                    columns.push(e.0);
                    starts.push(i);
                }
            }
            starts.push(entries.len());
            let log_coefs: Vec<f64> = entries.iter().map(|e| e.3).collect();
            ColumnGroup {
                sigma: f64::from_bits(bits),
                columns,
                starts,
                xs: entries.iter().map(|e| e.1).collect(),
                ys: entries.iter().map(|e| e.2).collect(),
                log_total: log_sum_exp(&log_coefs),
                log_coefs,
            }
        })
        .collect();
    Evaluator2d { groups, others }
}

#[derive(Debug, Clone)]
enum Evaluator {
    One(Evaluator1d),
    Two(Evaluator2d),
}

impl FiniteGMM {
    fn windowed_2d(&self, ev: &Evaluator2d, x: &[f64]) -> Option<f64> {
        let mut sum = StreamingLse::EMPTY;
        let mut ignored = StreamingLse::EMPTY;
        for &j in &ev.others {
            sum.push(self.component_log_density(j, x));
        }
        for g in &ev.groups {
            let half = WINDOW_SIGMAS * g.sigma;
            let inv = 1.0 / g.sigma;
            let c_lo = ((x[0] - half) * inv).floor() as i64;
            let c_hi = ((x[0] + half) * inv).floor() as i64;
            let mut c = g.columns.partition_point(|&k| k < c_lo);
            let mut seen = 0usize;
            while c < g.columns.len() && g.columns[c] <= c_hi {
                let (s, e) = (g.starts[c], g.starts[c + 1]);
                let ys = &g.ys[s..e];
                let lo = s + ys.partition_point(|&v| v < x[1] - half);
                let hi = s + ys.partition_point(|&v| v <= x[1] + half);
                for i in lo..hi {
                    let (dx, dy) = ((x[0] - g.xs[i]) * inv, (x[1] - g.ys[i]) * inv);
                    sum.push(g.log_coefs[i] - 0.5 * (dx * dx + dy * dy));
                }
                seen += hi - lo;
                c += 1;
            }
            if seen < g.xs.len() {
                ignored.push(g.log_total - 0.5 * WINDOW_SIGMAS * WINDOW_SIGMAS);
            }
        }
        let v = sum.value();
        (v.is_finite() && v - ignored.value() > IGNORED_LOG_MARGIN).then_some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn standard_normal_at_zero() {
        let g = FiniteGMM::standard_normal(1);
        assert!((g.logpdf1(0.0) + 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn duplicated_component_equals_single() {
        let single = FiniteGMM::isotropic_gaussian(vec![0.3], 2.0).unwrap();
        let double = FiniteGMM::new(vec![
            GaussComponent::isotropic(0.5, vec![0.3], 2.0),
            GaussComponent::isotropic(0.5, vec![0.3], 2.0),
        ])
        .unwrap();
        for x in [-4.0, 0.0, 0.3, 7.5] {
            assert!((single.logpdf1(x) - double.logpdf1(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn far_point_stays_finite() {
        let g = FiniteGMM::standard_normal(1);
        let x = 200.0;
        let exact = -0.5 * x * x - 0.5 * LN_2PI;
        let v = g.logpdf1(x);
        assert!(v.is_finite());
        assert!((v - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn windowed_matches_exhaustive() {
        let comps: Vec<_> = (0..400)
            .map(|i| GaussComponent::isotropic(1.0 / 400.0, vec![i as f64 * 0.01], 1e-4))
            .chain(std::iter::once(GaussComponent::isotropic(0.0, vec![0.0], 9.0)))
            .collect();
        let g = FiniteGMM::new(comps).unwrap();
        for &x in &[-1.0, 0.0, 0.005, 1.234, 3.99, 4.5, 30.0] {
            let a = g.logpdf1(x);
            let b = g.logpdf_exhaustive(&[x]);
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn windowed_far_from_a_compact_lattice() {
        let comps: Vec<_> = (0..1000)
            .map(|i| GaussComponent::isotropic(1e-3, vec![i as f64 * 1e-3], 1e-6))
            .collect();
        let g = FiniteGMM::new(comps).unwrap();
        for &x in &[-2.0, -0.01, 0.5, 1.0005, 2.0] {
            let a = g.logpdf1(x);
            let b = g.logpdf_exhaustive(&[x]);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn windowed_2d_matches_exhaustive() {
        let mut comps: Vec<_> = (0..30)
            .flat_map(|i| (0..30).map(move |j| (i, j)))
            .map(|(i, j)| GaussComponent::isotropic(0.5 / 900.0, vec![i as f64 * 0.1, j as f64 * 0.1 - 1.0], 0.01))
            .collect();
        comps.push(GaussComponent::isotropic(0.25, vec![0.0, 0.0], 25.0));
        comps.push(GaussComponent::new(0.25, vec![1.0, 0.0], vec![1.0, 0.3, 0.3, 0.5]));
        let g = FiniteGMM::new(comps).unwrap();
        for x in [[0.0, 0.0], [1.45, 0.33], [2.9, 1.9], [-6.0, 4.0], [40.0, -40.0]] {
            let a = g.logpdf(&x);
            let b = g.logpdf_exhaustive(&x);
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "x={x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_weights_and_covariances() {
        let bad = FiniteGMM::new(vec![
            GaussComponent::isotropic(0.5, vec![0.0], 1.0),
            GaussComponent::isotropic(0.6, vec![0.0], 1.0),
        ]);
        assert!(matches!(bad, Err(Error::Validation(_))));
        let neg = FiniteGMM::new(vec![GaussComponent::new(1.0, vec![0.0, 0.0], vec![1.0, 0.0, 0.0, -1.0])]);
        assert!(matches!(neg, Err(Error::Validation(m)) if m.contains("Cholesky")));
    }

    #[test]
    fn two_dimensional_density_matches_closed_form() {
        let g = FiniteGMM::new(vec![GaussComponent::new(1.0, vec![1.0, -1.0], vec![2.0, 0.5, 0.5, 1.0])]).unwrap();
        // det = 1.75, Σ⁻¹ = [[1, -0.5], [-0.5, 2]] / 1.75
        let x = [0.0, 0.5];
        let d = [x[0] - 1.0, x[1] + 1.0];
        let q = (d[0] * d[0] - d[0] * d[1] + 2.0 * d[1] * d[1]) / 1.75;
        let exact = -LN_2PI - 0.5 * 1.75f64.ln() - 0.5 * q;
        assert!((g.logpdf(&x) - exact).abs() < 1e-14);
    }

    #[test]
    fn sampling_is_seeded() {
        let g = FiniteGMM::standard_normal(2);
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        assert_eq!(g.sample(10, &mut r1), g.sample(10, &mut r2));
    }
}
