use rayon::prelude::*;
use serde::Serialize;

use crate::densities::Density;
use crate::error::{invalid, Error, Result};
use crate::gmm::{FiniteGMM, GaussComponent};

/// Pointwise tolerance for `|h − f|` on the ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum Tolerance {
    /// `|h(x) − f(x)| < eta`.
    Absolute(f64),
    /// `|h(x) − f(x)| < rho·f(x)`.
    Relative(f64),
}

impl Tolerance {
    fn value(&self) -> f64 {
        match *self {
            Tolerance::Absolute(v) | Tolerance::Relative(v) => v,
        }
    }

    #[inline]
    fn allowed(&self, fx: f64) -> f64 {
        match *self {
            Tolerance::Absolute(eta) => eta,
            Tolerance::Relative(rho) => rho * fx,
        }
    }
}

/// Knobs of the smoothing construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompactOptions {
    /// Initial bandwidth; `R/8` when unset.
    pub sigma0: Option<f64>,
    pub max_halvings: u32,
    /// Nodes cover `B_{R + node_margin·σ}`.
    pub node_margin: f64,
    /// Verification spacing in units of `σ`.
    pub verify_step: f64,
}

impl Default for CompactOptions {
    fn default() -> Self {
        Self {
            sigma0: None,
            max_halvings: 12,
            node_margin: 6.0,
            verify_step: 0.25,
        }
    }
}

/// A compact approximation together with its measured errors.
#[derive(Debug, Clone, Serialize)]
pub struct CompactApprox {
    #[serde(skip)]
    pub h: FiniteGMM,
    pub radius: f64,
    pub tolerance: Tolerance,
    pub sigma: f64,
    pub halvings: u32,
    pub components: usize,
    /// `max |h − f|` over the verification grid.
    pub sup_abs_error: f64,
    /// `max |h − f| / f` over grid points with `f > 0`.
    pub sup_rel_error: f64,
    pub h_min: f64,
    pub f_min: f64,
    pub verification_points: usize,
}

/// Uniform grid over `B_R` (segment in 1-D, disk in 2-D) plus the boundary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BallGrid {
    dim: usize,
    r: f64,
    n: usize,
    circle: usize,
}

impl BallGrid {
    pub(crate) fn new(dim: usize, r: f64, step: f64) -> Self {
        let n = ((2.0 * r / step).ceil() as usize).max(2) + 1;
        let circle = if dim == 2 {
            ((2.0 * std::f64::consts::PI * r / step).ceil() as usize).max(8)
        } else {
            0
        };
        Self { dim, r, n, circle }
    }

    pub(crate) fn len(&self) -> usize {
        if self.dim == 1 {
            self.n
        } else {
            self.n * self.n + self.circle
        }
    }

    fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.r
        } else {
            -self.r + 2.0 * self.r * i as f64 / (self.n - 1) as f64
        }
    }

    /// Point `i`, or `None` when a square-grid point falls outside the disk.
    #[inline]
    pub(crate) fn point(&self, i: usize) -> Option<[f64; 2]> {
        if self.dim == 1 {
            return Some([self.coord(i), 0.0]);
        }
        if i >= self.n * self.n {
            let t = 2.0 * std::f64::consts::PI * (i - self.n * self.n) as f64 / self.circle as f64;
            return Some([self.r * t.cos(), self.r * t.sin()]);
        }
        let p = [self.coord(i / self.n), self.coord(i % self.n)];
        (p[0] * p[0] + p[1] * p[1] <= self.r * self.r).then_some(p)
    }
}

fn check_dim(f: &dyn Density) -> Result<usize> {
    match f.dim() {
        d @ (1 | 2) => Ok(d),
        d => Err(Error::Unsupported(format!("compact approximation supports d ≤ 2, got d = {d}"))),
    }
}

/// Breakpoints of a 1-D density inside `[−r, r]`.
fn inner_breaks(f: &dyn Density, r: f64) -> Vec<f64> {
    if f.dim() != 1 {
        return Vec::new();
    }
    f.breakpoints().into_iter().filter(|x| x.abs() <= r).collect()
}

/// `(min f, max f)` over a grid of `B_R` with the given spacing, breakpoints
/// included.
pub fn grid_extrema(f: &dyn Density, r: f64, step: f64) -> Result<(f64, f64)> {
    let d = check_dim(f)?;
    let grid = BallGrid::new(d, r, step);
    let (lo, hi) = (0..grid.len())
        .into_par_iter()
        .filter_map(|i| grid.point(i))
        .map(|p| {
            let v = f.pdf(&p[..d]);
            (v, v)
        })
        .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    Ok(inner_breaks(f, r)
        .iter()
        .map(|&x| f.pdf(&[x]))
        .fold((lo, hi), |a, v| (a.0.min(v), a.1.max(v))))
}

/// Shared-bandwidth lattice mixture: nodes at multiples of `σ` inside
/// `B_{R + margin·σ}` with weights `f(xᵢ)·σ^d`, renormalized.
fn smoothed_lattice(f: &dyn Density, d: usize, r: f64, sigma: f64, margin: f64) -> Result<FiniteGMM> {
    let reach = r + margin * sigma;
    let k = (reach / sigma).floor() as i64;
    let var = sigma * sigma;
    let cell = sigma.powi(d as i32);
    let comps: Vec<GaussComponent> = if d == 1 {
        (-k..=k)
            .into_par_iter()
            .filter_map(|i| {
                let x = i as f64 * sigma;
                let w = f.pdf(&[x]) * cell;
                (w > 0.0).then(|| GaussComponent::isotropic(w, vec![x], var))
            })
            .collect()
    } else {
        (-k..=k)
            .into_par_iter()
            .flat_map_iter(|i| {
                (-k..=k).filter_map(move |j| {
                    let p = [i as f64 * sigma, j as f64 * sigma];
                    if p[0] * p[0] + p[1] * p[1] > reach * reach {
                        return None;
                    }
                    let w = f.pdf(&p) * cell;
                    (w > 0.0).then(|| GaussComponent::isotropic(w, p.to_vec(), var))
                })
            })
            .collect()
    };
    normalize(comps)
}

fn normalize(mut comps: Vec<GaussComponent>) -> Result<FiniteGMM> {
    let total: f64 = comps.iter().map(|c| c.weight).collect::<crate::numeric::NeumaierSum>().value();
    if !(total > 0.0) {
        return Err(invalid("f", "density vanishes at every lattice node"));
    }
    for c in &mut comps {
        c.weight /= total;
    }
    FiniteGMM::new(comps)
}

#[derive(Debug, Clone, Copy)]
struct Measured {
    abs: f64,
    rel: f64,
    /// `max |h − f| / allowed`; below 1 means the tolerance holds.
    excess: f64,
    h_min: f64,
    f_min: f64,
}

impl Measured {
    const START: Self = Self {
        abs: 0.0,
        rel: 0.0,
        excess: 0.0,
        h_min: f64::INFINITY,
        f_min: f64::INFINITY,
    };

    fn merge(a: Self, b: Self) -> Self {
        Self {
            abs: a.abs.max(b.abs),
            rel: a.rel.max(b.rel),
            excess: a.excess.max(b.excess),
            h_min: a.h_min.min(b.h_min),
            f_min: a.f_min.min(b.f_min),
        }
    }

    fn at(f: &dyn Density, h: &FiniteGMM, x: &[f64], tol: Tolerance) -> Self {
        let fx = f.pdf(x);
        let hx = h.pdf(x);
        let err = (hx - fx).abs();
        let allowed = tol.allowed(fx);
        Self {
            abs: err,
            rel: if fx > 0.0 { err / fx } else if err > 0.0 { f64::INFINITY } else { 0.0 },
            excess: if allowed > 0.0 { err / allowed } else { f64::INFINITY },
            h_min: hx,
            f_min: fx,
        }
    }
}

/// Sup-norm comparison of `h` against `f` on the verification grid.
fn measure(f: &dyn Density, h: &FiniteGMM, r: f64, step: f64, tol: Tolerance) -> (Measured, usize) {
    let d = f.dim();
    let grid = BallGrid::new(d, r, step);
    let on_grid = (0..grid.len())
        .into_par_iter()
        .filter_map(|i| grid.point(i))
        .map(|p| (Measured::at(f, h, &p[..d], tol), 1usize))
        .reduce(|| (Measured::START, 0), |a, b| (Measured::merge(a.0, b.0), a.1 + b.1));
    inner_breaks(f, r)
        .iter()
        .fold(on_grid, |acc, &x| (Measured::merge(acc.0, Measured::at(f, h, &[x], tol)), acc.1 + 1))
}

/// Builds `h ∈ M` with `|h − f| < tol` on a verification grid of `B_R`.
///
/// The bandwidth starts at `sigma0` and is halved until the grid check
/// passes; the verification spacing is `verify_step·σ`, so it tightens with
/// the bandwidth.
pub fn compact_uniform_approx(f: &dyn Density, r: f64, tol: Tolerance, opts: CompactOptions) -> Result<CompactApprox> {
    let d = check_dim(f)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("R", "must be positive and finite"));
    }
    if !(tol.value() > 0.0) {
        return Err(invalid("tolerance", "must be positive"));
    }
    let sigma0 = opts.sigma0.unwrap_or(r / 8.0);
    if !(sigma0 > 0.0) {
        return Err(invalid("sigma0", "must be positive"));
    }

    if let Tolerance::Absolute(eta) = tol {
        // A flat wide Gaussian already meets a tolerance above sup f.
        let (_, f_max) = grid_extrema(f, r, sigma0 * opts.verify_step)?;
        if f_max < eta {
            let sigma = r.max(((2.0 / eta).powf(2.0 / d as f64) / (2.0 * std::f64::consts::PI)).sqrt());
            let h = FiniteGMM::isotropic_gaussian(vec![0.0; d], sigma * sigma)?;
            let (m, n) = measure(f, &h, r, sigma0 * opts.verify_step, tol);
            if m.excess < 1.0 {
                return Ok(finish(h, r, tol, sigma, 0, m, n));
            }
        }
    }

    let mut best = f64::INFINITY;
    let mut sigma = sigma0;
    for halvings in 0..=opts.max_halvings {
        let h = smoothed_lattice(f, d, r, sigma, opts.node_margin)?;
        let (m, n) = measure(f, &h, r, sigma * opts.verify_step, tol);
        if m.excess < 1.0 {
            return Ok(finish(h, r, tol, sigma, halvings, m, n));
        }
        best = best.min(match tol {
            Tolerance::Absolute(_) => m.abs,
            Tolerance::Relative(_) => m.rel,
        });
        sigma *= 0.5;
    }
    Err(Error::ToleranceUnreachable {
        requested: tol.value(),
        best,
    })
}

fn finish(h: FiniteGMM, r: f64, tol: Tolerance, sigma: f64, halvings: u32, m: Measured, n: usize) -> CompactApprox {
    CompactApprox {
        components: h.len(),
        h,
        radius: r,
        tolerance: tol,
        sigma,
        halvings,
        sup_abs_error: m.abs,
        sup_rel_error: m.rel,
        h_min: m.h_min,
        f_min: m.f_min,
        verification_points: n,
    }
}
