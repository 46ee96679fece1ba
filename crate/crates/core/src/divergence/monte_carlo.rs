use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{KLEstimate, KlMethod};
use crate::densities::Density;
use crate::error::{invalid, Result};
use crate::gmm::FiniteGMM;
use crate::numeric::NeumaierSum;

/// Sample size, seed and worker count for Monte Carlo estimates.
///
/// Worker `i` draws from ChaCha8 seeded with `seed` on stream `i`, so results
/// are reproducible for a fixed worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub n: usize,
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, seed, workers: 4 }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self {
            workers: workers.max(1),
            ..self
        }
    }
}

/// `n` points from `F`, flattened (`n × dim`), in worker order.
pub fn sample_points(f: &dyn Density, cfg: McConfig) -> Vec<f64> {
    let d = f.dim();
    let w = cfg.workers.max(1);
    let chunks: Vec<Vec<f64>> = (0..w)
        .into_par_iter()
        .map(|i| {
            let count = cfg.n / w + usize::from(i < cfg.n % w);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let mut out = vec![0.0; count * d];
            for p in out.chunks_mut(d) {
                f.sample(&mut rng, p);
            }
            out
        })
        .collect();
    chunks.concat()
}

/// Mean and standard error with compensated sums.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().copied().collect::<NeumaierSum>().value() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).collect::<NeumaierSum>().value();
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Sample mean of `log f(X) − log g(X)` under `X ~ F`.
pub fn kl_monte_carlo(f: &dyn Density, g: &FiniteGMM, cfg: McConfig) -> Result<KLEstimate> {
    if cfg.n < 100 {
        return Err(invalid("n", "need at least 100 samples"));
    }
    if f.dim() != g.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: f.dim(),
            got: g.dim(),
        });
    }
    let d = f.dim();
    let pts = sample_points(f, cfg);
    let vals: Vec<f64> = pts.par_chunks(d).map(|x| f.ln_pdf(x) - g.logpdf(x)).collect();
    let (mean, se) = mean_se(&vals);
    Ok(KLEstimate {
        value: mean,
        method: KlMethod::MonteCarlo,
        error: se,
        n_evals: cfg.n,
        diagnostic: None,
    })
}

/// Per-approximant row of the uniform-integrability table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub index: usize,
    /// Estimate of `∫ L dF`, `L = log₊(f/g)`.
    pub mean_l: f64,
    pub se_l: f64,
    /// `∫_{L>M} L dF` per threshold `M`.
    pub tails: Vec<f64>,
    pub tail_se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRatioProfile {
    pub thresholds: Vec<f64>,
    pub rows: Vec<ProfileRow>,
    pub n: usize,
    pub seed: u64,
    pub workers: usize,
}

impl LogRatioProfile {
    /// `sup_m tail(m, M)` at threshold index `k`, with the matching SE.
    pub fn sup_tail(&self, k: usize) -> (f64, f64) {
        self.rows
            .iter()
            .map(|r| (r.tails[k], r.tail_se[k]))
            .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a })
    }
}

/// `L_m = log₊(f/g_m)` on one common seeded sample from `F`.
pub fn log_ratio_profile(f: &dyn Density, gs: &[FiniteGMM], thresholds: &[f64], cfg: McConfig) -> Result<LogRatioProfile> {
    if cfg.n < 100 {
        return Err(invalid("n", "need at least 100 samples"));
    }
    let d = f.dim();
    let pts = sample_points(f, cfg);
    let lf: Vec<f64> = pts.par_chunks(d).map(|x| f.ln_pdf(x)).collect();
    let mut rows = Vec::with_capacity(gs.len());
    for (m, g) in gs.iter().enumerate() {
        let l: Vec<f64> = pts
            .par_chunks(d)
            .zip(lf.par_iter())
            .map(|(x, &a)| (a - g.logpdf(x)).max(0.0))
            .collect();
        let (mean_l, se_l) = mean_se(&l);
        let mut tails = Vec::with_capacity(thresholds.len());
        let mut tail_se = Vec::with_capacity(thresholds.len());
        for &t in thresholds {
            let cut: Vec<f64> = l.iter().map(|&v| if v > t { v } else { 0.0 }).collect();
            let (m_t, s_t) = mean_se(&cut);
            tails.push(m_t);
            tail_se.push(s_t);
        }
        rows.push(ProfileRow {
            index: m + 1,
            mean_l,
            se_l,
            tails,
            tail_se,
        });
    }
    Ok(LogRatioProfile {
        thresholds: thresholds.to_vec(),
        rows,
        n: cfg.n,
        seed: cfg.seed,
        workers: cfg.workers,
    })
}
