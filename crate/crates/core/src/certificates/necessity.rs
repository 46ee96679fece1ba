use super::{Certificate, CertificateKind, Relation, Verdict};
use crate::densities::{truncated_second_moment, Density};
use crate::divergence::{kl_monte_carlo, kl_quadrature_1d, McConfig};
use crate::error::{invalid, Result};
use crate::gmm::{default_t0, log_exp_quadratic_moment, FiniteGMM, GaussComponent};
use crate::quadrature::QuadratureBudget;

#[derive(Debug, Clone, Copy)]
pub struct NecessityOptions {
    /// Bound level above which a still-increasing sequence counts as diverging.
    pub threshold: f64,
    /// Largest relative increment between the last two radii that counts as a plateau.
    pub plateau: f64,
    pub budget: QuadratureBudget,
    /// Used for the measured divergence when the target is not 1-D.
    pub mc: McConfig,
}

impl Default for NecessityOptions {
    fn default() -> Self {
        Self {
            threshold: 10.0,
            plateau: 1e-3,
            budget: QuadratureBudget::default(),
            mc: McConfig::new(200_000, 0),
        }
    }
}

/// Radii `10^{k/2}` from 1 up to `r_max`.
pub fn half_decade_grid(r_max: f64) -> Vec<f64> {
    (0..)
        .map(|k| 10f64.powf(0.5 * k as f64))
        .take_while(|&r| r <= r_max * (1.0 + 1e-12))
        .collect()
}

/// A five-component zero-mean mixture with variances up to 25, fitted by eye
/// to the Cauchy core and shoulders.
pub fn cauchy_hand_fit() -> FiniteGMM {
    let parts = [(0.38, 0.45), (0.27, 1.6), (0.15, 4.5), (0.12, 11.0), (0.08, 25.0)];
    FiniteGMM::new(
        parts
            .iter()
            .map(|&(w, v)| GaussComponent::isotropic(w, vec![0.0], v))
            .collect(),
    )
    .expect("weights sum to one")
}

/// Lower bounds `KL(f‖g) ≥ t0·∫_{B_R}‖x‖² dF − log ∫e^{t0‖x‖²}g` over `r_grid`.
///
/// Each bound is recorded against the directly measured divergence. When the
/// last bound exceeds the threshold and still grows, the verdict is
/// `diverges`: no finite divergence can sit above an unbounded sequence.
pub fn necessity_bound(f: &dyn Density, g: &FiniteGMM, r_grid: &[f64], opts: NecessityOptions) -> Result<Certificate> {
    if r_grid.len() < 2 || r_grid.windows(2).any(|w| !(w[0] < w[1])) || !(r_grid[0] > 0.0) {
        return Err(invalid("R_grid", "need at least two increasing positive radii"));
    }
    if f.dim() != g.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: f.dim(),
            got: g.dim(),
        });
    }
    let t0 = default_t0(g);
    let log_z = log_exp_quadratic_moment(g, t0)?;
    let kl = if f.dim() == 1 {
        kl_quadrature_1d(f, g, opts.budget)?
    } else {
        kl_monte_carlo(f, g, opts.mc)?
    };

    let mut cert = Certificate::new(CertificateKind::Necessity, format!("KL({} || {})", f.name(), g.name()));
    let mut bounds = Vec::with_capacity(r_grid.len());
    let mut errors = Vec::with_capacity(r_grid.len());
    let mut moments = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let m = truncated_second_moment(f, r, opts.budget)?;
        let bound = t0 * m.value - log_z;
        let err = t0 * m.error;
        cert.check(
            format!("lower bound at R={r} <= measured KL"),
            bound,
            Relation::Le,
            kl.value,
            3.0 * (kl.error + err),
        );
        moments.push(m.value);
        bounds.push(bound);
        errors.push(err);
    }
    cert.record("t0", t0);
    cert.record("log_z", log_z);
    cert.record("r_grid", r_grid);
    cert.record("truncated_second_moments", &moments);
    cert.record("lower_bounds", &bounds);
    cert.record("measured_kl", crate::numeric::fmt17(kl.value));
    cert.record("measured_kl_error", kl.error);
    cert.record("measured_kl_method", kl.method);
    cert.record("threshold", opts.threshold);
    if let Some(d) = &kl.diagnostic {
        cert.note(d.clone());
    }

    let n = bounds.len();
    let (last, prev) = (bounds[n - 1], bounds[n - 2]);
    let slack = errors[n - 1] + errors[n - 2];
    let r_last = r_grid[n - 1];
    if last > opts.threshold && last > prev + slack {
        cert.check(format!("lower bound at R={r_last} exceeds threshold"), last, Relation::Gt, opts.threshold, 0.0);
        cert.check(format!("lower bound still increasing at R={r_last}"), last, Relation::Gt, prev, slack);
        if cert.first_failure().is_none() {
            cert.verdict = Verdict::Diverges {
                witness: format!(
                    "lower bound reaches {} at R = {r_last} and is still increasing; the second moment of the target is not finite",
                    crate::numeric::fmt17(last)
                ),
            };
            return Ok(cert);
        }
    } else if kl.is_finite() {
        let scale = (t0 * moments[n - 1]).abs().max(f64::MIN_POSITIVE);
        cert.check(
            format!("lower bounds plateau at R={r_last}"),
            last - prev,
            Relation::Le,
            opts.plateau * scale,
            slack,
        );
    } else {
        cert.note("measured KL is infinite but the bounds have not crossed the threshold on this grid");
    }
    cert.conclude();
    Ok(cert)
}
