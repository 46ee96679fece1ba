//! Global approximation route for continuous, strictly positive targets with
//! finite positive entropy and finite second moment.
//!
//! Each index `m` picks a radius `R_m` from a geometric grid so that the five
//! tail conditions hold, approximates `f` on `B_{R_m}` by a lattice mixture
//! `h_m`, and mixes in a wide Gaussian:
//! `g_m = (1 − α)·h_m + α·N(0, R_m²·I)` with `α = α_{R_m}`.

mod compact;

pub use compact::{compact_uniform_approx, grid_extrema, CompactApprox, CompactOptions, Tolerance};

use serde::Serialize;

use crate::densities::{tail_quantities, tail_quantities_quadrature, Density, SecondMoment, TailQuantities};
use crate::divergence::{kl_monte_carlo, kl_quadrature_1d, log_ratio_profile, KLEstimate, LogRatioProfile, McConfig};
use crate::error::{invalid, Error, Result};
use crate::gmm::FiniteGMM;
use crate::numeric::{entropy_term, fmt17};
use crate::quadrature::QuadratureBudget;

/// Geometric radius grid `r0·ratio^k`, capped at `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusOptions {
    pub r0: f64,
    pub ratio: f64,
    /// Each radius exceeds the previous one by at least this factor minus one.
    pub growth: f64,
    pub r_max: f64,
}

impl Default for RadiusOptions {
    fn default() -> Self {
        Self {
            r0: 1.0,
            ratio: 2f64.powf(0.125),
            growth: 0.1,
            r_max: 1e4,
        }
    }
}

/// One evaluated inequality `lhs < rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    #[serde(with = "crate::json::extended")]
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl ConditionCheck {
    fn strict(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            lhs,
            rhs,
            holds: lhs < rhs,
        }
    }
}

/// The five radius conditions for index `m` in dimension `d`.
pub fn radius_conditions(t: &TailQuantities, m: u32, d: usize) -> Vec<ConditionCheck> {
    let cap = (-(m as f64) - 4.0).exp2();
    let r = t.r;
    let mu2 = if t.mu2_diverging { f64::INFINITY } else { t.mu2 };
    vec![
        ConditionCheck::strict("alpha", t.alpha, 0.25),
        ConditionCheck::strict("beta", t.beta, cap),
        ConditionCheck::strict("alpha_log_inv_alpha", entropy_term(t.alpha), cap),
        ConditionCheck::strict(
            "alpha_gaussian_normalizer",
            t.alpha * 0.5 * d as f64 * (2.0 * std::f64::consts::PI * r * r).ln(),
            cap,
        ),
        ConditionCheck::strict("second_moment_tail", mu2 / (2.0 * r * r), cap),
    ]
}

/// A radius with the tail quantities and conditions that admitted it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusChoice {
    pub m: u32,
    pub r: f64,
    pub tail: TailQuantities,
    pub conditions: Vec<ConditionCheck>,
}

/// Smallest grid radius `R ≥ max(1, (1 + growth)·previous)` meeting all five
/// conditions for index `m`.
pub fn select_radius(
    f: &dyn Density,
    m: u32,
    previous: Option<f64>,
    opts: RadiusOptions,
    budget: QuadratureBudget,
) -> Result<RadiusChoice> {
    if m == 0 {
        return Err(invalid("m", "indices start at 1"));
    }
    if !(opts.r0 > 0.0 && opts.ratio > 1.0) {
        return Err(invalid("radius grid", "need r0 > 0 and ratio > 1"));
    }
    let floor = previous.map_or(1.0, |p| (p * (1.0 + opts.growth)).max(1.0));
    let mut k = ((floor / opts.r0).ln() / opts.ratio.ln()).ceil().max(0.0) as i32;
    // Guard against the rounding in the logarithm.
    while k > 0 && opts.r0 * opts.ratio.powi(k - 1) >= floor {
        k -= 1;
    }
    loop {
        let r = opts.r0 * opts.ratio.powi(k);
        if r > opts.r_max {
            return Err(Error::ScheduleInfeasible {
                r_max: opts.r_max,
                reason: format!("conditions for m = {m} fail at every grid radius in [{floor}, {}]", opts.r_max),
            });
        }
        if r >= floor {
            let tail = tail_quantities(f, r, budget)?;
            if tail.mu2_diverging {
                return Err(Error::ScheduleInfeasible {
                    r_max: opts.r_max,
                    reason: format!(
                        "the tail second moment diverges at R = {r}, so it diverges at every radius and \
                         the condition μ₂/(2R²) < 2^(−m−4) can never hold"
                    ),
                });
            }
            let conditions = radius_conditions(&tail, m, f.dim());
            if conditions.iter().all(|c| c.holds) {
                return Ok(RadiusChoice { m, r, tail, conditions });
            }
        }
        k += 1;
    }
}

/// Re-evaluates the five conditions at `r` with tail quantities from direct
/// quadrature (1-D only; closed forms are bypassed).
pub fn reverify_conditions(f: &dyn Density, m: u32, r: f64, budget: QuadratureBudget) -> Result<Vec<ConditionCheck>> {
    let t = tail_quantities_quadrature(f, r, budget)?;
    Ok(radius_conditions(&t, m, f.dim()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyOptions {
    pub radius: RadiusOptions,
    pub compact: CompactOptions,
    /// The infimum of `f` on the ball is taken as this factor times the grid minimum.
    pub inf_safety: f64,
    pub budget: QuadratureBudget,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self {
            radius: RadiusOptions::default(),
            compact: CompactOptions::default(),
            inf_safety: 0.9,
            budget: QuadratureBudget::default(),
        }
    }
}

/// `g_m` with the ingredients and bound components of its construction.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyApproximant {
    pub m: u32,
    pub radius: RadiusChoice,
    /// Lower bound `m_m` used for the infimum of `f` on `B_{R_m}`.
    pub inf_f: f64,
    /// `2^(−m−3)·m_m`.
    pub eta_m: f64,
    /// Relative tolerance `2^(−m−3)` enforced on the ball.
    pub rho: f64,
    pub compact: CompactApprox,
    #[serde(skip)]
    pub g: FiniteGMM,
    /// `2^(−m−2) + 2α`.
    pub compact_bound: f64,
    /// `β + α·log(1/α) + α·(d/2)·log(2πR²) + μ₂/(2R²)`.
    pub tail_bound: f64,
    pub total_bound: f64,
    /// `min h_m ≥ m_m/2` on the verification grid.
    pub h_lower_holds: bool,
}

impl EntropyApproximant {
    pub fn h(&self) -> &FiniteGMM {
        &self.compact.h
    }
}

fn grid_step(d: usize, r: f64) -> f64 {
    2.0 * r / if d == 1 { 4096.0 } else { 512.0 }
}

/// Builds `g_m` at the radius already chosen for index `m`.
pub fn build_entropy_approximant(f: &dyn Density, radius: RadiusChoice, opts: EntropyOptions) -> Result<EntropyApproximant> {
    let (m, r, d) = (radius.m, radius.r, f.dim());
    let (grid_min, _) = grid_extrema(f, r, grid_step(d, r))?;
    let inf_f = opts.inf_safety * grid_min;
    if !(inf_f > 1e-300) {
        return Err(Error::InfimumTooSmall(inf_f));
    }
    let rho = (-(m as f64) - 3.0).exp2();
    let compact = compact_uniform_approx(f, r, Tolerance::Relative(rho), opts.compact)?;
    let alpha = radius.tail.alpha;
    let wide = FiniteGMM::isotropic_gaussian(vec![0.0; d], r * r)?;
    let g = FiniteGMM::convex_combination(&[(1.0 - alpha, &compact.h), (alpha, &wide)])?;
    let compact_bound = (-(m as f64) - 2.0).exp2() + 2.0 * alpha;
    let tail_bound = radius.conditions[1..].iter().map(|c| c.lhs).sum::<f64>();
    Ok(EntropyApproximant {
        m,
        inf_f,
        eta_m: rho * inf_f,
        rho,
        h_lower_holds: compact.h_min >= 0.5 * inf_f,
        compact,
        g,
        compact_bound,
        tail_bound,
        total_bound: compact_bound + tail_bound,
        radius,
    })
}

/// One line of the schedule table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub m: u32,
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu2: f64,
    pub eta_m: f64,
    pub components: usize,
    pub bound: f64,
    pub measured_l: f64,
    pub se_l: f64,
    pub kl: KLEstimate,
}

/// Output of [`entropy_schedule`].
#[derive(Debug, Clone, Serialize)]
pub struct EntropyRun {
    pub target: String,
    pub approximants: Vec<EntropyApproximant>,
    pub rows: Vec<ScheduleRow>,
    pub profile: LogRatioProfile,
    /// Conditions recomputed from direct quadrature, per index (1-D targets).
    pub reverified: Vec<Vec<ConditionCheck>>,
    /// `max |f/g − 1|` of the last approximant over the probe grid.
    pub final_ratio_deviation: f64,
}

/// Thresholds `M` of the log-ratio tail table.
pub const PROFILE_THRESHOLDS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Probe grid for the pointwise ratio check.
pub fn ratio_probe_points(d: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..=24).map(|i| -3.0 + 0.25 * i as f64).collect();
    if d == 1 {
        axis.iter().map(|&x| vec![x]).collect()
    } else {
        axis.iter()
            .step_by(2)
            .flat_map(|&x| axis.iter().step_by(2).map(move |&y| vec![x, y]))
            .collect()
    }
}

/// Builds `g_1..g_{m_max}` and measures `∫L_m dF` and `KL(f‖g_m)` for each.
///
/// Rejects targets with infinite second moment up front: no finite mixture
/// reaches finite divergence from them.
pub fn entropy_schedule(f: &dyn Density, m_max: u32, opts: EntropyOptions, mc: McConfig) -> Result<EntropyRun> {
    if m_max == 0 {
        return Err(invalid("m_max", "must be at least 1"));
    }
    if f.second_moment() == SecondMoment::Infinite {
        return Err(Error::ScheduleInfeasible {
            r_max: opts.radius.r_max,
            reason: format!(
                "{} has infinite second moment; for any finite Gaussian mixture g the bound \
                 KL(f‖g) ≥ t0·∫_(B_R)‖x‖² dF − log E_g exp(t0‖X‖²) grows without limit in R, \
                 so KL(f‖g) = ∞ and no approximating sequence exists",
                f.name()
            ),
        });
    }
    let reg = f.regularity();
    if !(reg.continuous && reg.strictly_positive) {
        return Err(Error::Unsupported(format!(
            "{} is not continuous and strictly positive; use the piecewise route",
            f.name()
        )));
    }
    let mut approximants = Vec::with_capacity(m_max as usize);
    let mut previous = None;
    for m in 1..=m_max {
        let radius = select_radius(f, m, previous, opts.radius, opts.budget)?;
        previous = Some(radius.r);
        approximants.push(build_entropy_approximant(f, radius, opts)?);
    }
    let gs: Vec<FiniteGMM> = approximants.iter().map(|a| a.g.clone()).collect();
    let profile = log_ratio_profile(f, &gs, &PROFILE_THRESHOLDS, mc)?;
    let mut rows = Vec::with_capacity(gs.len());
    let mut reverified = Vec::new();
    for (a, p) in approximants.iter().zip(&profile.rows) {
        let kl = if f.dim() == 1 {
            kl_quadrature_1d(f, &a.g, opts.budget)?
        } else {
            kl_monte_carlo(f, &a.g, mc)?
        };
        if f.dim() == 1 {
            reverified.push(reverify_conditions(f, a.m, a.radius.r, opts.budget)?);
        }
        let t = &a.radius.tail;
        rows.push(ScheduleRow {
            m: a.m,
            r: a.radius.r,
            alpha: t.alpha,
            beta: t.beta,
            mu2: t.mu2,
            eta_m: a.eta_m,
            components: a.g.len(),
            bound: a.total_bound,
            measured_l: p.mean_l,
            se_l: p.se_l,
            kl,
        });
    }
    let last = &approximants[approximants.len() - 1].g;
    let final_ratio_deviation = ratio_probe_points(f.dim())
        .iter()
        .map(|x| (f.ln_pdf(x) - last.logpdf(x)).exp_m1().abs())
        .fold(0.0, f64::max);
    Ok(EntropyRun {
        target: f.name(),
        approximants,
        rows,
        profile,
        reverified,
        final_ratio_deviation,
    })
}

/// `m,R_m,alpha,beta,mu2,eta_m,components,bound,measured_L,measured_KL`.
pub fn schedule_csv(rows: &[ScheduleRow]) -> String {
    let mut out = String::from("m,R_m,alpha,beta,mu2,eta_m,components,bound,measured_L,measured_KL\n");
    for r in rows {
        let cells = [
            r.m.to_string(),
            fmt17(r.r),
            fmt17(r.alpha),
            fmt17(r.beta),
            fmt17(r.mu2),
            fmt17(r.eta_m),
            r.components.to_string(),
            fmt17(r.bound),
            fmt17(r.measured_l),
            fmt17(r.kl.value),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{Cauchy, Laplace, Normal};
    use crate::numeric::normal_sf;

    #[test]
    fn first_radius_for_normal_is_smallest_admissible() {
        let f = Normal::standard(1);
        let opts = RadiusOptions::default();
        let c = select_radius(&f, 1, None, opts, QuadratureBudget::default()).unwrap();
        assert!(c.conditions.iter().all(|x| x.holds));
        // The previous grid radius fails at least one condition.
        let prev = c.r / opts.ratio;
        if prev >= 1.0 {
            let t = f.analytic_tails(prev).unwrap();
            assert!(radius_conditions(&t, 1, 1).iter().any(|x| !x.holds));
        }
        assert!((c.tail.alpha - 2.0 * normal_sf(c.r)).abs() < 1e-16);
    }

    #[test]
    fn radii_increase_with_margin() {
        let f = Laplace;
        let a = select_radius(&f, 1, None, RadiusOptions::default(), QuadratureBudget::default()).unwrap();
        let b = select_radius(&f, 2, Some(a.r), RadiusOptions::default(), QuadratureBudget::default()).unwrap();
        assert!(b.r >= 1.1 * a.r);
    }

    #[test]
    fn cauchy_schedule_is_infeasible() {
        let e = select_radius(&Cauchy, 1, None, RadiusOptions::default(), QuadratureBudget::default());
        assert!(matches!(e, Err(Error::ScheduleInfeasible { .. })));
        let e = entropy_schedule(&Cauchy, 2, EntropyOptions::default(), McConfig::new(1000, 1));
        assert!(matches!(e, Err(Error::ScheduleInfeasible { reason, .. }) if reason.contains("second moment")));
    }

    #[test]
    fn approximant_structure() {
        let f = Normal::standard(1);
        let opts = EntropyOptions::default();
        let rc = select_radius(&f, 3, None, opts.radius, opts.budget).unwrap();
        let a = build_entropy_approximant(&f, rc, opts).unwrap();
        let w = a.g.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let last = a.g.components().last().unwrap();
        assert_eq!(last.cov[0], a.radius.r * a.radius.r);
        assert!(a.compact.sup_rel_error < a.rho);
        assert!(a.h_lower_holds);
        assert!(a.total_bound <= 0.0625 + 2.0 * a.radius.tail.alpha + 0.03125);
    }

    #[test]
    fn reverification_matches() {
        let f = Laplace;
        let rc = select_radius(&f, 2, None, RadiusOptions::default(), QuadratureBudget::default()).unwrap();
        let again = reverify_conditions(&f, 2, rc.r, QuadratureBudget::default()).unwrap();
        for (a, b) in rc.conditions.iter().zip(&again) {
            assert!(b.holds);
            assert!((a.lhs - b.lhs).abs() <= 1e-9 * a.lhs.max(1e-3));
        }
    }
}
