use super::{Density, SecondMoment, SupportDescriptor, TailQuantities};
use crate::error::{invalid, Error, Result};
use crate::numeric::log_plus;
use crate::quadrature::{integrate_tail, integrate_with_breaks, Quadrature, QuadratureBudget, TailIntegral};

/// Break lists covering `[a, b] ∩ supp f` for a 1-D density, with the
/// density's own breakpoints and `extra` inserted.
pub fn integration_segments(f: &dyn Density, a: f64, b: f64, extra: &[f64]) -> Vec<Vec<f64>> {
    let mut inner: Vec<f64> = f.breakpoints();
    inner.extend_from_slice(extra);
    inner.sort_by(f64::total_cmp);
    let pieces: Vec<(f64, f64)> = match f.support() {
        SupportDescriptor::IntervalUnion(v) => v.iter().map(|&(l, r)| (l.max(a), r.min(b))).filter(|(l, r)| r > l).collect(),
        SupportDescriptor::Ball(r) => vec![(a.max(-r), b.min(r))],
        SupportDescriptor::FullSpace => vec![(a, b)],
    };
    pieces
        .into_iter()
        .filter(|(l, r)| r > l)
        .map(|(l, r)| {
            let mut br = vec![l];
            br.extend(inner.iter().copied().filter(|&x| x > l && x < r));
            br.push(r);
            br.dedup();
            br
        })
        .collect()
}

/// Integrates `h` over the support of a 1-D density.
///
/// Bounded supports use panels only; the full line adds doubling-shell tails
/// beyond a core whose radius is chosen from the tail envelope.
pub(crate) fn integrate_over_support<H: Fn(f64) -> f64>(
    f: &dyn Density,
    h: &H,
    extra_breaks: &[f64],
    budget: QuadratureBudget,
) -> Result<TailIntegral> {
    match f.support() {
        SupportDescriptor::FullSpace => {
            let t = core_radius(f, extra_breaks);
            let segs = integration_segments(f, -t, t, extra_breaks);
            let part = budget.split(3);
            let mut total = Quadrature::zero();
            for s in segs {
                total = total + integrate_with_breaks(h, &s, part)?;
            }
            for upward in [true, false] {
                match integrate_tail(h, if upward { t } else { -t }, upward, part)? {
                    TailIntegral::Converged(q) => total = total + q,
                    d @ TailIntegral::Diverging { .. } => return Ok(d),
                }
            }
            Ok(TailIntegral::Converged(total))
        }
        _ => {
            let segs = integration_segments(f, f64::NEG_INFINITY, f64::INFINITY, extra_breaks);
            let part = budget.split(segs.len());
            let mut total = Quadrature::zero();
            for s in segs {
                total = total + integrate_with_breaks(h, &s, part)?;
            }
            Ok(TailIntegral::Converged(total))
        }
    }
}

/// Smallest power of two whose envelope is below 1e-3, widened to cover
/// every breakpoint; at most 1024.
fn core_radius(f: &dyn Density, extra: &[f64]) -> f64 {
    let mut t = 1.0f64;
    while t < 1024.0 && f.tail_envelope(t).is_none_or(|e| e > 1e-3) {
        t *= 2.0;
    }
    let far = f
        .breakpoints()
        .iter()
        .chain(extra)
        .fold(0.0f64, |m, x| m.max(x.abs()));
    while t < far {
        t *= 2.0;
    }
    t
}

/// `∫ f` over the support.
pub fn total_mass(f: &dyn Density, budget: QuadratureBudget) -> Result<Quadrature> {
    if f.dim() != 1 {
        return Err(Error::Unsupported("numeric mass check is 1-D only".into()));
    }
    integrate_over_support(f, &|x| f.pdf(&[x]), &[], budget)?
        .converged()
        .ok_or_else(|| Error::DivergentIntegrand(format!("mass of {}", f.name())))
}

/// `(α_R, β_R, μ_{2,R})` with an attached error estimate.
pub fn tail_quantities(f: &dyn Density, r: f64, budget: QuadratureBudget) -> Result<TailQuantities> {
    if !(r > 0.0) {
        return Err(invalid("R", "must be positive"));
    }
    if let Some(t) = f.analytic_tails(r) {
        return Ok(t);
    }
    tail_quantities_quadrature(f, r, budget)
}

/// Tail quantities by 1-D quadrature, ignoring any closed form.
pub fn tail_quantities_quadrature(f: &dyn Density, r: f64, budget: QuadratureBudget) -> Result<TailQuantities> {
    if !(r > 0.0) {
        return Err(invalid("R", "must be positive"));
    }
    if f.dim() != 1 || f.tail_envelope(r).is_none() {
        return Err(Error::TailEnvelopeMissing(f.name()));
    }
    let part = budget.split(3);
    let alpha = outside_integral(f, r, &|x| f.pdf(&[x]), part)?
        .converged()
        .ok_or_else(|| Error::DivergentIntegrand(format!("tail mass of {}", f.name())))?;
    let beta = if f.sup_bound().is_some_and(|s| s <= 1.0) {
        Quadrature::zero()
    } else {
        outside_integral(
            f,
            r,
            &|x| {
                let v = f.pdf(&[x]);
                v * log_plus(v)
            },
            part,
        )?
        .converged()
        .ok_or_else(|| Error::DivergentIntegrand(format!("tail entropy of {}", f.name())))?
    };
    let (mu2, diverging) = match outside_integral(f, r, &|x| x * x * f.pdf(&[x]), part)? {
        TailIntegral::Converged(q) => (q, false),
        TailIntegral::Diverging { .. } => (
            Quadrature {
                value: f64::INFINITY,
                error: 0.0,
                n_evals: 0,
            },
            true,
        ),
    };
    Ok(TailQuantities {
        r,
        alpha: alpha.value.max(0.0),
        beta: beta.value.max(0.0),
        mu2: mu2.value.max(0.0),
        error: alpha.error + beta.error + mu2.error,
        mu2_diverging: diverging,
    })
}

/// `∫_{|x|>R} h` over the support of a 1-D density.
fn outside_integral<H: Fn(f64) -> f64>(f: &dyn Density, r: f64, h: &H, budget: QuadratureBudget) -> Result<TailIntegral> {
    match f.support() {
        SupportDescriptor::FullSpace => {
            let part = budget.split(4);
            let mut total = Quadrature::zero();
            for upward in [true, false] {
                let sign = if upward { 1.0 } else { -1.0 };
                // Finite stretch out to the farthest breakpoint, then shells.
                let far = f.breakpoints().iter().fold(r, |m, x| m.max(x.abs()));
                if far > r {
                    let mut br: Vec<f64> = vec![r];
                    br.extend(f.breakpoints().iter().map(|x| x * sign).filter(|&x| x > r && x < far));
                    br.push(far);
                    br.sort_by(f64::total_cmp);
                    total = total + integrate_with_breaks(&|x| h(sign * x), &br, part)?;
                }
                match integrate_tail(h, sign * far, upward, part)? {
                    TailIntegral::Converged(q) => total = total + q,
                    d => return Ok(d),
                }
            }
            Ok(TailIntegral::Converged(total))
        }
        _ => {
            let mut segs = integration_segments(f, f64::NEG_INFINITY, -r, &[]);
            segs.extend(integration_segments(f, r, f64::INFINITY, &[]));
            let part = budget.split(segs.len());
            let mut total = Quadrature::zero();
            for s in segs {
                total = total + integrate_with_breaks(h, &s, part)?;
            }
            Ok(TailIntegral::Converged(total))
        }
    }
}

/// `∫_{B_R} ‖x‖² dF`.
pub fn truncated_second_moment(f: &dyn Density, r: f64, budget: QuadratureBudget) -> Result<Quadrature> {
    if let (Some(t), SecondMoment::Finite(m)) = (f.analytic_tails(r), f.second_moment()) {
        return Ok(Quadrature {
            value: (m - t.mu2).max(0.0),
            error: 4.0 * f64::EPSILON * m,
            n_evals: 0,
        });
    }
    if f.dim() != 1 {
        return Err(Error::TailEnvelopeMissing(f.name()));
    }
    let segs = integration_segments(f, -r, r, &[]);
    let part = budget.split(segs.len());
    let mut total = Quadrature::zero();
    for s in segs {
        total = total + integrate_with_breaks(&|x| x * x * f.pdf(&[x]), &s, part)?;
    }
    Ok(total)
}
