use rayon::prelude::*;

use super::{Certificate, CertificateKind, Relation, Verdict};
use crate::densities::{tails::integrate_over_support, Density, SecondMoment, UniformOnUnion};
use crate::divergence::{sample_points, McConfig};
use crate::error::{invalid, Error, Result};
use crate::numeric::{fmt17, log_plus, NeumaierSum};
use crate::quadrature::{QuadratureBudget, TailIntegral};
use crate::support::{union_pieces, PieceSpec};

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `∫ f log₊f` with its error; exactly zero when `sup f ≤ 1`.
fn positive_entropy(f: &dyn Density, budget: QuadratureBudget) -> Result<(f64, f64, &'static str)> {
    if f.sup_bound().is_some_and(|s| s <= 1.0) {
        return Ok((0.0, 0.0, "sup f <= 1, so log+ f vanishes"));
    }
    if f.dim() != 1 {
        return Err(Error::Unsupported(format!("positive entropy of `{}` needs a 1-D target or sup f <= 1", f.name())));
    }
    let h = |x: f64| {
        let v = f.pdf(&[x]);
        v * log_plus(v)
    };
    Ok(match integrate_over_support(f, &h, &[], budget)? {
        TailIntegral::Converged(q) => (q.value, q.error, "quadrature"),
        TailIntegral::Diverging { .. } => (f64::INFINITY, 0.0, "quadrature tail does not converge"),
    })
}

/// Membership in the finite log-moment class: continuity and strict
/// positivity from the catalog metadata, `∫ f log₊f` by quadrature.
pub fn check_ent(f: &dyn Density, budget: QuadratureBudget) -> Result<Certificate> {
    let reg = f.regularity();
    let mut cert = Certificate::new(CertificateKind::Membership, format!("{} in finite log-moment class", f.name()));
    cert.check("continuous (catalog metadata)", flag(reg.continuous), Relation::Ge, 1.0, 0.0);
    cert.check("strictly positive (catalog metadata)", flag(reg.strictly_positive), Relation::Ge, 1.0, 0.0);
    let (value, error, method) = positive_entropy(f, budget)?;
    cert.check("integral of f log+ f is finite", value, Relation::Lt, f64::INFINITY, 0.0);
    cert.record("positive_entropy", fmt17(value));
    cert.record("positive_entropy_error", error);
    cert.record("method", method);
    cert.conclude();
    Ok(cert)
}

/// `inf f` over `[s, s + r]`: zero when the interval leaves an interval-union
/// support, otherwise the minimum over a 257-point grid and the breakpoints.
fn interval_inf(f: &dyn Density, support: Option<&[(f64, f64)]>, breaks: &[f64], s: f64, r: f64) -> f64 {
    let e = s + r;
    if let Some(iv) = support {
        let i = iv.partition_point(|p| p.1 < s);
        if i == iv.len() || iv[i].0 > s || iv[i].1 < e {
            return 0.0;
        }
    }
    const GRID: usize = 256;
    let mut lo = f64::INFINITY;
    for k in 0..=GRID {
        let x = if k == GRID { e } else { s + r * (k as f64 / GRID as f64) };
        lo = lo.min(f.pdf(&[x]));
    }
    let a = breaks.partition_point(|&b| b <= s);
    for &b in breaks[a..].iter().take_while(|&&b| b < e) {
        lo = lo.min(f.pdf(&[b]));
    }
    lo
}

/// `D_r(y)` minimized over 65 placements of a length-`r` interval through `y`.
fn best_oscillation(f: &dyn Density, support: Option<&[(f64, f64)]>, breaks: &[f64], y: f64, r: f64) -> f64 {
    const OFFSETS: usize = 64;
    let fy = f.pdf(&[y]);
    let best = (0..=OFFSETS)
        .map(|k| interval_inf(f, support, breaks, y - r * (k as f64 / OFFSETS as f64), r))
        .fold(0.0f64, f64::max);
    if best > 0.0 {
        (fy.ln() - best.ln()).max(0.0)
    } else {
        f64::INFINITY
    }
}

/// Probes the fixed-scale oscillation condition at scale `r`.
///
/// For points `y` drawn from `F`, `D_r(y) = log(f(y)/inf_C f)` is taken over
/// the best length-`r` interval `C ∋ y`. If some probe admits no interval
/// on which `f` stays positive, the verdict fails and the support interval
/// around that probe is the witness.
pub fn check_fssa_scale(f: &dyn Density, r: f64, probe_n: usize, seed: u64) -> Result<Certificate> {
    if f.dim() != 1 {
        return Err(Error::Unsupported("fixed-scale probing is 1-D only".into()));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", "must be positive and finite"));
    }
    if probe_n == 0 {
        return Err(invalid("probe_n", "must be positive"));
    }
    let support = f.support();
    let intervals = support.intervals();
    let mut breaks = f.breakpoints();
    breaks.sort_by(f64::total_cmp);
    let probes = sample_points(f, McConfig::new(probe_n, seed));
    let d: Vec<f64> = probes
        .par_iter()
        .map(|&y| best_oscillation(f, intervals, &breaks, y, r))
        .collect();

    let infinite = d.iter().filter(|v| v.is_infinite()).count();
    let mut cert = Certificate::new(CertificateKind::Membership, format!("{} fixed-scale oscillation at r = {r}", f.name()));
    cert.record("r", r);
    cert.record("probe_n", probe_n);
    cert.record("seed", seed);
    cert.record("probes_without_positive_interval", infinite);
    cert.check("probes with D_r = inf", infinite as f64, Relation::Le, 0.0, 0.0);
    if infinite > 0 {
        let y = d.iter().zip(&probes).find(|(v, _)| v.is_infinite()).map(|(_, &y)| y).expect("counted above");
        let witness = match intervals.and_then(|iv| iv.iter().find(|p| p.0 <= y && y <= p.1)) {
            Some(&(a, b)) => {
                cert.record("witness_interval", [a, b]);
                format!(
                    "probe y = {} lies in support interval [{}, {}] of length {} < r, so every length-r interval through y leaves the support",
                    fmt17(y),
                    fmt17(a),
                    fmt17(b),
                    fmt17(b - a)
                )
            }
            None => format!("probe y = {}: f vanishes on every length-r interval through y", fmt17(y)),
        };
        cert.verdict = Verdict::Fails { witness: Some(witness) };
        return Ok(cert);
    }
    let mean = d.iter().copied().collect::<NeumaierSum>().value() / d.len() as f64;
    let max = d.iter().copied().fold(0.0, f64::max);
    let var = d.iter().map(|v| (v - mean) * (v - mean)).collect::<NeumaierSum>().value() / d.len() as f64;
    cert.check("empirical integral of D_r dF is finite", mean, Relation::Lt, f64::INFINITY, 0.0);
    cert.record("oscillation_mean", mean);
    cert.record("oscillation_se", (var / d.len() as f64).sqrt());
    cert.record("oscillation_max", max);
    cert.conclude();
    Ok(cert)
}

/// Countable-scale membership of a uniform interval-union density with one
/// piece per interval and witness scale `r_ℓ = |Y_ℓ|/4`.
pub fn check_cssa_union(f: &UniformOnUnion) -> Certificate {
    let pieces = union_pieces(f);
    let mut cert = Certificate::new(CertificateKind::Membership, format!("{} in countable-scale class", f.name()));
    let total_p = pieces.iter().map(|s| s.p).collect::<NeumaierSum>().value();
    cert.check("piece masses sum to one", (total_p - 1.0).abs(), Relation::Le, 0.0, 1e-12);
    let max_d = pieces.iter().map(|s| s.oscillation).fold(0.0, f64::max);
    cert.check("max piece oscillation D_l", max_d, Relation::Le, 0.0, 0.0);
    let d_sum = pieces.iter().map(|s| s.p * s.oscillation).collect::<NeumaierSum>().value();
    cert.check("sum of p_l times integral of D_l", d_sum, Relation::Le, 0.0, 0.0);
    let slack = pieces.iter().map(|s| s.length - s.r).fold(f64::INFINITY, f64::min);
    cert.check("every piece contains its comparison interval", slack, Relation::Ge, 0.0, 0.0);
    let scale_sum = pieces.iter().map(|s| s.p * log_plus(1.0 / s.r)).collect::<NeumaierSum>().value();
    cert.check("sum of p_l log+(1/r_l) is finite", scale_sum, Relation::Lt, f64::INFINITY, 0.0);
    let m2 = match f.second_moment() {
        SecondMoment::Finite(v) => v,
        _ => f64::INFINITY,
    };
    cert.check("second moment is finite", m2, Relation::Lt, f64::INFINITY, 0.0);
    cert.record("pieces", pieces.len());
    cert.record("scale_sum", scale_sum);
    cert.record("second_moment", m2);
    cert.conclude();
    cert
}

fn piece_entropy_sides(piece: &PieceSpec) -> (f64, f64) {
    (log_plus(1.0 / piece.length), piece.oscillation + log_plus(2.0 / piece.r))
}

/// `∫ q log₊q ≤ ∫ D_r dQ + log₊(2/r)` for a piece on which `f` is constant,
/// both sides in closed form.
pub fn fixed_scale_entropy_bound(piece: &PieceSpec) -> Certificate {
    let (lhs, rhs) = piece_entropy_sides(piece);
    let mut cert = Certificate::new(CertificateKind::Membership, format!("fixed-scale entropy bound on piece {}", piece.index));
    cert.check(format!("piece {}: positive entropy <= oscillation + log+(2/r)", piece.index), lhs, Relation::Le, rhs, 0.0);
    cert.record("piece", piece);
    cert.record("gap", rhs - lhs);
    cert.conclude();
    cert
}

/// The piecewise bounds summed with the masses, and `∫ f log₊f` below the
/// weighted sum of the piece entropies.
pub fn fixed_scale_entropy_aggregate(f: &UniformOnUnion, pieces: &[PieceSpec]) -> Certificate {
    let mut cert = Certificate::new(CertificateKind::Membership, format!("{} positive entropy from piece bounds", f.name()));
    let (mut lhs_sum, mut rhs_sum) = (NeumaierSum::new(), NeumaierSum::new());
    for s in pieces {
        let (lhs, rhs) = piece_entropy_sides(s);
        cert.check(format!("piece {}: positive entropy <= oscillation + log+(2/r)", s.index), lhs, Relation::Le, rhs, 0.0);
        lhs_sum.add(s.p * lhs);
        rhs_sum.add(s.p * rhs);
    }
    let (lhs, rhs) = (lhs_sum.value(), rhs_sum.value());
    cert.check("weighted piece entropies <= weighted oscillation + scale terms", lhs, Relation::Le, rhs, 0.0);
    let total = log_plus(f.level());
    cert.check("integral of f log+ f <= weighted piece entropies", total, Relation::Le, lhs, 1e-12 * lhs.abs().max(1.0));
    cert.check("weighted scale terms are finite", rhs, Relation::Lt, f64::INFINITY, 0.0);
    cert.record("pieces", pieces.len());
    cert.record("weighted_piece_entropy", lhs);
    cert.record("weighted_bound", rhs);
    cert.record("positive_entropy", total);
    cert.conclude();
    cert
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{by_name, make_fat_cantor, make_fstar, Laplace, Normal};
    use crate::support::fstar_pieces;

    #[test]
    fn ent_verdicts_follow_the_catalog() {
        let b = QuadratureBudget::default();
        let lap = check_ent(&Laplace, b).unwrap();
        assert_eq!(lap.verdict, Verdict::Holds);
        assert!(lap.audit().is_empty());
        let fs = check_ent(&make_fstar(50).unwrap(), b).unwrap();
        assert!(matches!(fs.verdict, Verdict::Fails { .. }));
        assert!(fs.audit().is_empty());
        let fc = check_ent(by_name("fat-cantor").unwrap().as_ref(), b).unwrap();
        assert!(matches!(fc.verdict, Verdict::Fails { .. }));
        // Uniform on a set of measure λ: ∫ f log₊f = log(1/λ).
        let cantor = make_fat_cantor(8).unwrap();
        let v: f64 = fc.provenance["positive_entropy"].as_str().unwrap().parse().unwrap();
        assert!((v - (1.0 / cantor.measure()).ln()).abs() < 1e-9);
    }

    #[test]
    fn fstar_fails_at_quarter_scale() {
        let f = make_fstar(50).unwrap();
        let c = check_fssa_scale(&f, 0.25, 2000, 3).unwrap();
        let Verdict::Fails { witness: Some(w) } = &c.verdict else { panic!("{:?}", c.verdict) };
        assert!(w.contains("length"));
        let iv = c.provenance["witness_interval"].as_array().unwrap();
        let (a, b) = (iv[0].as_f64().unwrap(), iv[1].as_f64().unwrap());
        let n = a.sqrt().round();
        assert_eq!(a, n * n);
        assert!(b - a < 0.25 && n >= 2.0);
        assert!(c.audit().is_empty());
    }

    #[test]
    fn uniform_and_laplace_hold() {
        let u = UniformOnUnion::interval(0.0, 1.0).unwrap();
        let c = check_fssa_scale(&u, 0.25, 500, 1).unwrap();
        assert_eq!(c.verdict, Verdict::Holds);
        assert_eq!(c.provenance["oscillation_max"].as_f64().unwrap(), 0.0);
        let l = check_fssa_scale(&Laplace, 1.0, 500, 1).unwrap();
        assert_eq!(l.verdict, Verdict::Holds);
        // |d/dx log f| = 1, so the log-oscillation over a unit interval is at most 1.
        assert!(l.provenance["oscillation_max"].as_f64().unwrap() <= 1.0 + 1e-12);
        assert!(check_fssa_scale(&Normal::standard(2), 1.0, 10, 1).is_err());
    }

    #[test]
    fn fstar_piece_entropy_gap_is_log_eight() {
        let f = make_fstar(50).unwrap();
        let pieces = fstar_pieces(&f).unwrap();
        for s in &pieces {
            let c = fixed_scale_entropy_bound(s);
            assert_eq!(c.verdict, Verdict::Holds);
            let n = s.index as f64;
            assert!((c.statement[0].lhs - 6.0 * n.ln()).abs() < 1e-12);
            assert!((c.provenance["gap"].as_f64().unwrap() - 8f64.ln()).abs() < 1e-12);
        }
        let agg = fixed_scale_entropy_aggregate(&f, &pieces);
        assert_eq!(agg.verdict, Verdict::Holds);
        assert!(agg.audit().is_empty());
    }

    #[test]
    fn long_piece_has_zero_entropy() {
        let s = PieceSpec {
            index: 1,
            left: 0.0,
            length: 2.0,
            p: 1.0,
            r: 0.5,
            oscillation: 0.0,
        };
        let c = fixed_scale_entropy_bound(&s);
        assert_eq!(c.statement[0].lhs, 0.0);
        assert!(c.statement[0].pass);
    }

    #[test]
    fn unions_are_countable_scale_members() {
        let c = check_cssa_union(make_fat_cantor(8).unwrap().density());
        assert_eq!(c.verdict, Verdict::Holds, "{}", c.summary());
        assert_eq!(c.provenance["pieces"].as_u64().unwrap(), 256);
    }
}
