//! Piecewise approximation route for densities carried by a countable
//! family of disjoint pieces.
//!
//! Each piece `Y_ℓ` with mass `p_ℓ` gets its own mixture `g_ℓ`; the first
//! `L` of them are assembled with a standard normal carrying the leftover
//! mass: `G_L = Σ_{ℓ≤L} p_ℓ·g_ℓ + p_{>L}·N(0, 1)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::densities::{Density, UniformOnUnion};
use crate::divergence::{kl_quadrature_1d, KLEstimate};
use crate::error::{invalid, Error, Result};
use crate::gmm::{FiniteGMM, GaussComponent};
use crate::numeric::{entropy_term, fmt17, log_plus, NeumaierSum};
use crate::quadrature::QuadratureBudget;

/// One support piece with its mass and witness scale.
#[derive(Debug, Clone, Serialize)]
pub struct PieceSpec {
    /// 1-based index `ℓ`.
    pub index: usize,
    pub left: f64,
    /// Stored separately from `left` so that short pieces far from the
    /// origin keep their exact length.
    pub length: f64,
    pub p: f64,
    pub r: f64,
    /// Log-oscillation witness `D_ℓ`; zero for constant restrictions.
    pub oscillation: f64,
}

impl PieceSpec {
    pub fn right(&self) -> f64 {
        self.left + self.length
    }

    /// The normalized restriction `f_ℓ`, uniform on the piece.
    pub fn density(&self) -> Result<UniformOnUnion> {
        UniformOnUnion::new(format!("piece[{}]", self.index), vec![(self.left, self.length)])
    }
}

/// Pieces of a uniform density on an interval union: one per interval, with
/// `r = length/4` and zero oscillation.
pub fn union_pieces(f: &UniformOnUnion) -> Vec<PieceSpec> {
    f.pieces()
        .iter()
        .enumerate()
        .map(|(i, &(left, length))| PieceSpec {
            index: i + 1,
            left,
            length,
            p: length * f.level(),
            r: length / 4.0,
            oscillation: 0.0,
        })
        .collect()
}

/// Pieces `J_n = [n², n² + n⁻⁶]` of the truncated `f⋆`.
pub fn fstar_pieces(f: &UniformOnUnion) -> Result<Vec<PieceSpec>> {
    for (i, &(left, length)) in f.pieces().iter().enumerate() {
        let n = (i + 1) as f64;
        if left != n * n || length != n.powi(-6) {
            return Err(invalid("f", format!("piece {} is not [n², n² + n⁻⁶]", i + 1)));
        }
    }
    Ok(union_pieces(f))
}

/// Mixture on the unit interval targeting `U(0, 1)`: a single moment-matched
/// Gaussian when `bumps = 0`, otherwise `bumps` equal-weight Gaussians at the
/// cell midpoints with `σ = 1/bumps`.
pub fn unit_bump_train(bumps: usize) -> FiniteGMM {
    if bumps == 0 {
        return FiniteGMM::isotropic_gaussian(vec![0.5], 1.0 / 12.0).expect("valid");
    }
    let k = bumps as f64;
    let comps = (0..bumps)
        .map(|i| GaussComponent::isotropic(1.0 / k, vec![(i as f64 + 0.5) / k], 1.0 / (k * k)))
        .collect();
    FiniteGMM::new(comps).expect("valid")
}

/// Largest bump count tried before giving up.
pub const MAX_BUMPS: usize = 1 << 16;

/// Affine image of a unit-interval mixture onto `[left, left + length]`.
fn map_to_piece(unit: &FiniteGMM, left: f64, length: f64) -> Result<FiniteGMM> {
    let comps = unit
        .components()
        .iter()
        .map(|c| GaussComponent::isotropic(c.weight, vec![left + length * c.mean[0]], length * length * c.cov[0]))
        .collect();
    FiniteGMM::new(comps)
}

/// Per-piece approximant with its divergence.
#[derive(Debug, Clone, Serialize)]
pub struct PieceApprox {
    pub piece: PieceSpec,
    pub bumps: usize,
    /// `KL(U(0,1) ‖ template)`, equal to the piece divergence by affine invariance.
    pub template_kl: KLEstimate,
    /// `KL(f_ℓ ‖ g_ℓ)` measured on the piece itself.
    pub kl: KLEstimate,
    #[serde(skip)]
    pub g: FiniteGMM,
}

/// Smallest template (single Gaussian, then 1, 2, 4, … bumps) whose
/// unit-interval divergence is below `eps`.
fn unit_template(eps: f64, budget: QuadratureBudget) -> Result<(usize, KLEstimate)> {
    let u = UniformOnUnion::interval(0.0, 1.0)?;
    let mut best = f64::INFINITY;
    let mut bumps = 0;
    loop {
        let t = unit_bump_train(bumps);
        let kl = kl_quadrature_1d(&u, &t, budget)?;
        if kl.value + kl.error < eps {
            return Ok((bumps, kl));
        }
        best = best.min(kl.value);
        bumps = if bumps == 0 { 1 } else { bumps * 2 };
        if bumps > MAX_BUMPS {
            return Err(Error::ToleranceUnreachable { requested: eps, best });
        }
    }
}

/// Divergence of a uniform piece from its mixture.
///
/// Pieces only a few hundred ulps long cannot meet an absolute tolerance set
/// for unit scale; the estimate is then kept with its achieved error bar.
fn piece_kl(f: &UniformOnUnion, g: &FiniteGMM, budget: QuadratureBudget) -> Result<KLEstimate> {
    match kl_quadrature_1d(f, g, budget) {
        Err(Error::BudgetExceeded { value, achieved, .. }) => Ok(KLEstimate {
            value,
            method: crate::divergence::KlMethod::Quadrature1d,
            error: achieved,
            n_evals: 0,
            diagnostic: Some("quadrature budget exhausted at floating-point resolution; error bar is the achieved one".into()),
        }),
        other => other,
    }
}

/// `g_ℓ` with `KL(f_ℓ‖g_ℓ) < eps` for a uniform piece.
pub fn build_piece_approximant(piece: &PieceSpec, eps: f64, budget: QuadratureBudget) -> Result<PieceApprox> {
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    let (bumps, template_kl) = unit_template(eps, budget)?;
    piece_from_template(piece, bumps, template_kl, budget)
}

fn piece_from_template(piece: &PieceSpec, bumps: usize, template_kl: KLEstimate, budget: QuadratureBudget) -> Result<PieceApprox> {
    let g = map_to_piece(&unit_bump_train(bumps), piece.left, piece.length)?;
    let kl = piece_kl(&piece.density()?, &g, budget)?;
    Ok(PieceApprox {
        piece: piece.clone(),
        bumps,
        template_kl,
        kl,
        g,
    })
}

/// The four summands bounding `p_{>L}·KL(ν_L‖N(0,1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailTerms {
    pub l: usize,
    pub p_tail: f64,
    /// `∫_{B_L} log₊f dF`.
    pub log_plus_f: f64,
    /// `(d/2)·log(2π)·p_{>L}`.
    pub gaussian_normalizer: f64,
    /// `½·∫_{B_L} ‖x‖² dF`.
    pub half_second_moment: f64,
    /// `p_{>L}·log(1/p_{>L})`.
    pub entropy: f64,
}

impl TailTerms {
    pub fn total(&self) -> f64 {
        self.log_plus_f + self.gaussian_normalizer + self.half_second_moment + self.entropy
    }

    pub fn summands(&self) -> [f64; 4] {
        [self.log_plus_f, self.gaussian_normalizer, self.half_second_moment, self.entropy]
    }
}

/// Tail summands over the pieces with index `> l`.
///
/// The target is constant on every piece, so each integral has a closed
/// form; pieces far from the origin are too short (a few hundred ulps) for
/// node-based quadrature to resolve their edges.
pub fn tail_term_report(f: &UniformOnUnion, pieces: &[PieceSpec], l: usize) -> TailTerms {
    let rest = pieces.get(l.min(pieces.len())..).unwrap_or(&[]);
    let c = f.level();
    let p_tail = rest.iter().map(|s| s.p).collect::<NeumaierSum>().value();
    let m2 = rest
        .iter()
        .map(|s| c * s.length * (s.left * s.left + s.left * s.length + s.length * s.length / 3.0))
        .collect::<NeumaierSum>()
        .value();
    TailTerms {
        l,
        p_tail,
        log_plus_f: p_tail * log_plus(c),
        gaussian_normalizer: 0.5 * (2.0 * std::f64::consts::PI).ln() * p_tail,
        half_second_moment: 0.5 * m2,
        entropy: entropy_term(p_tail),
    }
}

/// Both sides of the split `KL(f‖G_L) ≤ Σ p_ℓ·KL(f_ℓ‖g_ℓ) + p_{>L}·KL(ν_L‖N(0,1))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitCheck {
    pub lhs: KLEstimate,
    pub first_term: f64,
    pub tail_kl: Option<KLEstimate>,
    pub rhs: f64,
    pub error: f64,
    pub holds: bool,
}

/// `G_L` with its per-piece approximants and bound components.
#[derive(Debug, Clone, Serialize)]
pub struct CssaApproximant {
    pub l: usize,
    pub eps: f64,
    /// Divergence tolerance used for every piece.
    pub piece_eps: f64,
    pub pieces: Vec<PieceApprox>,
    #[serde(skip)]
    pub g: FiniteGMM,
    pub p_tail: f64,
    /// `Σ p_ℓ·KL(f_ℓ‖g_ℓ)`.
    pub first_term: f64,
    pub first_term_bound: f64,
    pub tail_terms: TailTerms,
    pub total_bound: f64,
    pub split: SplitCheck,
}

/// Assembles `G_L` for a uniform interval-union target.
///
/// Every piece gets tolerance `eps/2`, which keeps `Σ p_ℓ·KL(f_ℓ‖g_ℓ) ≤ eps/2`
/// because the masses sum to at most one.
pub fn build_cssa_approximant(
    f: &UniformOnUnion,
    pieces: &[PieceSpec],
    l: usize,
    eps: f64,
    budget: QuadratureBudget,
) -> Result<CssaApproximant> {
    if l == 0 || l > pieces.len() {
        return Err(invalid("L", format!("must lie in 1..={}", pieces.len())));
    }
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    let piece_eps = 0.5 * eps;
    let (bumps, template_kl) = unit_template(piece_eps, budget)?;
    let built: Vec<PieceApprox> = pieces[..l]
        .par_iter()
        .map(|s| piece_from_template(s, bumps, template_kl.clone(), budget))
        .collect::<Result<_>>()?;
    let p_head = pieces[..l].iter().map(|s| s.p).collect::<NeumaierSum>().value();
    let p_tail = (1.0 - p_head).max(0.0);
    let std_normal = FiniteGMM::standard_normal(1);
    let mut parts: Vec<(f64, &FiniteGMM)> = built.iter().map(|b| (b.piece.p, &b.g)).collect();
    // The tail component stays even at weight zero.
    parts.push((p_tail, &std_normal));
    let g = FiniteGMM::convex_combination(&parts)?;

    let first_term = built.iter().map(|b| b.piece.p * b.kl.value).collect::<NeumaierSum>().value();
    let first_err: f64 = built.iter().map(|b| b.piece.p * b.kl.error).sum();
    let tail_terms = tail_term_report(f, pieces, l);

    let lhs = piece_kl(f, &g, budget)?;
    let tail_kl = if l < pieces.len() {
        let nu = f.restrict(l..pieces.len(), format!("{}[>{l}]", f.name()))?;
        Some(kl_quadrature_1d(&nu, &std_normal, budget)?)
    } else {
        None
    };
    let tail_contrib = tail_kl.as_ref().map_or(0.0, |k| p_tail * k.value);
    let rhs = first_term + tail_contrib;
    let error = lhs.error + first_err + tail_kl.as_ref().map_or(0.0, |k| p_tail * k.error);
    let split = SplitCheck {
        holds: lhs.value <= rhs + error,
        lhs,
        first_term,
        tail_kl,
        rhs,
        error,
    };
    Ok(CssaApproximant {
        l,
        eps,
        piece_eps,
        first_term_bound: piece_eps,
        total_bound: first_term + tail_terms.total(),
        pieces: built,
        g,
        p_tail,
        first_term,
        tail_terms,
        split,
    })
}

/// `ell,left,right,p,r,kl_piece`.
pub fn piece_table_csv(approx: &CssaApproximant) -> String {
    let mut out = String::from("ell,left,right,p,r,kl_piece\n");
    for b in &approx.pieces {
        let s = &b.piece;
        let cells = [
            s.index.to_string(),
            fmt17(s.left),
            fmt17(s.right()),
            fmt17(s.p),
            fmt17(s.r),
            fmt17(b.kl.value),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::make_fstar;

    const Z50: f64 = 1.017_343_061_375_809_4;

    #[test]
    fn fstar_piece_values() {
        let f = make_fstar(50).unwrap();
        let p = fstar_pieces(&f).unwrap();
        assert_eq!(p.len(), 50);
        assert!((p[1].p - 2f64.powi(-6) / Z50).abs() < 1e-16);
        assert_eq!(p[1].r, 2f64.powi(-6) / 4.0);
        assert!(p.iter().all(|s| s.oscillation == 0.0));
        let total: f64 = p.iter().map(|s| s.p).collect::<NeumaierSum>().value();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(fstar_pieces(&UniformOnUnion::interval(0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn single_gaussian_template() {
        // ½·log(2π/12) + ½ for U(0,1) against N(1/2, 1/12).
        let (bumps, kl) = unit_template(0.5, QuadratureBudget::default()).unwrap();
        assert_eq!(bumps, 0);
        let exact = 0.5 * (2.0 * std::f64::consts::PI / 12.0).ln() + 0.5;
        assert!((kl.value - exact).abs() < 1e-9);
    }

    #[test]
    fn short_piece_meets_tolerance() {
        let s = PieceSpec {
            index: 2,
            left: 4.0,
            length: 2f64.powi(-6),
            p: 1.0,
            r: 2f64.powi(-8),
            oscillation: 0.0,
        };
        let a = build_piece_approximant(&s, 0.125, QuadratureBudget::default()).unwrap();
        assert!(a.kl.value < 0.125);
        assert!((a.kl.value - a.template_kl.value).abs() < 1e-6);
    }

    #[test]
    fn tail_terms_match_quadrature_on_resolvable_pieces() {
        use crate::quadrature::integrate;
        let f = make_fstar(6).unwrap();
        let p = fstar_pieces(&f).unwrap();
        let t = tail_term_report(&f, &p, 2);
        let b = QuadratureBudget::default();
        let m2: f64 = p[2..]
            .iter()
            .map(|s| integrate(|x| x * x * f.pdf(&[x]), s.left, s.right(), b).unwrap().value)
            .sum();
        assert!((0.5 * m2 - t.half_second_moment).abs() < 1e-9 * t.half_second_moment);
        assert_eq!(t.log_plus_f, 0.0);
        let empty = tail_term_report(&f, &p, 6);
        assert_eq!(empty.total(), 0.0);
    }

    #[test]
    fn tail_entropy_at_inverse_e() {
        assert!((entropy_term(std::f64::consts::E.recip()) - std::f64::consts::E.recip()).abs() < 1e-16);
    }

    #[test]
    fn full_cover_has_empty_tail() {
        let f = make_fstar(8).unwrap();
        let p = fstar_pieces(&f).unwrap();
        let a = build_cssa_approximant(&f, &p, 8, 0.2, QuadratureBudget::default()).unwrap();
        assert!(a.p_tail < 1e-15);
        assert_eq!(a.tail_terms.total(), 0.0);
        assert!(a.split.tail_kl.is_none());
        assert_eq!(a.g.components().last().unwrap().mean, vec![0.0]);
    }

    #[test]
    fn flattened_mixture_matches_weighted_sum() {
        let f = make_fstar(10).unwrap();
        let p = fstar_pieces(&f).unwrap();
        let a = build_cssa_approximant(&f, &p, 6, 0.2, QuadratureBudget::default()).unwrap();
        let n = FiniteGMM::standard_normal(1);
        for x in [0.0, 1.0005, 4.01, 9.0001, 25.0, 30.0] {
            let direct: f64 = a.pieces.iter().map(|b| b.piece.p * b.g.pdf1(x)).sum::<f64>() + a.p_tail * n.pdf1(x);
            let flat = a.g.pdf1(x);
            assert!((flat - direct).abs() <= 1e-12 * direct.max(1e-300), "x={x}: {flat} vs {direct}");
        }
    }
}
