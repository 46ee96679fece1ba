use super::{Certificate, CertificateKind, Relation};
use crate::entropy::{EntropyRun, PROFILE_THRESHOLDS};
use crate::support::CssaApproximant;

/// Records every inequality of an entropy-route run: the radius conditions
/// (as selected and re-verified), the compact step, the proof bound on
/// `∫L_m dF`, monotonicity of the measured divergence after `m = 2`, and the
/// uniform-integrability tail at `M = 1`. `eps`, when given, adds a final
/// `KL < eps` target.
pub fn entropy_run_certificate(run: &EntropyRun, eps: Option<f64>) -> Certificate {
    let mut cert = Certificate::new(CertificateKind::Membership, format!("entropy-route approximation of {}", run.target));
    for (i, (a, row)) in run.approximants.iter().zip(&run.rows).enumerate() {
        let m = a.m;
        for c in &a.radius.conditions {
            cert.check(format!("m={m}: {} at R_m", c.name), c.lhs, Relation::Lt, c.rhs, 0.0);
        }
        if let Some(again) = run.reverified.get(i) {
            for c in again {
                cert.check(format!("m={m}: {} re-verified", c.name), c.lhs, Relation::Lt, c.rhs, 0.0);
            }
        }
        cert.check(format!("m={m}: relative sup error on B_R < rho"), a.compact.sup_rel_error, Relation::Lt, a.rho, 0.0);
        cert.check(format!("m={m}: min h_m >= inf f / 2"), a.compact.h_min, Relation::Ge, 0.5 * a.inf_f, 0.0);
        let l_bound = (-(m as f64) - 1.0).exp2() + 2.0 * row.alpha;
        cert.check(format!("m={m}: measured integral of L_m <= 2^(-m-1) + 2 alpha"), row.measured_l, Relation::Le, l_bound, 3.0 * row.se_l);
        cert.check(format!("m={m}: KL <= construction bound"), row.kl.value, Relation::Le, row.bound, row.kl.error);
        if m >= 3 {
            let prev = &run.rows[i - 1].kl;
            cert.check(format!("m={m}: KL nonincreasing"), row.kl.value, Relation::Le, prev.value, row.kl.error + prev.error);
        }
    }
    if let Some(k) = PROFILE_THRESHOLDS.iter().position(|&t| t == 1.0) {
        let (tail, se) = run.profile.sup_tail(k);
        cert.check("sup_m tail of L_m above M=1", tail, Relation::Lt, 0.02, 3.0 * se);
    }
    if let (Some(eps), Some(last)) = (eps, run.rows.last()) {
        cert.check(format!("final KL < {eps}"), last.kl.value, Relation::Lt, eps, 0.0);
    }
    cert.record("m_max", run.rows.len());
    cert.record("final_ratio_deviation", run.final_ratio_deviation);
    cert.record("kl", run.rows.iter().map(|r| r.kl.value).collect::<Vec<_>>());
    cert.conclude();
    cert
}

/// Records the per-piece divergences, the split inequality, the bound built
/// from the four tail summands, and the target `KL(f‖G_L) < eps`.
pub fn support_run_certificate(target: &str, approx: &CssaApproximant) -> Certificate {
    let mut cert = Certificate::new(CertificateKind::Membership, format!("support-route approximation of {target} (L = {})", approx.l));
    for p in &approx.pieces {
        cert.check(format!("piece {}: KL(f_l || g_l) < eps/2", p.piece.index), p.kl.value, Relation::Lt, approx.piece_eps, 0.0);
    }
    cert.check("sum p_l KL(f_l || g_l) <= eps/2", approx.first_term, Relation::Le, approx.first_term_bound, 0.0);
    let s = &approx.split;
    cert.check("KL(f || G_L) <= split right-hand side", s.lhs.value, Relation::Le, s.rhs, s.error);
    let names = ["log+ f", "gaussian normalizer", "half second moment", "tail entropy"];
    for (name, v) in names.iter().zip(approx.tail_terms.summands()) {
        cert.check(format!("tail summand `{name}` is finite"), v, Relation::Lt, f64::INFINITY, 0.0);
    }
    cert.check("KL(f || G_L) <= first term + tail summands", s.lhs.value, Relation::Le, approx.total_bound, s.lhs.error);
    cert.check(format!("KL(f || G_L) < {}", approx.eps), s.lhs.value, Relation::Lt, approx.eps, 0.0);
    cert.record("L", approx.l);
    cert.record("eps", approx.eps);
    cert.record("piece_eps", approx.piece_eps);
    cert.record("p_tail", approx.p_tail);
    cert.record("tail_terms", approx.tail_terms);
    cert.record("kl", s.lhs.value);
    cert.record("kl_error", s.lhs.error);
    cert.conclude();
    cert
}
