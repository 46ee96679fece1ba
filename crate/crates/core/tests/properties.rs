use std::sync::Arc;

use gmmkl::certificates::{Certificate, CertificateKind, Relation};
use gmmkl::densities::{Density, Laplace, Normal, StudentT3};
use gmmkl::divergence::{check_log_sum, check_mixture_convexity, check_plogp};
use gmmkl::gmm::{default_t0, log_exp_quadratic_moment, max_covariance_eigenvalue, mixture_from_str, mixture_to_string, FiniteGMM, GaussComponent};
use gmmkl::quadrature::{integrate, QuadratureBudget};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(20_240_607),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn mixture_1d(max_k: usize) -> impl Strategy<Value = FiniteGMM> {
    (1..=max_k).prop_flat_map(|k| {
        (weights(k), prop::collection::vec((-3.0f64..3.0, 0.2f64..2.5), k)).prop_map(|(w, ms)| {
            let comps = w
                .iter()
                .zip(&ms)
                .map(|(&wi, &(mu, var))| GaussComponent::isotropic(wi, vec![mu], var))
                .collect();
            FiniteGMM::new(comps).unwrap()
        })
    })
}

/// Random SPD covariances `AAᵀ + 0.1·I`.
fn mixture_2d(max_k: usize) -> impl Strategy<Value = FiniteGMM> {
    (1..=max_k).prop_flat_map(|k| {
        (
            weights(k),
            prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, prop::array::uniform4(-1.0f64..1.0)), k),
        )
            .prop_map(|(w, parts)| {
                let comps = w
                    .iter()
                    .zip(&parts)
                    .map(|(&wi, &(x, y, a))| {
                        let c00 = a[0] * a[0] + a[1] * a[1] + 0.1;
                        let c01 = a[0] * a[2] + a[1] * a[3];
                        let c11 = a[2] * a[2] + a[3] * a[3] + 0.1;
                        GaussComponent::new(wi, vec![x, y], vec![c00, c01, c01, c11])
                    })
                    .collect();
                FiniteGMM::new(comps).unwrap()
            })
    })
}

fn smooth_target() -> impl Strategy<Value = Arc<dyn Density>> {
    prop_oneof![
        (0.5f64..2.0).prop_map(|s| Arc::new(Normal::new(1, s)) as Arc<dyn Density>),
        Just(Arc::new(Laplace) as Arc<dyn Density>),
        Just(Arc::new(StudentT3) as Arc<dyn Density>),
    ]
}

/// Half-width covering the tilted integrand `e^{t0 x²}g` to far below
/// double precision.
fn tilted_half_width(g: &FiniteGMM) -> f64 {
    let spread = g.components().iter().flat_map(|c| c.mean.iter().map(|m| m.abs())).fold(0.0, f64::max);
    spread + 14.0 * (2.0 * max_covariance_eigenvalue(g)).sqrt()
}

proptest! {
    #![proptest_config(config(10_000))]

    #[test]
    fn log_sum_gap_nonnegative(pairs in prop::collection::vec((0.0f64..5.0, 1e-3f64..5.0), 1..10)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = check_log_sum(&a, &b).unwrap();
        prop_assert!(r.gap >= -1e-12, "gap {}", r.gap);
    }

    #[test]
    fn log_sum_equality_on_proportional_inputs(a in prop::collection::vec(1e-3f64..5.0, 1..10), c in 0.1f64..10.0) {
        let b: Vec<f64> = a.iter().map(|x| c * x).collect();
        let r = check_log_sum(&a, &b).unwrap();
        prop_assert!(r.gap.abs() <= 1e-12, "gap {}", r.gap);
    }

    #[test]
    fn plogp_bound_sweep(p in 1.0001f64..6.0, ts in prop::collection::vec(0.0f64..50.0, 1..32)) {
        let worst = check_plogp(p, &ts).unwrap();
        prop_assert!(worst <= 1e-12, "violation {worst} at p = {p}");
    }

    #[test]
    fn components_are_exchangeable(g in mixture_1d(6), x in -6.0f64..6.0, shift in 0usize..6) {
        let mut comps = g.components().to_vec();
        let k = comps.len();
        comps.rotate_left(shift % k);
        comps.reverse();
        let h = FiniteGMM::new(comps).unwrap();
        let (a, b) = (g.logpdf1(x), h.logpdf1(x));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let t0 = default_t0(&g);
        prop_assert_eq!(t0, default_t0(&h));
        let (m, n) = (log_exp_quadratic_moment(&g, t0).unwrap(), log_exp_quadratic_moment(&h, t0).unwrap());
        prop_assert!((m - n).abs() <= 1e-12 * m.abs().max(1.0));
    }

    #[test]
    fn default_t0_is_inside_the_domain(g in mixture_2d(4)) {
        let t0 = default_t0(&g);
        prop_assert!(t0 > 0.0 && 2.0 * t0 * max_covariance_eigenvalue(&g) < 1.0);
        prop_assert!(log_exp_quadratic_moment(&g, t0).unwrap().is_finite());
        prop_assert!(log_exp_quadratic_moment(&g, 0.5000001 / max_covariance_eigenvalue(&g)).is_err());
    }

    #[test]
    fn mixture_files_round_trip_exactly(g in mixture_2d(4)) {
        let back = mixture_from_str(&mixture_to_string(&g)).unwrap();
        prop_assert_eq!(back.components(), g.components());
    }

    #[test]
    fn certificate_flags_are_recomputable(recs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0u8..4, 0.0f64..0.5), 0..12)) {
        let mut c = Certificate::new(CertificateKind::Membership, "random");
        for (i, &(l, r, rel, t)) in recs.iter().enumerate() {
            let rel = [Relation::Le, Relation::Lt, Relation::Ge, Relation::Gt][rel as usize];
            c.check(format!("r{i}"), l, rel, r, t);
        }
        c.conclude();
        prop_assert!(c.audit().is_empty(), "{:?}", c.audit());
        prop_assert_eq!(c.succeeded(), c.statement.iter().all(|r| r.pass));
        let back = Certificate::from_json(&c.to_json()).unwrap();
        prop_assert!(back.audit().is_empty());
        prop_assert_eq!(back, c);
    }
}

proptest! {
    #![proptest_config(config(10_000))]

    /// Two targets, two small approximants, weights drawn per trial.
    #[test]
    fn mixture_convexity(
        w in 0.05f64..0.95,
        q0 in smooth_target(),
        q1 in smooth_target(),
        r0 in mixture_1d(2),
        r1 in mixture_1d(2),
    ) {
        let budget = QuadratureBudget::default();
        let rec = check_mixture_convexity(&[w, 1.0 - w], &[q0, q1], &[r0, r1], budget).unwrap();
        prop_assert!(rec.holds(), "gap {} below -{}", rec.gap, rec.error);
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn exp_quadratic_moment_matches_quadrature_1d(g in mixture_1d(5)) {
        let t0 = default_t0(&g);
        let closed = log_exp_quadratic_moment(&g, t0).unwrap().exp();
        let h = tilted_half_width(&g);
        let q = integrate(|x| (t0 * x * x).exp() * g.pdf1(x), -h, h, QuadratureBudget::default()).unwrap();
        prop_assert!((q.value / closed - 1.0).abs() < 1e-6, "{} vs {closed}", q.value);
    }

    #[test]
    fn exp_quadratic_moment_matches_quadrature_2d(g in mixture_2d(3)) {
        let t0 = default_t0(&g);
        let closed = log_exp_quadratic_moment(&g, t0).unwrap().exp();
        let h = tilted_half_width(&g);
        let inner = QuadratureBudget { abs_tol: 1e-12, rel_tol: 1e-10, ..QuadratureBudget::default() };
        let q = integrate(
            |y| {
                integrate(|x| (t0 * (x * x + y * y)).exp() * g.pdf(&[x, y]), -h, h, inner)
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN)
            },
            -h,
            h,
            QuadratureBudget { abs_tol: 1e-9, rel_tol: 1e-8, ..QuadratureBudget::default() },
        )
        .unwrap();
        prop_assert!((q.value / closed - 1.0).abs() < 1e-6, "{} vs {closed}", q.value);
    }
}
