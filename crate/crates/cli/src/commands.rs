use std::sync::Arc;

use gmmkl::certificates::{
    cantor_kl_demo, cauchy_hand_fit, check_cssa_union, check_ent, check_fssa_scale, entropy_run_certificate,
    fixed_scale_entropy_aggregate, half_decade_grid, necessity_bound, refute_fnatural_cssa, support_run_certificate,
    verify_fstar_cssa, CantorOptions, Certificate, CertificateKind, NecessityOptions, Relation,
};
use gmmkl::densities::{by_name, catalog, make_fat_cantor, make_fstar, Density, SecondMoment, UniformOnUnion};
use gmmkl::divergence::{kl_monte_carlo, kl_quadrature_1d, KLEstimate, McConfig};
use gmmkl::entropy::{entropy_schedule, schedule_csv, EntropyOptions, EntropyRun};
use gmmkl::gmm::{mixture_to_string, read_mixture, FiniteGMM};
use gmmkl::numeric::fmt17;
use gmmkl::support::{build_cssa_approximant, fstar_pieces, piece_table_csv, union_pieces, PieceSpec};
use gmmkl::{Error, Result};
use serde_json::json;

use crate::output::{csv_row, Expect, Output};
use crate::{
    config_json, ApproximateArgs, Candidate, ClassArg, ClassCheckArgs, Cli, Command, Common, CounterexampleArgs, KlArgs,
    KlMethodArg, NecessityArgs, Route, Which,
};

pub fn run(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    match &cli.command {
        Command::Approximate(a) => approximate(c, a),
        Command::Kl(a) => kl(c, a),
        Command::Necessity(a) => necessity(c, a),
        Command::ClassCheck(a) => class_check(c, a),
        Command::Counterexample(a) => counterexample(c, a),
        Command::Catalog => list_catalog(c),
    }
}

fn open(c: &Common, command: &str, config: serde_json::Value) -> Result<Output> {
    let out = Output::create(&c.out_dir)?;
    out.manifest(command, config, c.workers, c.seed)?;
    Ok(out)
}

fn mc(c: &Common, n: usize) -> McConfig {
    McConfig::new(n, c.seed).with_workers(c.workers)
}

/// Interval-union targets as concrete densities, with their piece lists.
fn union_target(name: &str, n_max: usize) -> Result<(UniformOnUnion, Vec<PieceSpec>)> {
    match name {
        "fstar" => {
            let f = make_fstar(n_max)?;
            let pieces = fstar_pieces(&f)?;
            Ok((f, pieces))
        }
        "fat-cantor" => {
            let f = make_fat_cantor(gmmkl::densities::FAT_CANTOR_DEPTH)?.density().clone();
            let pieces = union_pieces(&f);
            Ok((f, pieces))
        }
        "uniform" => {
            let f = UniformOnUnion::interval(0.0, 1.0)?;
            let pieces = union_pieces(&f);
            Ok((f, pieces))
        }
        other => {
            by_name(other)?;
            Err(Error::Unsupported(format!(
                "{other} is not a uniform density on an interval union; the support route needs one of fstar, fat-cantor, uniform"
            )))
        }
    }
}

fn approximate(c: &Common, a: &ApproximateArgs) -> Result<i32> {
    let mut out = open(c, "approximate", config_json(c, a))?;
    match a.route {
        Route::Entropy => {
            let f = by_name(&a.target)?;
            let opts = EntropyOptions {
                budget: c.budget(),
                ..EntropyOptions::default()
            };
            let run = entropy_schedule(f.as_ref(), a.m_max, opts, mc(c, a.mc_n))?;
            write_entropy_run(&out, &run)?;
            out.certificate("certificate.json", entropy_run_certificate(&run, a.eps), Expect::Success)?;
        }
        Route::Support => {
            let (f, pieces) = union_target(&a.target, a.n_max)?;
            let l = a.l.unwrap_or(pieces.len());
            let eps = a.eps.unwrap_or(0.1);
            let approx = build_cssa_approximant(&f, &pieces, l, eps, c.budget())?;
            out.write("pieces.csv", &piece_table_csv(&approx))?;
            out.write(&format!("mixture_L{l}.json"), &mixture_to_string(&approx.g))?;
            out.write("report.json", &gmmkl::json::to_string(&approx))?;
            out.certificate("certificate.json", support_run_certificate(&a.target, &approx), Expect::Success)?;
            let membership = if a.target == "fstar" {
                verify_fstar_cssa(a.n_max)?
            } else {
                check_cssa_union(&f)
            };
            out.certificate("membership.json", membership, Expect::Success)?;
            println!(
                "KL({} || G_{l}) = {} (error {}), target < {eps}",
                a.target,
                fmt17(approx.split.lhs.value),
                fmt17(approx.split.lhs.error)
            );
        }
    }
    Ok(out.finish())
}

fn write_entropy_run(out: &Output, run: &EntropyRun) -> Result<()> {
    out.write("schedule.csv", &schedule_csv(&run.rows))?;
    for a in &run.approximants {
        out.write(&format!("mixture_m{}.json", a.m), &mixture_to_string(&a.g))?;
    }
    let p = &run.profile;
    let mut header = vec!["m".to_string(), "mean_L".into(), "se_L".into()];
    header.extend(p.thresholds.iter().map(|t| format!("tail_M{t}")));
    header.extend(p.thresholds.iter().map(|t| format!("se_M{t}")));
    let mut csv = header.join(",") + "\n";
    for (row, a) in p.rows.iter().zip(&run.approximants) {
        let mut cells = vec![row.mean_l, row.se_l];
        cells.extend(&row.tails);
        cells.extend(&row.tail_se);
        csv.push_str(&format!("{},{}", a.m, csv_row(&cells)));
    }
    out.write("profile.csv", &csv)?;
    out.write("report.json", &gmmkl::json::to_string(run))?;
    println!("m  R_m  components  bound  KL");
    for r in &run.rows {
        println!("{}  {}  {}  {}  {}", r.m, fmt17(r.r), r.components, fmt17(r.bound), fmt17(r.kl.value));
    }
    Ok(())
}

fn kl(c: &Common, a: &KlArgs) -> Result<i32> {
    let mut out = open(c, "kl", config_json(c, a))?;
    let f = by_name(&a.target)?;
    let g = read_mixture(&a.mixture)?;
    let quad = matches!(a.method, KlMethodArg::Quadrature | KlMethodArg::Both);
    let monte = matches!(a.method, KlMethodArg::Mc | KlMethodArg::Both);
    if quad && f.dim() != 1 {
        return Err(Error::Unsupported(format!("quadrature needs a 1-D target, {} has dimension {}", a.target, f.dim())));
    }
    let q = if quad { Some(kl_quadrature_1d(f.as_ref(), &g, c.budget())?) } else { None };
    let m = if monte { Some(kl_monte_carlo(f.as_ref(), &g, mc(c, a.mc_n))?) } else { None };

    let mut cert = Certificate::new(CertificateKind::Membership, format!("KL({} || {})", a.target, a.mixture.display()));
    for (label, e) in [("quadrature", &q), ("monte carlo", &m)] {
        if let Some(e) = e {
            cert.check(format!("{label} estimate >= 0"), e.value, Relation::Ge, 0.0, e.error);
            println!("{label}: {} +- {}", fmt17(e.value), fmt17(e.error));
        }
    }
    if let (Some(q), Some(m)) = (&q, &m) {
        let gap = if q.value.is_infinite() && m.value.is_infinite() { 0.0 } else { (q.value - m.value).abs() };
        cert.check("estimates agree within 3 combined errors", gap, Relation::Le, 3.0 * (q.error + m.error), 0.0);
    }
    cert.record("quadrature", &q);
    cert.record("monte_carlo", &m);
    cert.conclude();
    let estimates: Vec<&KLEstimate> = q.iter().chain(m.iter()).collect();
    out.write("kl.json", &gmmkl::json::to_string(&estimates))?;
    out.certificate("certificate.json", cert, Expect::Success)?;
    Ok(out.finish())
}

fn candidates(c: &Common, a: &NecessityArgs) -> Result<Vec<(String, FiniteGMM)>> {
    if let Some(path) = &a.mixture {
        return Ok(vec![("file".into(), read_mixture(path)?)]);
    }
    let mut list = Vec::new();
    let want = |k: Candidate| a.candidate == k || a.candidate == Candidate::All;
    if want(Candidate::StandardNormal) {
        list.push(("standard-normal".into(), FiniteGMM::standard_normal(1)));
    }
    if want(Candidate::HandFit) {
        list.push(("hand-fit".into(), cauchy_hand_fit()));
    }
    if want(Candidate::EntropyG3) {
        let normal = by_name("normal")?;
        let opts = EntropyOptions {
            budget: c.budget(),
            ..EntropyOptions::default()
        };
        let run = entropy_schedule(normal.as_ref(), 3, opts, mc(c, 20_000))?;
        list.push(("entropy-g3".into(), run.approximants[2].g.clone()));
    }
    Ok(list)
}

fn necessity(c: &Common, a: &NecessityArgs) -> Result<i32> {
    let mut out = open(c, "necessity", config_json(c, a))?;
    let f = by_name(&a.target)?;
    let grid = half_decade_grid(a.r_max);
    let opts = NecessityOptions {
        threshold: a.threshold,
        budget: c.budget(),
        mc: mc(c, 200_000),
        ..NecessityOptions::default()
    };
    for (name, g) in candidates(c, a)? {
        if g.dim() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: g.dim(),
            });
        }
        out.write(&format!("mixture_{name}.json"), &mixture_to_string(&g))?;
        let cert = necessity_bound(f.as_ref(), &g, &grid, opts)?;
        out.certificate(&format!("certificate_{name}.json"), cert, Expect::Success)?;
    }
    Ok(out.finish())
}

fn class_check(c: &Common, a: &ClassCheckArgs) -> Result<i32> {
    let mut out = open(c, "class-check", config_json(c, a))?;
    match a.class {
        ClassArg::Ent => {
            let f = by_name(&a.target)?;
            out.certificate("certificate.json", check_ent(f.as_ref(), c.budget())?, Expect::Success)?;
        }
        ClassArg::Fssa => {
            let f = by_name(&a.target)?;
            let cert = check_fssa_scale(f.as_ref(), a.r, a.probes, c.seed)?;
            if let Some(w) = cert.provenance.get("witness_interval") {
                println!("witness interval: {w}");
            }
            out.certificate("certificate.json", cert, Expect::Success)?;
        }
        ClassArg::Cssa => {
            let (f, pieces) = union_target(&a.target, gmmkl::densities::FSTAR_N_MAX)?;
            out.certificate("certificate.json", check_cssa_union(&f), Expect::Success)?;
            out.certificate("entropy_bound.json", fixed_scale_entropy_aggregate(&f, &pieces), Expect::Success)?;
        }
    }
    Ok(out.finish())
}

fn counterexample(c: &Common, a: &CounterexampleArgs) -> Result<i32> {
    let mut out = open(c, "counterexample", config_json(c, a))?;
    let mut report = Vec::new();
    let mut emit = |out: &mut Output, name: &str, cert: Certificate, expect: Expect| -> Result<()> {
        report.push(json!({
            "file": name,
            "subject": cert.subject,
            "expected": match expect { Expect::Success => "holds or diverges", Expect::Failure => "fails" },
            "verdict": cert.verdict,
        }));
        out.certificate(name, cert, expect)
    };
    match a.which {
        Which::Star => {
            let f = make_fstar(a.n_max)?;
            let pieces = fstar_pieces(&f)?;
            emit(&mut out, "cssa.json", verify_fstar_cssa(a.n_max)?, Expect::Success)?;
            emit(&mut out, "entropy_bound.json", fixed_scale_entropy_aggregate(&f, &pieces), Expect::Success)?;
            let fssa = check_fssa_scale(&f, 0.25, 1000, c.seed)?;
            emit(&mut out, "fssa_r0.25.json", fssa, Expect::Failure)?;
        }
        Which::Natural => {
            emit(&mut out, "refutation.json", refute_fnatural_cssa(a.n_top, c.budget())?, Expect::Success)?;
        }
        Which::Cantor => {
            let opts = CantorOptions {
                depth: a.depth,
                m_max: a.m_max,
                eps: a.eps,
                budget: c.budget(),
                ..CantorOptions::default()
            };
            let (cert, steps) = cantor_kl_demo(opts)?;
            out.write("cantor_steps.json", &gmmkl::json::to_string(&steps))?;
            let fc = make_fat_cantor(a.depth)?;
            out.write("fat_cantor_intervals.csv", &fc.intervals_csv())?;
            emit(&mut out, "cantor_demo.json", cert, Expect::Success)?;
            emit(&mut out, "ent.json", check_ent(fc.density(), c.budget())?, Expect::Failure)?;
        }
    }
    out.write("report.json", &gmmkl::json::to_string(&report))?;
    Ok(out.finish())
}

fn list_catalog(c: &Common) -> Result<i32> {
    let out = open(c, "catalog", json!({ "common": c_json(c) }))?;
    let mut csv = String::from("name,dim,continuous,strictly_positive,bounded,second_moment,support_measure\n");
    println!("{:<12} {:>3}  {:<10} {:<8} {:<14} support", "name", "dim", "continuous", "positive", "second moment");
    for e in catalog() {
        let f: &Arc<dyn Density> = &e.density;
        let r = f.regularity();
        let m2 = match f.second_moment() {
            SecondMoment::Finite(v) => fmt17(v),
            SecondMoment::Infinite => "inf".into(),
            SecondMoment::Unknown => "unknown".into(),
        };
        let measure = if f.dim() == 1 { fmt17(f.support().measure_1d()) } else { "inf".into() };
        csv.push_str(&format!(
            "{},{},{},{},{},{m2},{measure}\n",
            e.name,
            f.dim(),
            r.continuous,
            r.strictly_positive,
            r.bounded
        ));
        println!("{:<12} {:>3}  {:<10} {:<8} {:<14} {measure}", e.name, f.dim(), r.continuous, r.strictly_positive, m2);
    }
    out.write("catalog.csv", &csv)?;
    Ok(0)
}

fn c_json(c: &Common) -> serde_json::Value {
    config_json(c, &())["common"].clone()
}
