//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line.

mod common;

use std::time::{Duration, Instant};

use common::{ex, grid_distance, model_problem};
use picard_lod::funcspace::{graded_norm, interpolate, joint_norm, Domain, NormConfig, Radii, SepFunc};
use picard_lod::graded_core::{
    a_posteriori_bound, invert_locally, iterate_to_fixed_point, InverseSetup, LodConstants, RunStatus, ScalarSpace,
    StopRule, Verdict,
};
use picard_lod::linear_series::{
    burgers_demo, classify_convergence, example_catalog, growth_increment_model, picard_closed_form, series_solution,
    CatalogCase, GrowthClass, LinearProblem,
};
use picard_lod::picard_pde::{
    apply_p, certify_weissinger, estimate_lipschitz, initial_polynomial, lambda_recursion, solve, CauchyProblem,
    LambdaMode, LipschitzFactors, LipschitzMethod, NormSource, SolveConfig, SolveReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit,
        format!("runtime {:.2} s exceeds {limit} s", elapsed.as_secs_f64()),
    )
}

fn catalog_solve(name: &str, tbar: f64) -> Result<(SolveReport, picard_lod::linear_series::CatalogCase), String> {
    let c = example_catalog(name, tbar).map_err(e2s)?;
    let cp = c.problem.to_cauchy().map_err(e2s)?;
    let cfg = SolveConfig {
        norm_source: NormSource::Hybrid(growth_increment_model(&c.problem, &c.growth).map_err(e2s)?),
        lambda_mode: if c.problem.d > 1 { LambdaMode::Paper } else { LambdaMode::Conservative },
        store_iterates: true,
        ..SolveConfig::default()
    };
    Ok((solve(&cp, &cfg).map_err(e2s)?, c))
}

fn c1_norm_reproduction() -> Check {
    let start = Instant::now();
    let dom = Domain::new(0.0, 0.0, 0.5, vec![]).map_err(e2s)?;
    let one = SepFunc::constant(&dom, 0, &[1.0]);
    let prim = one.iterated_time_integral(1).map_err(e2s)?;
    let jp = joint_norm(&prim, 1).map_err(e2s)?;
    let rhs = dom.tbar() * joint_norm(&one, 1).map_err(e2s)?;
    ensure((jp - 1.0).abs() <= 1e-12, format!("joint norm {jp}"))?;
    ensure((rhs - 0.5).abs() <= 1e-12, format!("a·‖1‖_1 = {rhs}"))?;
    let gp = graded_norm(&prim, 1).map_err(e2s)?;
    let gr = dom.tbar() * graded_norm(&one, 1).map_err(e2s)?;
    ensure((gp - 0.5).abs() <= 1e-12 && gp <= gr + 1e-15, format!("graded {gp} vs {gr}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("joint {jp} > {rhs}; graded {gp} <= {gr}"))
}

fn c2_heat() -> Check {
    let start = Instant::now();
    let (rep, c) = catalog_solve("heat", 0.1)?;
    ensure(rep.status == RunStatus::Converged && rep.steps <= 10, format!("solve: {:?} in {} steps", rep.status, rep.steps))?;
    let ds = grid_distance(&rep.solution, &c.oracle, 64, None);
    let s = series_solution(&c.problem, 20, Some(&c.growth)).map_err(e2s)?;
    // Independent oracle: partial sums of e^{-t} sin x as a scalar series.
    let exp_series = |t: f64| (0..40).fold((0.0, 1.0), |(acc, term), k| (acc + term, term * (-t) / (k as f64 + 1.0))).0;
    let mut dseries = 0.0f64;
    for i in 0..=40 {
        let t = -0.1 + 0.2 * i as f64 / 40.0;
        for j in 0..=64 {
            let x = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / 64.0;
            let exact = exp_series(t) * x.sin();
            dseries = dseries.max((s.solution.eval(t, &[x])[0] - exact).abs());
        }
    }
    ensure(ds <= 1e-8, format!("solve distance {ds:e}"))?;
    ensure(dseries <= 1e-8, format!("series distance {dseries:e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("solve {ds:.2e} in {} steps, series {dseries:.2e}", rep.steps))
}

fn c3_transport() -> Check {
    let start = Instant::now();
    let c = example_catalog("transport", 0.5).map_err(e2s)?;
    let s = series_solution(&c.problem, 30, Some(&c.growth)).map_err(e2s)?;
    let d = grid_distance(&s.solution, &c.oracle, 64, Some(0.5));
    ensure(d <= 1e-10, format!("distance {d:e}"))?;
    within(start.elapsed(), 5.0)?;
    Ok(format!("series distance {d:.2e}"))
}

fn c4_wave() -> Check {
    let start = Instant::now();
    let (rep, c) = catalog_solve("wave", 0.5)?;
    ensure(rep.status == RunStatus::Converged, format!("solve: {:?}", rep.status))?;
    let d = grid_distance(&rep.solution, &c.oracle, 64, None);
    ensure(d <= 1e-8, format!("distance {d:e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("solve distance {d:.2e} in {} steps", rep.steps))
}

fn c5_verdict_table() -> Check {
    let start = Instant::now();
    let exp = GrowthClass::Exponential { c: 1.0, scale: 1.0 };
    let an = GrowthClass::Analytic { c: 1.0, scale: 1.0 };
    let sig = GrowthClass::Sigma { sigma: 1.5, scale: 1.0 };
    let mut cells = 0;
    for d in 1..=3usize {
        for l in 1..=3u32 {
            let p = model_problem(d, l, 0.25, "sin(x)");
            let v = classify_convergence(&p, &vec![exp; d], 0.25, 60).map_err(e2s)?.verdict;
            ensure(v == Verdict::Converged, format!("exponential d = {d}, L = {l}: {v:?}"))?;
            let p = model_problem(d, l, 0.1, "1/(1+x^2)");
            let v = classify_convergence(&p, &vec![an; d], 0.1, 60).map_err(e2s)?.verdict;
            let want = if d >= l as usize { Verdict::Converged } else { Verdict::Diverging };
            ensure(v == want, format!("analytic d = {d}, L = {l}: {v:?}"))?;
            cells += 2;
        }
    }
    for (d, want) in [(2usize, Verdict::Converged), (1, Verdict::Diverging)] {
        let p = model_problem(d, 1, 0.1, "sin(x)");
        let v = classify_convergence(&p, &vec![sig; d], 0.1, 60).map_err(e2s)?.verdict;
        ensure(v == want, format!("sigma d = {d}: {v:?}"))?;
        cells += 1;
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!("{cells} cells match"))
}

fn c6_kowalevski() -> Check {
    let start = Instant::now();
    let lp = model_problem(1, 2, 0.1, "1/(1+x^2)");
    let cp = lp.to_cauchy().map_err(e2s)?;
    let growth = [GrowthClass::Analytic { c: 1.0, scale: 1.0 }];
    let model = growth_increment_model(&lp, &growth).map_err(e2s)?;
    let factors = estimate_lipschitz(&cp, &Radii::infinite(), LipschitzMethod::LinearExact, 2, 0, 0).map_err(e2s)?;
    let cert = certify_weissinger(
        &cp,
        &factors,
        &[0, 1, 2],
        30,
        &NormSource::Hybrid(model),
        LambdaMode::Conservative,
        &NormConfig::default(),
    )
    .map_err(e2s)?;
    ensure(cert.verdict == Verdict::Diverging, format!("verdict {:?}", cert.verdict))?;
    let row = &cert.rows[0];
    let n = row.log_terms.len();
    ensure(
        row.log_terms[n - 10..].windows(2).all(|w| w[1] > w[0]),
        "terms do not increase at the end",
    )?;
    within(start.elapsed(), 5.0)?;
    Ok(format!("diverging: {}", cert.witness.unwrap_or_default()))
}

fn random_instance(rng: &mut ChaCha8Rng) -> Result<LinearProblem, String> {
    let d = rng.gen_range(1..=3usize);
    let l = rng.gen_range(1..=2u32);
    let gamma = rng.gen_range(0..d);
    let tbar = rng.gen_range(0.2..0.8);
    let dom = Domain::new(0.0, tbar, tbar, vec![[-1.0, 1.0]]).map_err(e2s)?;
    let coef = |rng: &mut ChaCha8Rng| (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0;
    let p = match rng.gen_range(0..3) {
        0 => format!("{}", coef(rng) + 1.5),
        1 => format!("{} + {}*t", coef(rng), coef(rng)),
        _ => format!("cos({}*t)", coef(rng) + 1.0),
    };
    let q = format!("{}*x^2 + {}*t", coef(rng), coef(rng));
    let y0: Vec<Vec<_>> = (0..d)
        .map(|_| {
            let (a, b, c) = (coef(rng), coef(rng), coef(rng));
            if a >= 0.0 {
                vec![ex(&format!("{a}*x^3 + {b}*x + {c}"))]
            } else {
                vec![ex(&format!("{a}*sin({b}*x + 1) + {c}*x"))]
            }
        })
        .collect();
    let qe = vec![ex(&q)];
    let qb = LinearProblem::measure_q_bound(&qe, &dom).map_err(e2s)?;
    LinearProblem::new(dom, d, gamma, vec![l], vec![vec![ex(&p)]], qe, qb, y0).map_err(e2s)
}

fn c7_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for inst in 0..10 {
        let lp = random_instance(&mut rng)?;
        let cp = lp.to_cauchy().map_err(e2s)?;
        let mut y = initial_polynomial(&cp).map_err(e2s)?;
        for n in 0..=6 {
            if n > 0 {
                y = apply_p(&cp, &y).map_err(e2s)?;
            }
            let cf = picard_closed_form(&lp, n).map_err(e2s)?;
            let dev = cf.max_coeff_diff(&y).map_err(e2s)?;
            ensure(
                dev <= 1e-10,
                format!("instance {inst} (d = {}, γ = {}, μ = {:?}), n = {n}: {dev:e}", lp.d, lp.gamma, lp.mu),
            )?;
            worst = worst.max(dev);
        }
    }
    within(start.elapsed(), 60.0)?;
    Ok(format!("10 instances, max deviation {worst:.2e}"))
}

/// Count of stored bounds and violations `(n, k, error, bound)` of
/// `error <= bound + 1e-9`, where `iterates[n]` approximates `P^n(i0)` and
/// `bounds[n][i]` bounds its error in `‖·‖_{ks[i]}`.
fn posteriori_violations(
    iterates: &[SepFunc],
    bounds: &[Vec<Option<f64>>],
    ks: &[usize],
    oracle: &SepFunc,
) -> Result<(Vec<(usize, usize, f64, f64)>, usize), String> {
    let mut bad = Vec::new();
    let mut checked = 0;
    for (n, row) in bounds.iter().enumerate() {
        for (i, b) in row.iter().enumerate() {
            let Some(b) = *b else { continue };
            let err = graded_norm(&oracle.sub(&iterates[n]).map_err(e2s)?, ks[i]).map_err(e2s)?;
            if err > b + 1e-9 {
                bad.push((n, ks[i], err, b));
            }
            checked += 1;
        }
    }
    Ok((bad, checked))
}

/// Partial sums of the series, which equal `P^n(i0)` for homogeneous
/// problems, with tails of the growth-model certificate.
fn series_run(c: &CatalogCase, n_max: usize) -> Result<(Vec<SepFunc>, Vec<Vec<Option<f64>>>), String> {
    let cp = c.problem.to_cauchy().map_err(e2s)?;
    let factors = estimate_lipschitz(&cp, &Radii::infinite(), LipschitzMethod::LinearExact, 2, 0, 0).map_err(e2s)?;
    let model = growth_increment_model(&c.problem, &c.growth).map_err(e2s)?;
    let mode = if c.problem.d > 1 { LambdaMode::Paper } else { LambdaMode::Conservative };
    let cert = certify_weissinger(&cp, &factors, &K_CHECK, 40, &NormSource::Hybrid(model), mode, &NormConfig::default())
        .map_err(e2s)?;
    let mut iterates = Vec::new();
    let mut bounds = Vec::new();
    for n in 0..=n_max {
        iterates.push(series_solution(&c.problem, n, None).map_err(e2s)?.solution);
        bounds.push(
            cert.rows
                .iter()
                .map(|r| (r.verdict == Verdict::Converged).then(|| r.tail(n).map(|t| t.total).ok()).flatten())
                .collect(),
        );
    }
    Ok((iterates, bounds))
}

const K_CHECK: [usize; 3] = [0, 1, 2];

fn c8_a_posteriori() -> Check {
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    let mut record = |label: String, bad: Vec<(usize, usize, f64, f64)>, n: usize| {
        if let Some(worst) = bad.iter().max_by(|a, b| (a.2 - a.3).total_cmp(&(b.2 - b.3))) {
            let ks: std::collections::BTreeSet<usize> = bad.iter().map(|v| v.1).collect();
            failures.push(format!(
                "{label}: {} of {n} bounds exceeded (k in {ks:?}); worst n = {}, k = {}: error {:.2e} vs bound {:.2e}",
                bad.len(),
                worst.0,
                worst.1,
                worst.2,
                worst.3
            ));
        }
    };
    for (name, tbar) in [("heat", 0.1), ("transport", 0.5), ("wave", 0.5)] {
        let (rep, c) = catalog_solve(name, tbar)?;
        let oracle = c.oracle_sepfunc().map_err(e2s)?;
        if rep.status == RunStatus::Converged {
            let bounds: Vec<Vec<Option<f64>>> =
                rep.posteriori.iter().map(|r| r.iter().map(|b| b.map(|b| b.total)).collect()).collect();
            let (bad, n) = posteriori_violations(&rep.iterates, &bounds, &rep.k_check, &oracle)?;
            ensure(n > 0, format!("{name}: no bounds available"))?;
            checked += n;
            record(format!("{name} solve"), bad, n);
        } else {
            notes.push(format!("{name} solve not converged, excluded"));
        }
        let (its, bounds) = series_run(&c, 12)?;
        let (bad, n) = posteriori_violations(&its, &bounds, &K_CHECK, &oracle)?;
        ensure(n > 0, format!("{name} series: no bounds available"))?;
        checked += n;
        record(format!("{name} series"), bad, n);
    }
    let geo = LodConstants::generator(0, |_, n| 0.5f64.powi(n as i32));
    let stop = StopRule {
        k_check: vec![0],
        tol: 1e-14,
        n_max: 100,
    };
    let mut p = |x: &f64| Ok(x / 2.0 + 1.0);
    let run = iterate_to_fixed_point(&ScalarSpace, &mut p, 0.0, &stop, None).map_err(e2s)?;
    let mut toy_ulps = 0.0f64;
    for (n, x) in run.iterates.iter().enumerate() {
        let b = a_posteriori_bound(&geo, &|_| Ok(1.0), 0, n, 80).map_err(e2s)?;
        let exact = 2f64.powi(1 - n as i32);
        let ulps = ((b.total - exact).abs() / (exact * f64::EPSILON)).round();
        toy_ulps = toy_ulps.max(ulps);
        ensure(
            (b.total - exact).abs() <= 1e-14 * exact,
            format!("toy bound at n = {n}: {} vs {exact}", b.total),
        )?;
        ensure((2.0 - x).abs() <= b.total + 1e-9, format!("toy error at n = {n}"))?;
        checked += 1;
    }
    notes.push(format!("toy bound within {toy_ulps} ulp of 2^(1-n)"));
    let notes = format!(" ({})", notes.join(", "));
    if failures.is_empty() {
        Ok(format!("{checked} (n, k) bounds hold{notes}"))
    } else {
        Err(format!("{}{notes}", failures.join("; ")))
    }
}

fn c9_lambda_consistency() -> Check {
    let lams: Vec<f64> = (0..16).map(|k| 1.0 + 0.5 * k as f64).collect();
    let mut worst = 0.0f64;
    for tbar in [0.3, 0.7, 1.0] {
        let dom = Domain::new(0.0, tbar, tbar, vec![[-1.0, 1.0]]).map_err(e2s)?;
        let fs: Vec<SepFunc> = lams
            .iter()
            .map(|v| Ok(interpolate(&[ex(&v.to_string())], &dom, &[0, 0], 0).map_err(e2s)?.0))
            .collect::<Result<_, String>>()?;
        let fun = LipschitzFactors::from_functions(fs).map_err(e2s)?;
        let con = LipschitzFactors::constant(&lams);
        for k in 0..=4 {
            for n in 0..=10 {
                let prod: f64 = (0..n).map(|j| lams[k + j]).product();
                let want = tbar.powi(n as i32) / (1..=n).map(|v| v as f64).product::<f64>() * prod;
                for f in [&fun, &con] {
                    let got = lambda_recursion(f, &dom, 1, 1, k, n).map_err(e2s)?.bar;
                    let rel = (got - want).abs() / want;
                    ensure(rel <= 1e-8, format!("T̄ = {tbar}, k = {k}, n = {n}: {got} vs {want}"))?;
                    worst = worst.max(rel);
                }
            }
        }
    }
    Ok(format!("max relative deviation {worst:.2e}"))
}

fn c10_inverse_toy() -> Check {
    let f = |x: &f64| Ok(x + x * x * x);
    let id = |x: &f64| Ok(*x);
    let r = 0.3;
    let setup = InverseSetup {
        f: &f,
        d: &id,
        s: &id,
        x0: 0.0,
        y: 0.05,
        radii: Radii::constant(r).map_err(e2s)?,
        alpha: vec![3.0 * r * r],
        delta: vec![1.0],
        l: 0,
        l_d: 0,
        s_data: None,
        probes: vec![0.1, -0.2],
        stop: StopRule {
            k_check: vec![0, 1, 2],
            tol: 1e-14,
            n_max: 200,
        },
    };
    let rep = invert_locally(&ScalarSpace, &setup).map_err(e2s)?;
    let (mut lo, mut hi) = (0.0f64, 0.1f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + mid.powi(3) < 0.05 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let err = (rep.solution - root).abs();
    ensure(err <= 1e-10, format!("solution off by {err:e}"))?;
    let rbar = rep.image_radii.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    ensure(rbar > 0.0, format!("image radius {rbar}"))?;
    ensure(rep.chain.iter().all(|c| c.inside), "an iterate left the ball")?;
    ensure(rep.run.iterates.iter().all(|x| x.abs() <= r), "an iterate left B_r(0)")?;
    Ok(format!("root {root:.12}, error {err:.1e}, r̄ = {rbar:.3}"))
}

fn c11_burgers() -> Check {
    let ln_mm = |m: usize| if m == 0 { 0.0 } else { m as f64 * (m as f64).ln() };
    let radius = |m: usize| 1.0 + ln_mm(m).exp();
    let increment = |m: usize| 0.1 * ln_mm(m).exp() * ln_mm(m + 1).exp();
    let cert = burgers_demo(1, 1, 0.1, &[0, 1, 2], 20, &radius, &increment).map_err(e2s)?;
    ensure(cert.verdict == Verdict::Diverging, format!("verdict {:?}", cert.verdict))?;
    let w = cert.witness.ok_or("no witness")?;
    ensure(w.n <= 20 && w.ln_term > w.ln_hyperfactorial, format!("witness {w:?}"))?;
    Ok(format!(
        "diverging; at n = {} ln term {:.1} exceeds ln H(n-1) = {:.1}",
        w.n, w.ln_term, w.ln_hyperfactorial
    ))
}

fn c12_ode() -> Check {
    let mut cells = 0;
    for lam0 in [0.5, 1.0, 2.0, 5.0] {
        for tbar in [0.1, 0.5, 1.0, 2.0] {
            let dom = Domain::new(0.0, tbar, tbar, vec![]).map_err(e2s)?;
            let cp = CauchyProblem::scalar(dom, 1, 0, 0, &format!("{lam0}*y"), &["1"]).map_err(e2s)?;
            let f = LipschitzFactors::constant(&[lam0]);
            let cert = certify_weissinger(
                &cp,
                &f,
                &[0, 1, 2],
                100,
                &NormSource::Numeric,
                LambdaMode::Conservative,
                &NormConfig::default(),
            )
            .map_err(e2s)?;
            ensure(
                cert.verdict == Verdict::Converged,
                format!("Λ0 = {lam0}, T̄ = {tbar}: {:?}", cert.verdict),
            )?;
            cells += 1;
        }
    }
    Ok(format!("{cells} (Λ0, T̄) pairs converged"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("norm reproduction on [0, 1/2]", c1_norm_reproduction),
        ("heat equation against e^-t sin x", c2_heat),
        ("transport series against sin(x + t)", c3_transport),
        ("wave equation against cos t sin x", c4_wave),
        ("growth-class verdict table", c5_verdict_table),
        ("Kowalevski divergence", c6_kowalevski),
        ("closed form equals Picard iterates", c7_oracle_equivalence),
        ("a posteriori bounds", c8_a_posteriori),
        ("lambda bar consistency", c9_lambda_consistency),
        ("inverse-function toy", c10_inverse_toy),
        ("Burgers-type divergence", c11_burgers),
        ("ODE regression", c12_ode),
    ];
    let total = Instant::now();
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = run();
        let ms = start.elapsed().as_millis();
        match &res {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({ms} ms)", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why} ({ms} ms)", i + 1);
                failed.push(i + 1);
            }
        }
    }
    println!("acceptance wall clock {:.1} s", total.elapsed().as_secs_f64());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
