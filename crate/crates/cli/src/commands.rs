//! Subcommand implementations.

use anyhow::{anyhow, bail, Result};
use picard_lod::expr::{Bindings, Expr, Var};
use picard_lod::funcspace::{cheb, Domain, Radius, SepFunc};
use picard_lod::graded_core::{RunStatus, Verdict};
use picard_lod::linear_series::{
    burgers_demo, example_catalog, growth_increment_model, picard_closed_form, series_solution,
    GrowthClass, LinearError, LinearProblem,
};
use picard_lod::picard_pde::{
    apply_p, certify_weissinger, estimate_lipschitz, initial_polynomial, residual, solve, CauchyProblem,
    LambdaMode, LipschitzMethod, NormSource, PdeError, Residual, SolveConfig,
};
use serde::Serialize;

use crate::problem::{burgers_form, ProblemFile};
use crate::report::Sink;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    Diverging,
    Inconclusive,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Converged => 0,
            Outcome::Diverging => 2,
            Outcome::Inconclusive => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Converged => "converged",
            Outcome::Diverging => "diverging",
            Outcome::Inconclusive => "inconclusive",
        }
    }

    fn of(v: Verdict) -> Self {
        match v {
            Verdict::Converged => Outcome::Converged,
            Verdict::Diverging => Outcome::Diverging,
            Verdict::Inconclusive => Outcome::Inconclusive,
        }
    }
}

fn lobatto_grid(domain: &Domain, counts: &[usize]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .enumerate()
        .map(|(dim, &n)| {
            let (lo, hi) = domain.interval(dim);
            if n <= 1 {
                return vec![0.5 * (lo + hi)];
            }
            cheb::lobatto(n).into_iter().map(|u| cheb::from_unit(u, lo, hi)).collect()
        })
        .collect()
}

fn grid_points(grid: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in grid {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Grid sup of `|f − oracle|` on the first component.
fn oracle_distance(f: &SepFunc, oracle: &Expr) -> Result<f64> {
    let counts = vec![64; f.domain.dims()];
    let grid = lobatto_grid(&f.domain, &counts);
    let vals = f.values_on_grid(0, &grid);
    let mut worst = 0.0f64;
    for (pt, v) in grid_points(&grid).iter().zip(vals) {
        let mut b = Bindings::new().with(Var::T, pt[0]);
        for (i, x) in pt[1..].iter().enumerate() {
            b.set(Var::X(i), *x);
        }
        worst = worst.max((v - oracle.eval(&b)?).abs());
    }
    Ok(worst)
}

fn solution_table(sink: &Sink, f: &SepFunc, counts: &[usize]) -> Result<()> {
    if counts.len() != f.domain.dims() {
        bail!("solver.degrees needs {} entries (time first)", f.domain.dims());
    }
    let grid = lobatto_grid(&f.domain, counts);
    let comps: Vec<Vec<f64>> = (0..f.m).map(|h| f.values_on_grid(h, &grid)).collect();
    let rows: Vec<Vec<f64>> = grid_points(&grid)
        .into_iter()
        .enumerate()
        .map(|(i, mut p)| {
            p.extend(comps.iter().map(|c| c[i]));
            p
        })
        .collect();
    let mut header = vec!["t".to_string()];
    header.extend((1..f.domain.dims()).map(|i| format!("x{i}")));
    header.extend((1..=f.m).map(|h| format!("y{h}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.csv(".values", &refs, &rows)?;
    Ok(())
}

/// Growth-model increments for linear problems; `None` otherwise.
fn growth_source(pf: &ProblemFile, cp: &CauchyProblem, notes: &mut Vec<String>) -> Result<Option<NormSource>> {
    let Some(g) = &pf.growth else { return Ok(None) };
    match LinearProblem::from_cauchy(cp, pf.forcing_bound) {
        Ok(lp) => Ok(Some(NormSource::Hybrid(growth_increment_model(&lp, g)?))),
        Err(LinearError::NotLinearClass(why)) => {
            notes.push(format!("growth classes ignored: {why}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct DivergingSolve<'a> {
    certificate: &'a picard_lod::picard_pde::LodCertificate,
    notes: &'a [String],
}

pub fn cmd_solve(pf: &ProblemFile, sink: &Sink, certify_first: bool, paper: bool) -> Result<Outcome> {
    let cp = pf.cauchy()?;
    let mut notes = Vec::new();
    let mut cfg = SolveConfig {
        radii: pf.radii()?,
        k_check: pf.solver.k_check.clone(),
        tol: pf.solver.tol,
        n_max: pf.solver.n_max,
        certify_first,
        lambda_mode: if paper { LambdaMode::Paper } else { LambdaMode::Conservative },
        sample_seed: pf.solver.seed,
        ..SolveConfig::default()
    };
    if let Some(src) = growth_source(pf, &cp, &mut notes)? {
        cfg.norm_source = src;
    }
    match solve(&cp, &cfg) {
        Ok(mut rep) => {
            rep.notes.extend(notes);
            let outcome = match &rep.certificate {
                Some(c) if c.verdict == Verdict::Diverging => Outcome::Diverging,
                _ if rep.status == RunStatus::Converged => Outcome::Converged,
                _ => Outcome::Inconclusive,
            };
            let path = sink.json(outcome.label(), &rep)?;
            let mut header = vec!["n".to_string()];
            header.extend(rep.k_check.iter().map(|k| format!("increment_k{k}")));
            let refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<f64>> = rep
                .increments
                .iter()
                .enumerate()
                .map(|(n, r)| std::iter::once(n as f64).chain(r.iter().copied()).collect())
                .collect();
            sink.csv("", &refs, &rows)?;
            sink.text(".solution.json", &(rep.solution.to_json()? + "\n"))?;
            if let Some(counts) = &pf.solver.degrees {
                solution_table(sink, &rep.solution, counts)?;
            }
            println!(
                "{}: {} steps, residual {:.3e}; report {}",
                outcome.label(),
                rep.steps,
                rep.residual.pde_residual,
                path.display()
            );
            Ok(outcome)
        }
        Err(PdeError::Diverging(cert)) => {
            let path = sink.json("diverging", &DivergingSolve { certificate: &cert, notes: &notes })?;
            println!(
                "diverging certificate: {}; report {}",
                cert.witness.as_deref().unwrap_or("terms increase"),
                path.display()
            );
            Ok(Outcome::Diverging)
        }
        Err(e) => Err(e.into()),
    }
}

fn certify_burgers(pf: &ProblemFile, cp: &CauchyProblem, mu: &[u32], sink: &Sink, n_max: usize) -> Result<Outcome> {
    let growth = pf
        .growth
        .as_ref()
        .ok_or_else(|| anyhow!("the y·∂_x^μ y certificate needs growth classes for the initial data"))?;
    let radii = pf.radii()?;
    let tbar = cp.domain.tbar();
    let classes: Vec<GrowthClass> = growth.iter().take(cp.d).copied().collect();
    for g in &classes {
        g.validate()?;
    }
    let center = move |m: usize| -> f64 {
        classes
            .iter()
            .enumerate()
            .map(|(j, g)| g.model(m).unwrap_or(0.0) * tbar.powi(j as i32) / (1..=j).product::<usize>() as f64)
            .sum()
    };
    let r = |m: usize| match radii.get(m) {
        Radius::Finite(v) => Ok(v),
        Radius::Infinite(_) => Err(anyhow!("the y·∂_x^μ y certificate needs finite radii")),
    };
    let top = pf.solver.k_check.iter().max().copied().unwrap_or(0) + (n_max + 1) * cp.l;
    let rs = (0..=top).map(r).collect::<Result<Vec<f64>>>()?;
    let l: usize = mu.iter().sum::<u32>() as usize;
    let d = cp.d;
    let dfact: f64 = (1..=d).map(|v| v as f64).product();
    let radius = |m: usize| rs[m.min(rs.len() - 1)] + center(m);
    let increment =
        |m: usize| tbar.powi(d as i32) / dfact * 2f64.powi(m as i32) * center(m) * center(m + l);
    let cert = burgers_demo(d, l, tbar, &pf.solver.k_check, n_max, &radius, &increment)?;
    let outcome = Outcome::of(cert.verdict);
    let path = sink.json(outcome.label(), &cert)?;
    let mut rows = Vec::new();
    for (row, lam) in cert.rows.iter().zip(&cert.ln_lambda_bar) {
        for (n, (lt, ll)) in row.log_terms.iter().zip(lam).enumerate() {
            rows.push(vec![row.k as f64, n as f64, *ll, *lt]);
        }
    }
    sink.csv("", &["k", "n", "ln_lambda_bar", "ln_term"], &rows)?;
    match &cert.witness {
        Some(w) => println!(
            "{}: ln term {:.2} at n = {} vs ln H(n-1) = {:.2}; report {}",
            outcome.label(),
            w.ln_term,
            w.n,
            w.ln_hyperfactorial,
            path.display()
        ),
        None => println!("{}; report {}", outcome.label(), path.display()),
    }
    Ok(outcome)
}

pub fn cmd_certify(pf: &ProblemFile, sink: &Sink, mode: LambdaMode, n_max: usize) -> Result<Outcome> {
    let cp = pf.cauchy()?;
    if let Some(mu) = burgers_form(&cp) {
        if pf.growth.is_some() {
            return certify_burgers(pf, &cp, &mu, sink, n_max);
        }
    }
    let radii = pf.radii()?;
    let k_list = pf.solver.k_check.clone();
    let k_max = k_list.iter().max().copied().unwrap_or(0);
    let factors = match estimate_lipschitz(&cp, &radii, LipschitzMethod::LinearExact, k_max, 0, 0) {
        Ok(f) => f,
        Err(PdeError::NotLinear(_)) => {
            estimate_lipschitz(&cp, &radii, LipschitzMethod::Sampled, k_max, 64, pf.solver.seed)?
        }
        Err(e) => return Err(e.into()),
    };
    let mut notes = Vec::new();
    let source = growth_source(pf, &cp, &mut notes)?.unwrap_or(NormSource::Numeric);
    let cfg = picard_lod::funcspace::NormConfig::default();
    let mut n = n_max;
    if matches!(source, NormSource::Numeric) && cp.l > 0 {
        let fit = cfg.k_cap.saturating_sub(k_max) / cp.l;
        if fit < n {
            notes.push(format!("numeric norms reach index {}; certificate truncated to n <= {fit}", cfg.k_cap));
            n = fit;
        }
    }
    let mut cert = certify_weissinger(&cp, &factors, &k_list, n, &source, mode, &cfg)?;
    cert.notes.extend(notes);
    let outcome = Outcome::of(cert.verdict);
    let path = sink.json(outcome.label(), &cert)?;
    let mut rows = Vec::new();
    for (i, row) in cert.rows.iter().enumerate() {
        for n in 0..row.terms.len() {
            rows.push(vec![
                row.k as f64,
                n as f64,
                cert.ln_lambda_bar[i][n],
                cert.increments[i][n],
                row.terms[n],
                row.partial_sums[n],
            ]);
        }
    }
    sink.csv("", &["k", "n", "ln_lambda_bar", "increment", "term", "partial_sum"], &rows)?;
    println!("{}; report {}", outcome.label(), path.display());
    Ok(outcome)
}

#[derive(Serialize)]
struct SeriesReport<'a> {
    series: &'a picard_lod::linear_series::SeriesSolution,
    residual: Residual,
    oracle_distance: Option<f64>,
}

pub fn cmd_series(pf: &ProblemFile, sink: &Sink, terms: usize) -> Result<Outcome> {
    let lp = pf
        .linear()
        .map_err(|e| anyhow!("series needs a problem of the form p(t) ∂_x^μ ∂_t^γ y + q(t, x): {e}"))?;
    let cp = lp.to_cauchy()?;
    let s = match series_solution(&lp, terms, pf.growth.as_deref()) {
        Ok(s) => s,
        Err(LinearError::Diverging(why)) => {
            #[derive(Serialize)]
            struct Div<'a> {
                reason: &'a str,
            }
            let path = sink.json("diverging", &Div { reason: &why })?;
            println!("diverging: {why}; report {}", path.display());
            return Ok(Outcome::Diverging);
        }
        Err(e) => return Err(e.into()),
    };
    let oracle_distance = pf.oracle()?.map(|o| oracle_distance(&s.solution, &o)).transpose()?;
    let outcome = match &s.classification {
        Some(c) if c.verdict == Verdict::Inconclusive => Outcome::Inconclusive,
        _ => Outcome::Converged,
    };
    let rep = SeriesReport {
        series: &s,
        residual: residual(&cp, &s.solution)?,
        oracle_distance,
    };
    let path = sink.json(outcome.label(), &rep)?;
    let rows: Vec<Vec<f64>> = s
        .term_norms
        .iter()
        .enumerate()
        .map(|(h, v)| vec![(h + 1) as f64, *v])
        .collect();
    sink.csv("", &["h", "term_sup_norm"], &rows)?;
    sink.text(".solution.json", &(s.solution.to_json()? + "\n"))?;
    println!("{} terms, last term {:.3e}; report {}", s.terms, s.last_term, path.display());
    Ok(outcome)
}

#[derive(Serialize)]
struct CompareRow {
    n: usize,
    max_coeff_deviation: f64,
}

#[derive(Serialize)]
struct CompareReport {
    against: String,
    tolerance: f64,
    rows: Vec<CompareRow>,
    max_deviation: f64,
    oracle_distance: Option<f64>,
}

pub const COMPARE_TOL: f64 = 1e-10;

pub fn cmd_compare(pf: &ProblemFile, sink: &Sink, against: &str, terms: usize) -> Result<Outcome> {
    let lp = pf
        .linear()
        .map_err(|e| anyhow!("compare needs a problem of the form p(t) ∂_x^μ ∂_t^γ y + q(t, x): {e}"))?;
    let mut rows = Vec::new();
    let mut oracle_dist = None;
    match against {
        "generic" => {
            let cp = lp.to_cauchy()?;
            let mut y = initial_polynomial(&cp)?;
            for n in 0..=terms {
                if n > 0 {
                    y = apply_p(&cp, &y)?;
                }
                let cf = picard_closed_form(&lp, n)?;
                rows.push(CompareRow {
                    n,
                    max_coeff_deviation: cf.max_coeff_diff(&y)?,
                });
            }
        }
        "oracle" => {
            let oracle = pf.oracle()?.ok_or_else(|| anyhow!("compare --against oracle needs an `oracle` entry"))?;
            let s = series_solution(&lp, terms, pf.growth.as_deref())?;
            oracle_dist = Some(oracle_distance(&s.solution, &oracle)?);
        }
        other => bail!("unknown comparison target `{other}` (expected generic or oracle)"),
    }
    let max_deviation = rows
        .iter()
        .map(|r| r.max_coeff_deviation)
        .chain(oracle_dist)
        .fold(0.0, f64::max);
    let outcome = if max_deviation <= COMPARE_TOL {
        Outcome::Converged
    } else {
        Outcome::Inconclusive
    };
    let table: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.n as f64, r.max_coeff_deviation]).collect();
    let rep = CompareReport {
        against: against.to_string(),
        tolerance: COMPARE_TOL,
        rows,
        max_deviation,
        oracle_distance: oracle_dist,
    };
    let path = sink.json(outcome.label(), &rep)?;
    if !table.is_empty() {
        sink.csv("", &["n", "max_coeff_deviation"], &table)?;
    }
    println!("max deviation {max_deviation:.3e}; report {}", path.display());
    Ok(outcome)
}

#[derive(Serialize)]
struct DemoReport {
    case: String,
    description: String,
    tbar: f64,
    terms: usize,
    series_oracle_distance: f64,
    series_last_term: f64,
    solve_steps: usize,
    solve_oracle_distance: f64,
    solve_residual: f64,
    tolerance: f64,
}

pub const DEMO_TOL: f64 = 1e-8;

pub fn cmd_demo(case: &str, sink: &Sink, tbar: f64, terms: usize) -> Result<Outcome> {
    let c = example_catalog(case, tbar)?;
    let s = series_solution(&c.problem, terms, Some(&c.growth))?;
    let series_d = oracle_distance(&s.solution, &c.oracle)?;
    let cp = c.problem.to_cauchy()?;
    let cfg = SolveConfig {
        norm_source: NormSource::Hybrid(growth_increment_model(&c.problem, &c.growth)?),
        lambda_mode: if c.problem.d > 1 { LambdaMode::Paper } else { LambdaMode::Conservative },
        ..SolveConfig::default()
    };
    let rep = solve(&cp, &cfg)?;
    let solve_d = oracle_distance(&rep.solution, &c.oracle)?;
    let outcome = if series_d.max(solve_d) <= DEMO_TOL {
        Outcome::Converged
    } else {
        Outcome::Inconclusive
    };
    let demo = DemoReport {
        case: c.name.to_string(),
        description: c.description.to_string(),
        tbar,
        terms,
        series_oracle_distance: series_d,
        series_last_term: s.last_term,
        solve_steps: rep.steps,
        solve_oracle_distance: solve_d,
        solve_residual: rep.residual.pde_residual,
        tolerance: DEMO_TOL,
    };
    let path = sink.json(outcome.label(), &demo)?;
    println!(
        "{case}: series distance {series_d:.3e}, solve distance {solve_d:.3e} in {} steps; report {}",
        rep.steps,
        path.display()
    );
    Ok(outcome)
}
