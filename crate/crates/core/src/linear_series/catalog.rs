//! Worked examples with closed-form solutions, the parameter-limit
//! experiment and the Burgers divergence demo.

use std::f64::consts::PI;

use serde::Serialize;

use super::growth::ln_fact;
use super::{grid_max, series_solution, x_derivative, GrowthClass, LinearError, LinearProblem};
use crate::expr::{parse_expression, Arity, Expr};
use crate::funcspace::{cheb, interpolate_adaptive, Domain, SepFunc};
use crate::graded_core::{Verdict, VerdictRule, WeissingerRow};

/// Terms used when testing the majorant of the parameter-limit premise.
const MAJORANT_TERMS: usize = 60;

pub const CATALOG_NAMES: &[&str] = &["heat", "heat_poly", "wave", "transport", "mixed_dt_dx", "dt2_dx"];

/// A catalog problem with its exact solution.
#[derive(Debug, Clone)]
pub struct CatalogCase {
    pub name: &'static str,
    pub description: &'static str,
    pub problem: LinearProblem,
    /// Exact solution in `(t, x)`.
    pub oracle: Expr,
    pub growth: Vec<GrowthClass>,
}

impl CatalogCase {
    pub fn oracle_sepfunc(&self) -> Result<SepFunc, LinearError> {
        Ok(interpolate_adaptive(
            std::slice::from_ref(&self.oracle),
            &self.problem.domain,
            self.problem.gamma,
        )?)
    }
}

struct Spec {
    name: &'static str,
    description: &'static str,
    d: usize,
    gamma: usize,
    mu: u32,
    y0: &'static [&'static str],
    oracle: &'static str,
    growth: &'static [GrowthClass],
}

const EXP1: GrowthClass = GrowthClass::Exponential { c: 1.0, scale: 1.0 };
const EXP_PI: GrowthClass = GrowthClass::Exponential { c: 1.0, scale: PI };
const EXP_PI2: GrowthClass = GrowthClass::Exponential { c: 1.0, scale: PI * PI };

const SPECS: &[Spec] = &[
    Spec {
        name: "heat",
        description: "∂_t y = ∂_x² y, y(0) = sin x",
        d: 1,
        gamma: 0,
        mu: 2,
        y0: &["sin(x)"],
        oracle: "exp(-t)*sin(x)",
        growth: &[EXP1],
    },
    Spec {
        name: "heat_poly",
        description: "∂_t y = ∂_x² y, y(0) = x²",
        d: 1,
        gamma: 0,
        mu: 2,
        y0: &["x^2"],
        oracle: "x^2 + 2*t",
        growth: &[EXP_PI2],
    },
    Spec {
        name: "wave",
        description: "∂_t² y = ∂_x² y, y(0) = sin x, ∂_t y(0) = 0",
        d: 2,
        gamma: 0,
        mu: 2,
        y0: &["sin(x)", "0"],
        oracle: "cos(t)*sin(x)",
        growth: &[EXP1, EXP1],
    },
    Spec {
        name: "transport",
        description: "∂_t y = ∂_x y, y(0) = sin x",
        d: 1,
        gamma: 0,
        mu: 1,
        y0: &["sin(x)"],
        oracle: "sin(x + t)",
        growth: &[EXP1],
    },
    Spec {
        name: "mixed_dt_dx",
        description: "∂_t² y = ∂_t ∂_x y, y(0) = 0, ∂_t y(0) = x",
        d: 2,
        gamma: 1,
        mu: 1,
        y0: &["0", "x"],
        oracle: "x*t + t^2/2",
        growth: &[GrowthClass::Free, EXP_PI],
    },
    Spec {
        name: "dt2_dx",
        description: "∂_t² y = ∂_x y, y(0) = x², ∂_t y(0) = 0",
        d: 2,
        gamma: 0,
        mu: 1,
        y0: &["x^2", "0"],
        oracle: "x^2 + x*t^2 + t^4/12",
        growth: &[EXP_PI2, EXP1],
    },
];

/// Catalog problem `name` on `T = [−T̄, T̄]`, `S = [−π, π]`.
pub fn example_catalog(name: &str, tbar: f64) -> Result<CatalogCase, LinearError> {
    let spec = SPECS
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| LinearError::UnknownCase(name.to_string()))?;
    let dm = Domain::new(0.0, tbar, tbar, vec![[-PI, PI]])?;
    let ar = Arity::space_time(1);
    let y0 = spec
        .y0
        .iter()
        .map(|s| Ok(vec![parse_expression(s, &Arity::spatial(1))?]))
        .collect::<Result<Vec<_>, LinearError>>()?;
    let problem = LinearProblem::new(
        dm,
        spec.d,
        spec.gamma,
        vec![spec.mu],
        vec![vec![Expr::c(1.0)]],
        vec![Expr::c(0.0)],
        0.0,
        y0,
    )?;
    Ok(CatalogCase {
        name: spec.name,
        description: spec.description,
        problem,
        oracle: parse_expression(spec.oracle, &ar)?,
        growth: spec.growth.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRow {
    pub eps: f64,
    /// Grid sup of `|S_N(ε) − S_N(0)|`.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub rows: Vec<LimitRow>,
    /// A summable majorant of the weighted terms exists uniformly in `ε`.
    pub premise_ok: bool,
    pub majorant_verdict: Verdict,
    pub warnings: Vec<String>,
}

/// Weighted term sizes `Σ_j sup|∂^{hμ} y_{0j}| ‖p‖^h T̄^{h(d−γ)} / ((d−γ)!)^h`
/// for `h = 1..=n`.
fn weighted_terms(lp: &LinearProblem, n: usize) -> Result<Vec<f64>, LinearError> {
    let pn = lp.p_norm()?;
    let (d, g) = (lp.d, lp.gamma);
    let tbar = lp.domain.tbar();
    let grid: Vec<Vec<f64>> = (0..lp.domain.dims())
        .map(|dim| {
            if dim == 0 {
                return vec![lp.domain.t0];
            }
            let (lo, hi) = lp.domain.interval(dim);
            cheb::lobatto(33).into_iter().map(|u| cheb::from_unit(u, lo, hi)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for h in 1..=n {
        let nu = lp.hmu(h);
        let mut sup = 0.0;
        for row in &lp.y0[g..] {
            for e in row {
                sup += grid_max(&x_derivative(e, &nu), &grid)?;
            }
        }
        let w = (pn * tbar.powi((d - g) as i32)).powi(h as i32) / (ln_fact(d - g) * h as f64).exp();
        out.push(sup * w);
    }
    Ok(out)
}

/// Distances between `N`-term series for each `ε` and for `ε = 0`, with a
/// check that the weighted terms are dominated by a summable sequence
/// uniformly over the sampled `ε`.
pub fn parameter_limit_experiment(
    family: &dyn Fn(f64) -> Result<LinearProblem, LinearError>,
    eps: &[f64],
    n_terms: usize,
) -> Result<LimitReport, LinearError> {
    let base = family(0.0)?;
    let reference = series_solution(&base, n_terms, None)?.solution;
    let grid: Vec<Vec<f64>> = (0..base.domain.dims())
        .map(|dim| {
            let (lo, hi) = base.domain.interval(dim);
            cheb::lobatto(64).into_iter().map(|u| cheb::from_unit(u, lo, hi)).collect()
        })
        .collect();
    let n_major = n_terms.max(MAJORANT_TERMS);
    let mut majorant = weighted_terms(&base, n_major)?;
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        let lp = family(e)?;
        for (m, w) in majorant.iter_mut().zip(weighted_terms(&lp, n_major)?) {
            *m = m.max(w);
        }
        let s = series_solution(&lp, n_terms, None)?.solution;
        let mut dist = 0.0f64;
        for h in 0..base.m {
            let a = s.values_on_grid(h, &grid);
            let b = reference.values_on_grid(h, &grid);
            for (x, y) in a.iter().zip(&b) {
                dist = dist.max((x - y).abs());
            }
        }
        rows.push(LimitRow { eps: e, distance: dist });
    }
    let logs: Vec<f64> = majorant.iter().map(|v| v.ln()).collect();
    let (majorant_verdict, _) = crate::graded_core::verdict_of(&logs, &VerdictRule::default());
    let mut warnings = Vec::new();
    if majorant_verdict != Verdict::Converged {
        warnings.push(format!(
            "weighted terms are not dominated by a summable sequence ({majorant_verdict:?}); the limit may not commute with the series"
        ));
    }
    Ok(LimitReport {
        rows,
        premise_ok: majorant_verdict == Verdict::Converged,
        majorant_verdict,
        warnings,
    })
}

/// `ln Λ̄_{k,n}` exceeds the hyperfactorial lower bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperWitness {
    pub k: usize,
    pub n: usize,
    pub ln_term: f64,
    /// `ln H(n−1) = Σ_{j<n} j ln j`.
    pub ln_hyperfactorial: f64,
    pub ln_factorial_nd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BurgersCertificate {
    pub d: usize,
    pub l: usize,
    pub tbar: f64,
    pub rows: Vec<WeissingerRow>,
    pub ln_lambda_bar: Vec<Vec<f64>>,
    pub verdict: Verdict,
    pub witness: Option<HyperWitness>,
}

/// Weissinger certificate for `∂_t^d y = y ∂_x^μ y` with
/// `Λ̄_{k,n} = T̄^{nd}/(nd)! · 2ⁿ · Π_{j<n} radius(k + jL)` and increments
/// `increment(k + nL)`. `radius(m)` models `r_m + ‖i0‖_m`.
pub fn burgers_demo(
    d: usize,
    l: usize,
    tbar: f64,
    k_list: &[usize],
    n_max: usize,
    radius: &dyn Fn(usize) -> f64,
    increment: &dyn Fn(usize) -> f64,
) -> Result<BurgersCertificate, LinearError> {
    let mut rows = Vec::with_capacity(k_list.len());
    let mut lambdas = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let mut ln_prod = 0.0;
        let mut lam = Vec::with_capacity(n_max + 1);
        let mut logs = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            if n > 0 {
                ln_prod += radius(k + (n - 1) * l).ln();
            }
            let ln_lam = if n == 0 {
                0.0
            } else {
                (n * d) as f64 * tbar.ln() - ln_fact(n * d) + n as f64 * 2f64.ln() + ln_prod
            };
            lam.push(ln_lam);
            logs.push(ln_lam + increment(k + n * l).ln());
        }
        rows.push(WeissingerRow::from_log_terms(k, logs, VerdictRule::default())?);
        lambdas.push(lam);
    }
    let verdict = crate::picard_pde::combine_verdicts(rows.iter().map(|r| r.verdict));
    let witness = rows.iter().find(|r| r.verdict == Verdict::Diverging).map(|r| {
        let n = n_max;
        HyperWitness {
            k: r.k,
            n,
            ln_term: r.log_terms[n],
            ln_hyperfactorial: (1..n).map(|j| j as f64 * (j as f64).ln()).sum(),
            ln_factorial_nd: ln_fact(n * d),
        }
    });
    Ok(BurgersCertificate {
        d,
        l,
        tbar,
        rows,
        ln_lambda_bar: lambdas,
        verdict,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Bindings, Var};

    #[test]
    fn catalog_series_match_oracles() {
        for name in CATALOG_NAMES {
            let case = example_catalog(name, 0.5).unwrap();
            let s = series_solution(&case.problem, 20, Some(&case.growth)).unwrap();
            for &(t, x) in &[(0.5, 1.0), (-0.4, -2.5), (0.1, 0.0)] {
                let want = case.oracle.eval(&Bindings::new().with(Var::T, t).with(Var::X(0), x)).unwrap();
                let got = s.solution.eval(t, &[x])[0];
                assert!((got - want).abs() < 1e-10, "{name}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn burgers_diverges_with_hyperfactorial_growth() {
        let model = |m: usize| if m == 0 { 1.0 } else { (m as f64).powf(m as f64) };
        let c = burgers_demo(1, 1, 0.1, &[0, 1], 20, &model, &model).unwrap();
        assert_eq!(c.verdict, Verdict::Diverging);
        let w = c.witness.unwrap();
        assert!(w.ln_term > w.ln_hyperfactorial - w.ln_factorial_nd - 20.0);
        let zero = burgers_demo(1, 1, 0.1, &[0], 20, &|_| 1e-3, &|_| 0.0).unwrap();
        assert_eq!(zero.verdict, Verdict::Converged);
    }

    #[test]
    fn parameter_limit_distances_shrink() {
        let family = |e: f64| {
            let case = example_catalog("heat", 0.5)?;
            let mut lp = case.problem;
            lp.p = vec![vec![Expr::c(1.0 + e)]];
            Ok(lp)
        };
        let r = parameter_limit_experiment(&family, &[0.1, 0.01, 0.001], 20).unwrap();
        assert!(r.premise_ok, "{:?}", r.warnings);
        assert!(r.rows.windows(2).all(|w| w[1].distance < w[0].distance));
    }
}
