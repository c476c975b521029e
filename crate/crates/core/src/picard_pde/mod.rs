//! Picard–Lindelöf iteration for Cauchy problems in normal form
//!
//! ```text
//! ∂_t^d y = F[t, x, (∂_x^α ∂_t^γ y)_{|α| ≤ L, γ ≤ p}],   ∂_t^j y(t0, x) = y_{0j}(x),
//! ```
//!
//! with `P(y) = i0 + I^d[G(y)]`, where `i0` is the initial polynomial, `I^d`
//! the `d`-fold time integral from `t0` and `G(y) = F[t, x, (∂ y)]`.

mod bounds;
mod certify;
mod lipschitz;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse_expression, Arity, Expr, ExprError, PointEnv, Var};
use crate::funcspace::{
    cheb, graded_norm_with, graded_norms_upto, interpolate_adaptive, sample_exprs, Adaptive,
    Cheb1, Domain, FuncError, NormConfig, SepFunc, DEGREE_CAP,
};
use crate::graded_core::{CoreError, GradedSpace, Verdict};

pub use bounds::{check_ball_invariance, constant_bounds, BallInvariance, InvarianceEntry, MBound};
pub use certify::{
    certify_weissinger, solve, FactorChoice, IncrementModel, LodCertificate, NormSource,
    SolveConfig, SolveReport,
};
pub use lipschitz::{
    estimate_lipschitz, lambda_recursion, ln_lambda_bar_row, FactorMode, LambdaMode, LambdaPath,
    LambdaValue, LipschitzFactors, LipschitzMethod, SamplingMeta, LAMBDA_FLOOR,
};

#[derive(Debug, Error)]
pub enum PdeError {
    #[error(transparent)]
    Func(#[from] FuncError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("right-hand side is not linear with x-independent coefficients: {0}")]
    NotLinear(String),
    #[error("radius r_{k} is infinite; a finite radius is required here")]
    InfiniteRadius { k: usize },
    #[error("no usable Lipschitz sample (all probe pairs coincide)")]
    EmptySample,
    #[error("norm index {index} exceeds the numeric cap {cap}; supply a growth model")]
    MissingGrowthModel { index: usize, cap: usize },
    #[error("iterate {n} left the ball at k = {k}: distance {distance} > radius {radius}")]
    BallEscape {
        n: usize,
        k: usize,
        distance: f64,
        radius: f64,
    },
    #[error("Weissinger certificate is diverging")]
    Diverging(Box<LodCertificate>),
    #[error("PDE residual {residual} exceeds tolerance {tol}; increase the representation degree")]
    ResidualTooLarge { residual: f64, tol: f64 },
}

/// A Cauchy problem in normal form with `m` components.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyProblem {
    pub domain: Domain,
    pub m: usize,
    pub d: usize,
    pub p: usize,
    pub l: usize,
    /// `F^h` for each component.
    pub rhs: Vec<Expr>,
    /// `y0[j][h]` is `∂_t^j y^h(t0, ·)`.
    pub y0: Vec<Vec<Expr>>,
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl CauchyProblem {
    pub fn new(
        domain: Domain,
        m: usize,
        d: usize,
        p: usize,
        l: usize,
        rhs: Vec<Expr>,
        y0: Vec<Vec<Expr>>,
    ) -> Result<Self, PdeError> {
        domain.validate()?;
        let bad = |s: String| Err(PdeError::InvalidProblem(s));
        if d == 0 {
            return bad("order d must be at least 1".into());
        }
        if p >= d {
            return bad(format!("need p < d, got p = {p}, d = {d}"));
        }
        if m == 0 || rhs.len() != m {
            return bad(format!("expected {m} right-hand sides, got {}", rhs.len()));
        }
        if y0.len() != d {
            return bad(format!("expected {d} initial conditions, got {}", y0.len()));
        }
        for (j, row) in y0.iter().enumerate() {
            if row.len() != m {
                return bad(format!("initial condition {j} has {} components, expected {m}", row.len()));
            }
            for e in row {
                if e.depends_on(&|v| !matches!(v, Var::X(_))) {
                    return bad(format!("initial condition {j} must depend on x only: {e}"));
                }
            }
        }
        let s = domain.s();
        for e in &rhs {
            for v in e.vars() {
                match &v {
                    Var::Deriv { alpha, gamma, comp } => {
                        let order: u32 = alpha.iter().sum();
                        if order as usize > l || *gamma as usize > p || *comp >= m || alpha.len() > s.max(1) {
                            return bad(format!("placeholder {v} outside |alpha| <= {l}, gamma <= {p}"));
                        }
                    }
                    Var::X(i) if *i >= s => return bad(format!("x{} used but S has {s} dimensions", i + 1)),
                    Var::Sym(name) => return bad(format!("unbound symbol `{name}` in right-hand side")),
                    _ => {}
                }
            }
        }
        Ok(CauchyProblem {
            domain,
            m,
            d,
            p,
            l,
            rhs,
            y0,
        })
    }

    /// Parse a problem from strings; `y0[j][h]` as in the struct.
    pub fn parse(
        domain: Domain,
        d: usize,
        p: usize,
        l: usize,
        rhs: &[&str],
        y0: &[Vec<&str>],
        constants: &BTreeMap<String, f64>,
    ) -> Result<Self, PdeError> {
        let m = rhs.len();
        let s = domain.s();
        let ra = Arity::rhs(s, m, l as u32, p as u32).with_constants(constants);
        let ia = Arity::spatial(s).with_constants(constants);
        let rhs = rhs
            .iter()
            .map(|t| parse_expression(t, &ra))
            .collect::<Result<Vec<_>, _>>()?;
        let y0 = y0
            .iter()
            .map(|row| row.iter().map(|t| parse_expression(t, &ia)).collect())
            .collect::<Result<Vec<Vec<_>>, _>>()?;
        Self::new(domain, m, d, p, l, rhs, y0)
    }

    /// Scalar shorthand for [`CauchyProblem::parse`].
    pub fn scalar(
        domain: Domain,
        d: usize,
        p: usize,
        l: usize,
        rhs: &str,
        y0: &[&str],
    ) -> Result<Self, PdeError> {
        let y0: Vec<Vec<&str>> = y0.iter().map(|s| vec![*s]).collect();
        Self::parse(domain, d, p, l, &[rhs], &y0, &BTreeMap::new())
    }

    /// `Card{(α, γ) : |α| ≤ L, γ ≤ p}`.
    pub fn lhat(&self) -> usize {
        binom(self.l + self.domain.s(), self.domain.s()) * (self.p + 1)
    }

    /// Placeholders occurring in `F`, sorted and unique.
    pub fn slots(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.rhs.iter().flat_map(|e| e.placeholders()).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Multi-index `(γ, α_1, .., α_s)` of a placeholder.
pub(crate) fn slot_beta(v: &Var, s: usize) -> Vec<usize> {
    match v {
        Var::Deriv { alpha, gamma, .. } => {
            let mut b = vec![*gamma as usize];
            b.extend((0..s).map(|i| alpha.get(i).copied().unwrap_or(0) as usize));
            b
        }
        _ => vec![0; s + 1],
    }
}

fn slot_comp(v: &Var) -> usize {
    match v {
        Var::Deriv { comp, .. } => *comp,
        _ => 0,
    }
}

/// Values of `F^h` on a physical tensor grid with placeholders bound to
/// derivatives of `y`.
fn rhs_on_grid(
    problem: &CauchyProblem,
    slots: &[Var],
    derivs: &[SepFunc],
    grid: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, FuncError> {
    let slot_vals: Vec<Vec<f64>> = slots
        .iter()
        .zip(derivs)
        .map(|(v, f)| f.values_on_grid(slot_comp(v), grid))
        .collect();
    let total: usize = grid.iter().map(|g| g.len()).product();
    let dims = grid.len();
    problem
        .rhs
        .iter()
        .map(|e| {
            (0..total)
                .into_par_iter()
                .map(|flat| {
                    let mut pt = vec![0.0; dims];
                    crate::funcspace::grid_point(grid, flat, &mut pt);
                    let vals: Vec<f64> = slot_vals.iter().map(|c| c[flat]).collect();
                    let env = PointEnv {
                        t: pt[0],
                        x: &pt[1..],
                        slots,
                        values: &vals,
                    };
                    match e.eval(&env) {
                        Ok(v) => Ok(v),
                        Err(ExprError::NonFinite) => Err(FuncError::NonFinite(pt)),
                        Err(err) => Err(err.into()),
                    }
                })
                .collect()
        })
        .collect()
}

fn check_operand(problem: &CauchyProblem, y: &SepFunc) -> Result<(), PdeError> {
    if y.domain != problem.domain || y.m != problem.m {
        return Err(FuncError::Mismatch.into());
    }
    Ok(())
}

/// `i0(t, x) = Σ_j y_{0j}(x) (t − t0)^j / j!`.
pub fn initial_polynomial(problem: &CauchyProblem) -> Result<SepFunc, PdeError> {
    let dom = &problem.domain;
    let (lo, hi) = dom.interval(0);
    let mut acc = SepFunc::zero(dom, problem.m, problem.p);
    for (j, row) in problem.y0.iter().enumerate() {
        let g = interpolate_adaptive(row, dom, problem.p)?;
        if g.max_abs_coeff() == 0.0 {
            continue;
        }
        let mono = Cheb1::shifted_monomial(lo, hi, dom.t0, j);
        acc = acc.add(&SepFunc::outer_time(&mono, &g))?;
    }
    Ok(acc.with_p(problem.p))
}

/// `G(y) = F[t, x, (∂_x^α ∂_t^γ y)]`, re-interpolated adaptively.
pub fn eval_g(problem: &CauchyProblem, y: &SepFunc) -> Result<SepFunc, PdeError> {
    check_operand(problem, y)?;
    let s = problem.domain.s();
    let slots = problem.slots();
    let derivs: Vec<SepFunc> = slots
        .iter()
        .map(|v| y.partial_derivative(&slot_beta(v, s)))
        .collect();
    let start: Vec<usize> = y.degrees.clone();
    let g = SepFunc::adaptive(&problem.domain, 0, &start, Adaptive::default(), &|grid| {
        rhs_on_grid(problem, &slots, &derivs, grid)
    })?;
    Ok(g)
}

/// `P(y) = i0 + I^d[G(y)]` with a precomputed `i0`.
pub fn apply_p_with(problem: &CauchyProblem, i0: &SepFunc, y: &SepFunc) -> Result<SepFunc, PdeError> {
    let mut g = eval_g(problem, y)?;
    if g.degrees[0] + problem.d > DEGREE_CAP {
        let mut deg = g.degrees.clone();
        deg[0] = DEGREE_CAP - problem.d;
        g = g.resize(&deg);
    }
    let integ = g.iterated_time_integral(problem.d)?;
    Ok(i0.add(&integ)?.with_p(problem.p))
}

/// `P(y) = i0 + I^d[G(y)]`.
pub fn apply_p(problem: &CauchyProblem, y: &SepFunc) -> Result<SepFunc, PdeError> {
    let i0 = initial_polynomial(problem)?;
    apply_p_with(problem, &i0, y)
}

/// Residuals of a candidate solution.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Residual {
    /// Grid max of `|∂_t^d y − F[t, x, (∂ y)]|`.
    pub pde_residual: f64,
    /// `sup_x |∂_t^j y(t0, x) − y_{0j}(x)|` for `j < d`.
    pub ic_residuals: Vec<f64>,
    pub grid_points: Vec<usize>,
}

fn lobatto_grid(domain: &Domain, counts: &[usize]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .enumerate()
        .map(|(dim, &n)| {
            let (lo, hi) = domain.interval(dim);
            cheb::lobatto(n)
                .into_iter()
                .map(|u| cheb::from_unit(u, lo, hi))
                .collect()
        })
        .collect()
}

/// PDE and initial-condition residuals on a grid of
/// `max(128, 4·(deg + 1))` Lobatto points per dimension.
pub fn residual(problem: &CauchyProblem, y: &SepFunc) -> Result<Residual, PdeError> {
    check_operand(problem, y)?;
    let dom = &problem.domain;
    let s = dom.s();
    let counts: Vec<usize> = y.degrees.iter().map(|&d| (4 * (d + 1)).max(128)).collect();
    let grid = lobatto_grid(dom, &counts);
    let slots = problem.slots();
    let derivs: Vec<SepFunc> = slots
        .iter()
        .map(|v| y.partial_derivative(&slot_beta(v, s)))
        .collect();
    let f = rhs_on_grid(problem, &slots, &derivs, &grid)?;
    let mut beta = vec![0; s + 1];
    beta[0] = problem.d;
    let dt = y.partial_derivative(&beta);
    let mut pde = 0.0f64;
    for (h, fh) in f.iter().enumerate() {
        let lhs = dt.values_on_grid(h, &grid);
        for (a, b) in lhs.iter().zip(fh) {
            pde = pde.max((a - b).abs());
        }
    }
    let mut slice = grid.clone();
    slice[0] = vec![dom.t0];
    let mut ic = Vec::with_capacity(problem.d);
    for (j, row) in problem.y0.iter().enumerate() {
        beta[0] = j;
        let dj = y.partial_derivative(&beta);
        let exact = sample_exprs(row, &slice)?;
        let mut worst = 0.0f64;
        for (h, ex) in exact.iter().enumerate() {
            let got = dj.values_on_grid(h, &slice);
            for (a, b) in got.iter().zip(ex) {
                worst = worst.max((a - b).abs());
            }
        }
        ic.push(worst);
    }
    Ok(Residual {
        pde_residual: pde,
        ic_residuals: ic,
        grid_points: counts,
    })
}

/// Graded space of separately regular functions with grid seminorms.
#[derive(Debug, Clone, Copy, Default)]
pub struct SepSpace {
    pub cfg: NormConfig,
}

fn core_err(e: FuncError) -> CoreError {
    CoreError::Seminorm(e.to_string())
}

impl GradedSpace for SepSpace {
    type Elem = SepFunc;
    fn seminorm(&self, x: &SepFunc, k: usize) -> Result<f64, CoreError> {
        graded_norm_with(x, k, &self.cfg).map_err(core_err)
    }
    fn sub(&self, a: &SepFunc, b: &SepFunc) -> Result<SepFunc, CoreError> {
        a.sub(b).map_err(core_err)
    }
    fn add(&self, a: &SepFunc, b: &SepFunc) -> Result<SepFunc, CoreError> {
        a.add(b).map_err(core_err)
    }
    fn seminorms(&self, x: &SepFunc, ks: &[usize]) -> Result<Vec<f64>, CoreError> {
        let k_max = ks.iter().copied().max().unwrap_or(0);
        let all = graded_norms_upto(x, k_max, &self.cfg).map_err(core_err)?;
        Ok(ks.iter().map(|&k| all[k]).collect())
    }
}

/// Combine row verdicts: any diverging row wins, then any inconclusive one.
pub(crate) fn combine_verdicts(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Converged;
    for v in vs {
        match v {
            Verdict::Diverging => return Verdict::Diverging,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Converged => {}
        }
    }
    out
}
