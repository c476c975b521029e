//! Linear problems `∂_t^d y = p(t) ∂_x^μ ∂_t^γ y + q(t, x)` and their
//! Picard series.
//!
//! With `τ = t − t0` the `n`-th iterate started at `i0` is
//!
//! ```text
//! Pⁿ(i0) = i0 + Σ_{h=1..n} Σ_{j=γ..d-1} μ_{j−γ,h}(t) ∂_x^{hμ} y_{0j} / (j−γ)! + Σ_{h=1..n} η_h
//! ```
//!
//! where `μ_{j−γ,0} = ((j−γ)!/j!) τ^j Id`, `μ_{j−γ,h+1} = I_d[p ∂_t^γ μ_{j−γ,h}]`,
//! `η_1 = I_d[q]` and `η_{h+1} = I_d[p ∂_x^μ ∂_t^γ η_h]`.

mod catalog;
mod growth;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{simplify, symbolic_partial, Bindings, Expr, ExprError, Var};
use crate::funcspace::{
    cheb, graded_norm, interpolate_adaptive, Cheb1, Domain, FuncError, SepFunc, DEGREE_CAP,
};
use crate::picard_pde::{initial_polynomial, CauchyProblem, PdeError};

pub use catalog::{
    burgers_demo, example_catalog, parameter_limit_experiment, BurgersCertificate, CatalogCase,
    HyperWitness, LimitReport, LimitRow, CATALOG_NAMES,
};
pub use growth::{
    classify_convergence, growth_increment_model, increment_bound, increment_bound_at,
    radii_from_series, spot_check_growth, Classification, GrowthClass, GrowthViolation, JRule,
};

/// Highest spatial derivative order probed when validating `Q`.
pub const Q_PROBE_ORDER: usize = 8;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Func(#[from] FuncError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Core(#[from] crate::graded_core::CoreError),
    #[error("invalid linear problem: {0}")]
    Invalid(String),
    #[error("not of the form p(t) ∂_x^μ ∂_t^γ y + q: {0}")]
    NotLinearClass(String),
    #[error("declared forcing bound Q = {declared} is below the observed {observed}")]
    QBound { declared: f64, observed: f64 },
    #[error("no growth class for initial condition j = {j}")]
    MissingGrowth { j: usize },
    #[error("invalid growth class: {0}")]
    BadGrowth(String),
    #[error("series diverges: {0}")]
    Diverging(String),
    #[error("unknown catalog case `{0}`")]
    UnknownCase(String),
    #[error("time degree {needed} exceeds cap {cap}")]
    DegreeCap { needed: usize, cap: usize },
}

/// Linear problem with time-dependent `m × m` coefficient matrix `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    pub domain: Domain,
    pub m: usize,
    pub d: usize,
    pub gamma: usize,
    pub mu: Vec<u32>,
    /// `p[h][h']`, functions of `t` only.
    pub p: Vec<Vec<Expr>>,
    /// Forcing, one expression in `(t, x)` per component.
    pub q: Vec<Expr>,
    /// Declared `Q ≥ sup |∂_x^ν q|`.
    pub q_bound: f64,
    /// `y0[j][h]`.
    pub y0: Vec<Vec<Expr>>,
}

type Mat = Vec<Vec<Cheb1>>;

/// `(e1 .. en)` derivative multi-index applied symbolically.
fn x_derivative(e: &Expr, orders: &[usize]) -> Expr {
    let mut out = e.clone();
    for (i, &o) in orders.iter().enumerate() {
        if o > 0 {
            out = simplify(&symbolic_partial(&out, &Var::X(i), o as u32));
        }
    }
    out
}

fn multi_indices(s: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; s]];
    let mut frontier = vec![vec![0; s]];
    for _ in 0..max_order {
        let mut next = Vec::new();
        for nu in &frontier {
            // Only raise the last non-zero index or later, so each index appears once.
            let start = nu.iter().rposition(|&v| v > 0).unwrap_or(0);
            for i in start..s {
                let mut nn = nu.clone();
                nn[i] += 1;
                next.push(nn);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn probe_grid(domain: &Domain, time: bool) -> Vec<Vec<f64>> {
    (0..domain.dims())
        .map(|dim| {
            let (lo, hi) = domain.interval(dim);
            let n = if dim == 0 { if time { 9 } else { 1 } } else { 33 };
            if n == 1 {
                return vec![domain.t0];
            }
            cheb::lobatto(n).into_iter().map(|u| cheb::from_unit(u, lo, hi)).collect()
        })
        .collect()
}

/// Grid max of `|e|` over a tensor grid.
fn grid_max(e: &Expr, grid: &[Vec<f64>]) -> Result<f64, ExprError> {
    let total: usize = grid.iter().map(|g| g.len()).product();
    let mut pt = vec![0.0; grid.len()];
    let mut m = 0.0f64;
    for flat in 0..total {
        crate::funcspace::grid_point(grid, flat, &mut pt);
        let mut b = Bindings::new().with(Var::T, pt[0]);
        for (i, v) in pt[1..].iter().enumerate() {
            b.set(Var::X(i), *v);
        }
        m = m.max(e.eval(&b)?.abs());
    }
    Ok(m)
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let m = a.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = a[i][0].mul(&b[0][j]);
                    for (l, row) in b.iter().enumerate().skip(1) {
                        acc = acc.add(&a[i][l].mul(&row[j]));
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn mat_map(a: &Mat, f: impl Fn(&Cheb1) -> Cheb1) -> Mat {
    a.iter().map(|row| row.iter().map(&f).collect()).collect()
}

fn mat_degree(a: &Mat) -> usize {
    a.iter().flatten().map(Cheb1::degree).max().unwrap_or(0)
}

impl LinearProblem {
    /// Validate shapes, dependencies and the declared forcing bound.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        domain: Domain,
        d: usize,
        gamma: usize,
        mu: Vec<u32>,
        p: Vec<Vec<Expr>>,
        q: Vec<Expr>,
        q_bound: f64,
        y0: Vec<Vec<Expr>>,
    ) -> Result<Self, LinearError> {
        domain.validate()?;
        let bad = |s: String| Err(LinearError::Invalid(s));
        let m = p.len();
        let s = domain.s();
        if m == 0 || p.iter().any(|r| r.len() != m) {
            return bad("coefficient matrix p must be square and non-empty".into());
        }
        if q.len() != m {
            return bad(format!("forcing has {} components, expected {m}", q.len()));
        }
        if mu.len() != s || mu.iter().sum::<u32>() == 0 {
            return bad(format!("μ must have {s} entries with |μ| > 0"));
        }
        if gamma >= d {
            return bad(format!("need γ < d, got γ = {gamma}, d = {d}"));
        }
        if y0.len() != d || y0.iter().any(|r| r.len() != m) {
            return bad(format!("expected {d} initial conditions with {m} components"));
        }
        for e in p.iter().flatten() {
            if e.depends_on(&|v| !matches!(v, Var::T)) {
                return bad(format!("coefficient {e} must depend on t only"));
            }
        }
        for e in &q {
            if e.depends_on(&|v| !matches!(v, Var::T | Var::X(_))) {
                return bad(format!("forcing {e} must depend on (t, x) only"));
            }
        }
        if !(q_bound >= 0.0) || !q_bound.is_finite() {
            return bad(format!("forcing bound must be finite and non-negative, got {q_bound}"));
        }
        let lp = LinearProblem {
            domain,
            m,
            d,
            gamma,
            mu,
            p,
            q,
            q_bound,
            y0,
        };
        lp.to_cauchy()?;
        let observed = Self::measure_q_bound(&lp.q, &lp.domain)?;
        if observed > q_bound * (1.0 + 1e-9) + 1e-12 {
            return Err(LinearError::QBound {
                declared: q_bound,
                observed,
            });
        }
        Ok(lp)
    }

    /// Grid max of `|∂_x^ν q|` for `|ν| ≤ Q_PROBE_ORDER`.
    pub fn measure_q_bound(q: &[Expr], domain: &Domain) -> Result<f64, LinearError> {
        let s = domain.s();
        let mut worst = 0.0f64;
        for e in q {
            if e.is_zero() {
                continue;
            }
            let grid = probe_grid(domain, e.depends_on_t());
            for nu in multi_indices(s, Q_PROBE_ORDER) {
                let de = x_derivative(e, &nu);
                if de.is_zero() {
                    continue;
                }
                worst = worst.max(grid_max(&de, &grid)?);
            }
        }
        Ok(worst)
    }

    pub fn l(&self) -> usize {
        self.mu.iter().sum::<u32>() as usize
    }

    /// The same problem in general normal form.
    pub fn to_cauchy(&self) -> Result<CauchyProblem, PdeError> {
        let rhs = (0..self.m)
            .map(|h| {
                let mut acc = self.q[h].clone();
                for (hp, c) in self.p[h].iter().enumerate() {
                    let z = Expr::var(Var::deriv(self.mu.clone(), self.gamma as u32, hp));
                    acc = Expr::binary(
                        crate::expr::BinOp::Add,
                        acc,
                        Expr::binary(crate::expr::BinOp::Mul, c.clone(), z),
                    );
                }
                simplify(&acc)
            })
            .collect();
        CauchyProblem::new(
            self.domain.clone(),
            self.m,
            self.d,
            self.gamma,
            self.l(),
            rhs,
            self.y0.clone(),
        )
    }

    /// Recognise a normal-form problem as linear; `q_bound` defaults to the
    /// measured bound.
    pub fn from_cauchy(cp: &CauchyProblem, q_bound: Option<f64>) -> Result<Self, LinearError> {
        let not = |s: String| Err(LinearError::NotLinearClass(s));
        let s = cp.domain.s();
        let mut slot: Option<(Vec<u32>, u32)> = None;
        let mut p = vec![vec![Expr::c(0.0); cp.m]; cp.m];
        let mut q = Vec::with_capacity(cp.m);
        for (h, e) in cp.rhs.iter().enumerate() {
            let split = match crate::expr::affine_split(e) {
                Some(sp) => sp,
                None => return not(format!("component {} is not affine", h + 1)),
            };
            for (z, c) in split.terms {
                let Var::Deriv { alpha, gamma, comp } = &z else {
                    unreachable!("affine_split yields placeholders")
                };
                let mut a = alpha.clone();
                a.resize(s, 0);
                match &slot {
                    None => slot = Some((a.clone(), *gamma)),
                    Some((sa, sg)) if *sa == a && sg == gamma => {}
                    Some(_) => return not(format!("placeholder {z} differs from the common ∂_x^μ ∂_t^γ")),
                }
                if c.depends_on_x() {
                    return not(format!("coefficient {c} depends on x"));
                }
                p[h][*comp] = simplify(&c);
            }
            q.push(split.rest);
        }
        let (mu, gamma) = match slot {
            Some(v) => v,
            None => return not("no derivative placeholder".into()),
        };
        if mu.iter().sum::<u32>() == 0 {
            return not("μ = 0".into());
        }
        let qb = match q_bound {
            Some(v) => v,
            None => Self::measure_q_bound(&q, &cp.domain)?,
        };
        let y0 = cp.y0.clone();
        Self::new(cp.domain.clone(), cp.d, gamma as usize, mu, p, q, qb, y0)
    }

    /// `sup_T` of the max-row-sum norm of `p`, on 2001 Lobatto time points.
    pub fn p_norm(&self) -> Result<f64, LinearError> {
        let (lo, hi) = self.domain.interval(0);
        let constant = !self.p.iter().flatten().any(Expr::depends_on_t);
        let ts: Vec<f64> = if constant {
            vec![self.domain.t0]
        } else {
            cheb::lobatto(2001).into_iter().map(|u| cheb::from_unit(u, lo, hi)).collect()
        };
        let mut norm = 0.0f64;
        for t in ts {
            let b = Bindings::new().with(Var::T, t);
            for row in &self.p {
                let mut sum = 0.0;
                for c in row {
                    sum += c.eval(&b)?.abs();
                }
                norm = norm.max(sum);
            }
        }
        Ok(norm)
    }

    /// `p` constant and `q` independent of `t`.
    pub fn is_constant_case(&self) -> bool {
        !self.p.iter().flatten().any(Expr::depends_on_t) && !self.q.iter().any(Expr::depends_on_t)
    }

    fn hmu(&self, h: usize) -> Vec<usize> {
        self.mu.iter().map(|&v| v as usize * h).collect()
    }

    /// `∂_x^{hμ}` of each component of `exprs`, interpolated in `x`.
    fn derived_data(&self, exprs: &[Expr], h: usize) -> Result<SepFunc, LinearError> {
        let nu = self.hmu(h);
        let de: Vec<Expr> = exprs.iter().map(|e| x_derivative(e, &nu)).collect();
        Ok(interpolate_adaptive(&de, &self.domain, self.gamma)?)
    }

    /// `∂_x^{hμ}` of the interpolant of `exprs`; matches what iterating the
    /// operator does to the represented data.
    fn derived_interpolant(&self, exprs: &[Expr], h: usize) -> Result<SepFunc, LinearError> {
        let mut beta = vec![0];
        beta.extend(self.hmu(h));
        Ok(interpolate_adaptive(exprs, &self.domain, self.gamma)?.partial_derivative(&beta))
    }

    fn p_matrix(&self) -> Result<Mat, LinearError> {
        let (lo, hi) = self.domain.interval(0);
        self.p
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| {
                        if !e.depends_on_t() {
                            let v = e.eval(&Bindings::new())?;
                            return Ok(Cheb1::constant(lo, hi, v));
                        }
                        let f = |t: f64| e.eval(&Bindings::new().with(Var::T, t));
                        Ok(Cheb1::adaptive(lo, hi, DEGREE_CAP + 1, 1e-13, &f)?.chopped(1e-14))
                    })
                    .collect()
            })
            .collect()
    }
}

/// The `μ` matrices and `η` functions up to `h_max`.
#[derive(Debug, Clone)]
pub struct Recursions {
    /// `mu[j − γ][h]` for `h ≤ h_max`.
    pub mu: Vec<Vec<Vec<Vec<Cheb1>>>>,
    /// `eta[h]` for `1 ≤ h ≤ h_max`; `eta[0]` holds `q` and is not summed.
    pub eta: Vec<SepFunc>,
}

/// Build the `μ` and `η` recursions up to `h_max`.
pub fn recursions(lp: &LinearProblem, h_max: usize) -> Result<Recursions, LinearError> {
    let (lo, hi) = lp.domain.interval(0);
    let t0 = lp.domain.t0;
    let (d, g) = (lp.d, lp.gamma);
    let pm = lp.p_matrix()?;
    let mut mu = Vec::new();
    for j in g..d {
        let mono = Cheb1::shifted_monomial(lo, hi, t0, j).scale(factorial(j - g));
        let zero = Cheb1::zero(lo, hi);
        let mut cur: Mat = (0..lp.m)
            .map(|a| (0..lp.m).map(|b| if a == b { mono.clone() } else { zero.clone() }).collect())
            .collect();
        let mut seq = vec![cur.clone()];
        for _ in 0..h_max {
            let dg = mat_map(&cur, |c| c.deriv_n(g));
            cur = mat_map(&mat_mul(&pm, &dg), |c| c.integrate_n(t0, d).chopped(1e-16));
            let deg = mat_degree(&cur);
            if deg > DEGREE_CAP {
                return Err(LinearError::DegreeCap {
                    needed: deg,
                    cap: DEGREE_CAP,
                });
            }
            seq.push(cur.clone());
        }
        mu.push(seq);
    }
    let qf = interpolate_adaptive(&lp.q, &lp.domain, g)?;
    let mut eta = vec![qf.clone()];
    if h_max >= 1 {
        eta.push(qf.iterated_time_integral(d)?.with_p(g));
    }
    let mut beta = vec![g];
    beta.extend(lp.mu.iter().map(|&v| v as usize));
    for h in 1..h_max {
        let dd = eta[h].partial_derivative(&beta);
        let parts = (0..lp.m)
            .map(|a| {
                let mut acc = SepFunc::zero(&lp.domain, 1, g);
                for (b, pab) in pm[a].iter().enumerate() {
                    acc = acc.add(&dd.component(b).mul_time(pab))?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>, FuncError>>()?;
        let next = SepFunc::stack(&parts)?.iterated_time_integral(d)?.chop(1e-16);
        eta.push(next.with_p(g));
    }
    Ok(Recursions { mu, eta })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// `Σ_j μ_{j−γ,h} ∂_x^{hμ} y_{0j} / (j−γ)! + η_h`.
fn general_term(lp: &LinearProblem, rec: &Recursions, h: usize, symbolic: bool) -> Result<SepFunc, LinearError> {
    let mut acc = SepFunc::zero(&lp.domain, lp.m, lp.gamma);
    for j in lp.gamma..lp.d {
        let data = if symbolic {
            lp.derived_data(&lp.y0[j], h)?
        } else {
            lp.derived_interpolant(&lp.y0[j], h)?
        };
        if data.max_abs_coeff() == 0.0 {
            continue;
        }
        let mu = &rec.mu[j - lp.gamma][h];
        let inv = 1.0 / factorial(j - lp.gamma);
        let parts = (0..lp.m)
            .map(|a| {
                let mut c = SepFunc::zero(&lp.domain, 1, lp.gamma);
                for (b, mab) in mu[a].iter().enumerate() {
                    c = c.add(&SepFunc::outer_time(&mab.clone().scale(inv), &data.component(b)))?;
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>, FuncError>>()?;
        acc = acc.add(&SepFunc::stack(&parts)?)?;
    }
    Ok(acc.add(&rec.eta[h])?.with_p(lp.gamma))
}

/// Constant-coefficient term: `p^h ∂^{hμ} y_{0j} τ^{h(d−γ)+j}/(h(d−γ)+j)!`
/// summed over `j`, plus `p^{h−1} ∂^{(h−1)μ} q τ^{h(d−γ)+γ}/(h(d−γ)+γ)!`.
fn constant_term(lp: &LinearProblem, pmat: &[Vec<f64>], h: usize) -> Result<SepFunc, LinearError> {
    let (lo, hi) = lp.domain.interval(0);
    let t0 = lp.domain.t0;
    let (d, g) = (lp.d, lp.gamma);
    let power = |k: usize| -> Vec<Vec<f64>> {
        let m = pmat.len();
        let mut r: Vec<Vec<f64>> = (0..m).map(|a| (0..m).map(|b| (a == b) as u8 as f64).collect()).collect();
        for _ in 0..k {
            r = (0..m)
                .map(|a| (0..m).map(|b| (0..m).map(|l| r[a][l] * pmat[l][b]).sum()).collect())
                .collect();
        }
        r
    };
    let apply = |mat: &[Vec<f64>], data: &SepFunc, mono: &Cheb1| -> Result<SepFunc, FuncError> {
        let parts = (0..lp.m)
            .map(|a| {
                let mut c = SepFunc::zero(&lp.domain, 1, g);
                for (b, v) in mat[a].iter().enumerate() {
                    if *v != 0.0 {
                        c = c.axpby(1.0, &data.component(b), *v)?;
                    }
                }
                Ok(SepFunc::outer_time(mono, &c))
            })
            .collect::<Result<Vec<_>, FuncError>>()?;
        SepFunc::stack(&parts)
    };
    let mut acc = SepFunc::zero(&lp.domain, lp.m, g);
    let ph = power(h);
    for j in g..d {
        let data = lp.derived_data(&lp.y0[j], h)?;
        if data.max_abs_coeff() == 0.0 {
            continue;
        }
        let mono = Cheb1::shifted_monomial(lo, hi, t0, h * (d - g) + j);
        acc = acc.add(&apply(&ph, &data, &mono)?)?;
    }
    if lp.q.iter().any(|e| !e.is_zero()) {
        let data = lp.derived_data(&lp.q, h - 1)?;
        let mono = Cheb1::shifted_monomial(lo, hi, t0, h * (d - g) + g);
        acc = acc.add(&apply(&power(h - 1), &data, &mono)?)?;
    }
    Ok(acc.with_p(g))
}

/// `Pⁿ(i0)` from the recursions, without iterating the operator. Spatial
/// derivatives of the data act on its interpolant, as they do under `P`.
pub fn picard_closed_form(lp: &LinearProblem, n: usize) -> Result<SepFunc, LinearError> {
    let cp = lp.to_cauchy()?;
    let mut acc = initial_polynomial(&cp)?;
    if n == 0 {
        return Ok(acc);
    }
    let rec = recursions(lp, n)?;
    for h in 1..=n {
        acc = acc.add(&general_term(lp, &rec, h, false)?)?;
    }
    Ok(acc.with_p(lp.gamma))
}

/// Partial sum of the Picard series.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesSolution {
    #[serde(skip)]
    pub solution: SepFunc,
    pub terms: usize,
    /// Sup norm of each term `h = 1..=terms`.
    pub term_norms: Vec<f64>,
    pub last_term: f64,
    pub constant_case: bool,
    pub classification: Option<Classification>,
}

/// Sum the first `n_terms` terms of the series. When `growth` is given the
/// convergence class is checked first and a diverging verdict is an error.
pub fn series_solution(
    lp: &LinearProblem,
    n_terms: usize,
    growth: Option<&[GrowthClass]>,
) -> Result<SeriesSolution, LinearError> {
    let classification = match growth {
        Some(g) => {
            let c = classify_convergence(lp, g, lp.domain.tbar(), 60)?;
            if c.verdict == crate::graded_core::Verdict::Diverging {
                return Err(LinearError::Diverging(c.rule_summary()));
            }
            Some(c)
        }
        None => None,
    };
    let cp = lp.to_cauchy()?;
    let mut acc = initial_polynomial(&cp)?;
    let constant_case = lp.is_constant_case();
    let mut term_norms = Vec::with_capacity(n_terms);
    let rec = if constant_case || n_terms == 0 {
        None
    } else {
        Some(recursions(lp, n_terms)?)
    };
    let pmat: Vec<Vec<f64>> = if constant_case {
        lp.p.iter()
            .map(|r| r.iter().map(|e| e.eval(&Bindings::new())).collect())
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    for h in 1..=n_terms {
        let term = match &rec {
            Some(r) => general_term(lp, r, h, true)?,
            None => constant_term(lp, &pmat, h)?,
        };
        term_norms.push(graded_norm(&term.clone().with_p(0), 0)?);
        acc = acc.add(&term)?;
    }
    Ok(SeriesSolution {
        solution: acc.with_p(lp.gamma),
        terms: n_terms,
        last_term: term_norms.last().copied().unwrap_or(0.0),
        term_norms,
        constant_case,
        classification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, Arity};
    use crate::picard_pde::apply_p;
    use std::f64::consts::PI;

    fn ex(s: &str) -> Expr {
        parse_expression(s, &Arity::space_time(1)).unwrap()
    }

    fn heat(tbar: f64) -> LinearProblem {
        let dm = Domain::new(0.0, tbar, tbar, vec![[-PI, PI]]).unwrap();
        LinearProblem::new(dm, 1, 0, vec![2], vec![vec![ex("1")]], vec![ex("0")], 0.0, vec![vec![ex("sin(x)")]])
            .unwrap()
    }

    #[test]
    fn multi_indices_are_unique() {
        let v = multi_indices(2, 3);
        assert_eq!(v.len(), 10);
        let mut w = v.clone();
        w.sort();
        w.dedup();
        assert_eq!(w.len(), 10);
    }

    #[test]
    fn q_bound_is_checked() {
        let dm = Domain::new(0.0, 0.5, 0.5, vec![[-PI, PI]]).unwrap();
        let r = LinearProblem::new(
            dm,
            1,
            0,
            vec![1],
            vec![vec![ex("1")]],
            vec![ex("2*sin(x)")],
            1.0,
            vec![vec![ex("0")]],
        );
        assert!(matches!(r, Err(LinearError::QBound { .. })));
    }

    #[test]
    fn from_cauchy_round_trip() {
        let lp = heat(0.5);
        let back = LinearProblem::from_cauchy(&lp.to_cauchy().unwrap(), None).unwrap();
        assert_eq!(back.mu, vec![2]);
        assert_eq!(back.gamma, 0);
        let dm = Domain::new(0.0, 0.5, 0.5, vec![[-PI, PI]]).unwrap();
        let cp = CauchyProblem::scalar(dm, 1, 0, 1, "y*Dx(y)", &["sin(x)"]).unwrap();
        assert!(LinearProblem::from_cauchy(&cp, None).is_err());
    }

    #[test]
    fn heat_series_matches_exponential() {
        let s = series_solution(&heat(0.5), 20, None).unwrap();
        assert!(s.constant_case);
        for &(t, x) in &[(0.5, 1.0), (-0.5, 0.3), (0.2, -2.0)] {
            let got = s.solution.eval(t, &[x])[0];
            assert!((got - (-t as f64).exp() * x.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_equals_iterates() {
        let lp = heat(0.3);
        let cp = lp.to_cauchy().unwrap();
        let mut y = initial_polynomial(&cp).unwrap();
        for n in 1..=6 {
            y = apply_p(&cp, &y).unwrap();
            let cf = picard_closed_form(&lp, n).unwrap();
            let diff = cf.max_coeff_diff(&y).unwrap();
            assert!(diff < 1e-10, "n = {n}: {diff:e}");
        }
    }

    #[test]
    fn general_and_constant_paths_agree() {
        let dm = Domain::new(0.0, 0.4, 0.4, vec![[-PI, PI]]).unwrap();
        let lp = LinearProblem::new(
            dm,
            2,
            1,
            vec![1],
            vec![vec![ex("0.5")]],
            vec![ex("cos(x)")],
            1.0,
            vec![vec![ex("sin(x)")], vec![ex("x")]],
        )
        .unwrap();
        let a = series_solution(&lp, 5, None).unwrap();
        let b = picard_closed_form(&lp, 5).unwrap();
        assert!(a.constant_case);
        assert!(a.solution.max_coeff_diff(&b).unwrap() < 1e-12);
    }
}
