//! Sup bounds `M_k` for spatial derivatives of `G` on the box `C_k` and the
//! resulting ball-invariance check.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{initial_polynomial, slot_beta, CauchyProblem, PdeError};
use crate::expr::{simplify, total_x_derivative, Env, Expr, Var};
use crate::funcspace::{cheb, Radii, Radius};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MBound {
    pub k: usize,
    pub value: f64,
    pub points: usize,
    pub method: &'static str,
    /// `(placeholder, lo, hi)` ranges of the box.
    pub ranges: Vec<(String, f64, f64)>,
}

struct SweepEnv<'a> {
    vars: &'a [Var],
    vals: &'a [f64],
}

impl Env for SweepEnv<'_> {
    fn lookup(&self, v: &Var) -> Option<f64> {
        self.vars.iter().position(|w| w == v).map(|i| self.vals[i])
    }
}

/// Expressions `∂_x^ν F^h` for `|ν| ≤ k`, placeholders shifted by the chain
/// rule.
fn derivative_exprs(problem: &CauchyProblem, k: usize) -> Vec<Expr> {
    let s = problem.domain.s();
    let mut out = Vec::new();
    for f in &problem.rhs {
        let mut memo: BTreeMap<Vec<usize>, Expr> = BTreeMap::new();
        memo.insert(vec![0; s], simplify(f));
        let mut frontier = vec![vec![0; s]];
        for _ in 0..k {
            let mut next = Vec::new();
            for nu in &frontier {
                for i in 0..s {
                    let mut nn = nu.clone();
                    nn[i] += 1;
                    if memo.contains_key(&nn) {
                        continue;
                    }
                    let e = simplify(&total_x_derivative(&memo[nu], i));
                    memo.insert(nn.clone(), e);
                    next.push(nn);
                }
            }
            frontier = next;
        }
        out.extend(memo.into_values());
    }
    out
}

/// `M_k = max over C_k and |ν| ≤ k of |∂_x^ν G|`, with `C_k` the box of
/// `(t, x)` in `T × S` and placeholder values within `r_{k+L+p}` of the
/// range of the matching derivative of `i0`. The box is swept on a tensor
/// grid including its corners when `budget` allows, otherwise sampled at
/// `budget` seeded random points.
pub fn constant_bounds(
    problem: &CauchyProblem,
    radii: &Radii,
    k: usize,
    budget: usize,
) -> Result<MBound, PdeError> {
    let idx = k + problem.l + problem.p;
    let r = match radii.get(idx) {
        Radius::Finite(r) => r,
        Radius::Infinite(_) => return Err(PdeError::InfiniteRadius { k: idx }),
    };
    let dom = &problem.domain;
    let s = dom.s();
    let exprs = derivative_exprs(problem, k);
    let mut vars: Vec<Var> = Vec::new();
    let mut ranges: Vec<(f64, f64)> = Vec::new();
    let mut labels = Vec::new();
    if exprs.iter().any(|e| e.depends_on_t()) {
        vars.push(Var::T);
        ranges.push(dom.interval(0));
    }
    for i in 0..s {
        if exprs.iter().any(|e| e.depends_on(&|v| *v == Var::X(i))) {
            vars.push(Var::X(i));
            ranges.push(dom.interval(i + 1));
        }
    }
    let mut slots: Vec<Var> = exprs.iter().flat_map(|e| e.placeholders()).collect();
    slots.sort();
    slots.dedup();
    if !slots.is_empty() {
        let i0 = initial_polynomial(problem)?;
        for z in &slots {
            let d = i0.partial_derivative(&slot_beta(z, s));
            let grid: Vec<Vec<f64>> = (0..dom.dims())
                .map(|dim| {
                    let (lo, hi) = dom.interval(dim);
                    let n = if d.degrees[dim] == 0 { 1 } else { 64 };
                    cheb::lobatto(n).into_iter().map(|u| cheb::from_unit(u, lo, hi)).collect()
                })
                .collect();
            let comp = match z {
                Var::Deriv { comp, .. } => *comp,
                _ => 0,
            };
            let vals = d.values_on_grid(comp, &grid);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min) - r;
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + r;
            vars.push(z.clone());
            ranges.push((lo, hi));
            labels.push((z.to_string(), lo, hi));
        }
    }
    let nv = vars.len();
    let mid: Vec<f64> = std::iter::once(dom.t0)
        .chain(dom.space.iter().map(|[a, b]| 0.5 * (a + b)))
        .collect();
    let eval_at = |vals: &[f64]| -> Result<f64, PdeError> {
        let mut all_vars = vars.clone();
        let mut all_vals = vals.to_vec();
        if !vars.contains(&Var::T) {
            all_vars.push(Var::T);
            all_vals.push(mid[0]);
        }
        for i in 0..s {
            if !vars.contains(&Var::X(i)) {
                all_vars.push(Var::X(i));
                all_vals.push(mid[i + 1]);
            }
        }
        let env = SweepEnv {
            vars: &all_vars,
            vals: &all_vals,
        };
        let mut m = 0.0f64;
        for e in &exprs {
            m = m.max(e.eval(&env)?.abs());
        }
        Ok(m)
    };
    let per = if nv == 0 {
        1
    } else {
        (budget as f64).powf(1.0 / nv as f64).floor() as usize
    };
    let (value, points, method) = if nv == 0 {
        (eval_at(&[])?, 1, "grid")
    } else if per >= 2 {
        let axes: Vec<Vec<f64>> = ranges
            .iter()
            .map(|&(lo, hi)| (0..per).map(|i| lo + (hi - lo) * i as f64 / (per - 1) as f64).collect())
            .collect();
        let total = per.pow(nv as u32);
        let v = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut pt = vec![0.0; nv];
                let mut rem = flat;
                for d in (0..nv).rev() {
                    pt[d] = axes[d][rem % per];
                    rem /= per;
                }
                eval_at(&pt)
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        (v, total, "grid")
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let pts: Vec<Vec<f64>> = (0..budget)
            .map(|_| ranges.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect())
            .collect();
        let v = pts
            .par_iter()
            .map(|p| eval_at(p))
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        (v, budget, "random")
    };
    Ok(MBound {
        k,
        value,
        points,
        method,
        ranges: labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceEntry {
    pub k: usize,
    pub m_k: f64,
    /// `max_{1 ≤ j ≤ d} M_k T̄^j / j!`.
    pub bound: f64,
    pub radius: Radius,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallInvariance {
    pub entries: Vec<InvarianceEntry>,
    /// `min_k r_k / M_k` over the checked `k`, or 0 when the ratios trend
    /// to zero.
    pub admissible_tbar: f64,
    /// Ratios `r_k / M_k` strictly decrease over at least three checked `k`.
    pub trend_to_zero: bool,
    pub pass: bool,
}

/// Check `max_j M_k T̄^j / j! ≤ r_k` for `k < m.len()`.
pub fn check_ball_invariance(radii: &Radii, m: &[f64], tbar: f64, d: usize) -> BallInvariance {
    let mut entries = Vec::with_capacity(m.len());
    let mut ratios = Vec::new();
    for (k, &mk) in m.iter().enumerate() {
        let mut fact = 1.0;
        let mut bound = 0.0f64;
        for j in 1..=d.max(1) {
            fact *= j as f64;
            bound = bound.max(mk * tbar.powi(j as i32) / fact);
        }
        let radius = radii.get(k);
        let r = radius.value();
        let pass = bound <= r * (1.0 + 1e-12);
        if r.is_finite() && mk > 0.0 {
            ratios.push(r / mk);
        }
        entries.push(InvarianceEntry {
            k,
            m_k: mk,
            bound,
            radius,
            pass,
        });
    }
    let trend_to_zero = ratios.len() >= 3 && ratios.windows(2).all(|w| w[1] < w[0]);
    let admissible_tbar = if trend_to_zero {
        0.0
    } else {
        ratios.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let pass = entries.iter().all(|e| e.pass) && !trend_to_zero;
    BallInvariance {
        entries,
        admissible_tbar,
        trend_to_zero,
        pass,
    }
}
