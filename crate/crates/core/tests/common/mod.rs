#![allow(dead_code)]

use std::f64::consts::PI;

use picard_lod::expr::{parse_expression, Arity, Bindings, Expr, Var};
use picard_lod::funcspace::{cheb, Domain, SepFunc};
use picard_lod::linear_series::LinearProblem;

pub fn ex(s: &str) -> Expr {
    parse_expression(s, &Arity::space_time(1)).unwrap()
}

pub fn periodic_domain(tbar: f64) -> Domain {
    Domain::new(0.0, tbar, tbar, vec![[-PI, PI]]).unwrap()
}

/// `∂_t^d y = ∂_x^L y` with every initial datum equal to `data`.
pub fn model_problem(d: usize, l: u32, tbar: f64, data: &str) -> LinearProblem {
    let y0 = (0..d).map(|_| vec![ex(data)]).collect();
    LinearProblem::new(periodic_domain(tbar), d, 0, vec![l], vec![vec![ex("1")]], vec![ex("0")], 0.0, y0).unwrap()
}

/// Sup of `|f − oracle|` over an `n`-point Lobatto grid per dimension,
/// optionally restricted to `|t − t0| ≤ t_max`.
pub fn grid_distance(f: &SepFunc, oracle: &Expr, n: usize, t_max: Option<f64>) -> f64 {
    let dom = &f.domain;
    let grid: Vec<Vec<f64>> = (0..dom.dims())
        .map(|dim| {
            let (mut lo, mut hi) = dom.interval(dim);
            if dim == 0 {
                if let Some(tm) = t_max {
                    lo = lo.max(dom.t0 - tm);
                    hi = hi.min(dom.t0 + tm);
                }
            }
            cheb::lobatto(n).into_iter().map(|u| cheb::from_unit(u, lo, hi)).collect()
        })
        .collect();
    let vals = f.values_on_grid(0, &grid);
    let mut idx = vec![0usize; grid.len()];
    let mut worst = 0.0f64;
    for v in vals {
        let mut b = Bindings::new().with(Var::T, grid[0][idx[0]]);
        for i in 1..grid.len() {
            b.set(Var::X(i - 1), grid[i][idx[i]]);
        }
        worst = worst.max((v - oracle.eval(&b).unwrap()).abs());
        for i in (0..idx.len()).rev() {
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
        }
    }
    worst
}
