//! Separately regular functions `T × S → R^m` stored as tensor Chebyshev
//! coefficient arrays, with exact differentiation and time integration,
//! graded norms and ball membership.

pub mod cheb;
mod norms;
mod tensor;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError, PointEnv};
pub use cheb::Cheb1;
pub use norms::{
    ball_check, graded_norm, graded_norm_with, graded_norms_upto, joint_norm, joint_norm_with,
    BallEntry, BallReport, NormConfig, Radii, Radius,
};
use tensor::{apply_axis, map_axis};

/// Default degree cap per dimension.
pub const DEGREE_CAP: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuncError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("non-finite sample value at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("degree {needed} in dimension {dim} exceeds cap {cap}")]
    DegreeCap { dim: usize, needed: usize, cap: usize },
    #[error("functions live on different domains or shapes")]
    Mismatch,
    #[error("derivative order {k} exceeds the numeric cap {cap}")]
    OrderTooHigh { k: usize, cap: usize },
    #[error("non-positive radius {0}")]
    BadRadius(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("serialization: {0}")]
    Serde(String),
}

/// `T × S` with `T = [t0 - a, t0 + b]` and `S` a box in `R^s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub t0: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "S")]
    pub space: Vec<[f64; 2]>,
}

impl Domain {
    /// Requires `a, b ≥ 0` with `a + b > 0` and `l_i < u_i`.
    pub fn new(t0: f64, a: f64, b: f64, space: Vec<[f64; 2]>) -> Result<Self, FuncError> {
        let d = Domain { t0, a, b, space };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), FuncError> {
        let all = [self.t0, self.a, self.b];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(FuncError::InvalidDomain("non-finite time data".into()));
        }
        if self.a < 0.0 || self.b < 0.0 || self.a + self.b <= 0.0 {
            return Err(FuncError::InvalidDomain(format!(
                "need a, b >= 0 and a + b > 0, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        for (i, [l, u]) in self.space.iter().enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(FuncError::InvalidDomain(format!(
                    "spatial interval {} is [{l}, {u}]",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// `max(a, b)`.
    pub fn tbar(&self) -> f64 {
        self.a.max(self.b)
    }

    pub fn s(&self) -> usize {
        self.space.len()
    }

    /// Interval of tensor dimension `dim` (0 is time).
    pub fn interval(&self, dim: usize) -> (f64, f64) {
        if dim == 0 {
            (self.t0 - self.a, self.t0 + self.b)
        } else {
            let [l, u] = self.space[dim - 1];
            (l, u)
        }
    }

    pub fn dims(&self) -> usize {
        1 + self.s()
    }
}

/// A function in `C^p_t C^∞_x(T × S, R^m)` as per-component coefficient
/// tensors of shape `(deg_t + 1) × Π (deg_{x_i} + 1)`, row-major with time
/// first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepFunc {
    pub domain: Domain,
    pub m: usize,
    pub p: usize,
    pub degrees: Vec<usize>,
    pub coeffs: Vec<Vec<f64>>,
    #[serde(default)]
    pub truncation_residual: f64,
}

/// Options for adaptive sampling.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    /// Trailing coefficients below `tol` times the largest count as resolved.
    pub tol: f64,
    /// Coefficients below `chop` times the largest are dropped.
    pub chop: f64,
    pub cap: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive {
            tol: 1e-13,
            chop: 1e-14,
            cap: DEGREE_CAP,
        }
    }
}

fn shape_of(degrees: &[usize]) -> Vec<usize> {
    degrees.iter().map(|d| d + 1).collect()
}

fn maxabs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Physical Chebyshev nodes per dimension for `n` points each.
pub fn node_grid(domain: &Domain, counts: &[usize]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .enumerate()
        .map(|(dim, &n)| {
            let (lo, hi) = domain.interval(dim);
            cheb::nodes(n)
                .into_iter()
                .map(|u| cheb::from_unit(u, lo, hi))
                .collect()
        })
        .collect()
}

/// Decode a flat row-major index into a point of the tensor grid.
pub(crate) fn grid_point(grid: &[Vec<f64>], mut flat: usize, out: &mut [f64]) {
    for dim in (0..grid.len()).rev() {
        let n = grid[dim].len();
        out[dim] = grid[dim][flat % n];
        flat /= n;
    }
}

impl SepFunc {
    pub fn zero(domain: &Domain, m: usize, p: usize) -> Self {
        let dims = domain.dims();
        SepFunc {
            domain: domain.clone(),
            m,
            p,
            degrees: vec![0; dims],
            coeffs: vec![vec![0.0]; m],
            truncation_residual: 0.0,
        }
    }

    pub fn constant(domain: &Domain, p: usize, values: &[f64]) -> Self {
        let mut f = Self::zero(domain, values.len(), p);
        for (h, v) in values.iter().enumerate() {
            f.coeffs[h][0] = *v;
        }
        f
    }

    pub fn shape(&self) -> Vec<usize> {
        shape_of(&self.degrees)
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    fn check_finite(&self) -> Result<(), FuncError> {
        if self.coeffs.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(FuncError::NonFinite(vec![]))
        }
    }

    /// Build from values on the tensor Chebyshev grid with `counts` nodes
    /// per dimension; `values[h]` is row-major.
    pub fn from_node_values(
        domain: &Domain,
        p: usize,
        counts: &[usize],
        values: Vec<Vec<f64>>,
    ) -> Self {
        let mats: Vec<Vec<f64>> = counts.iter().map(|&n| cheb::analysis_matrix(n)).collect();
        let coeffs = values
            .into_par_iter()
            .map(|mut v| {
                let mut shape = counts.to_vec();
                for (dim, mat) in mats.iter().enumerate() {
                    let n = counts[dim];
                    let (out, sh) = apply_axis(&v, &shape, dim, mat, n);
                    v = out;
                    shape = sh;
                }
                v
            })
            .collect();
        SepFunc {
            domain: domain.clone(),
            m: 0,
            p,
            degrees: counts.iter().map(|n| n - 1).collect(),
            coeffs,
            truncation_residual: 0.0,
        }
        .fix_m()
    }

    fn fix_m(mut self) -> Self {
        self.m = self.coeffs.len();
        self
    }

    /// Sample `sampler` on tensor Chebyshev grids, doubling the node count
    /// along unresolved dimensions until the trailing coefficients are
    /// negligible or the cap is reached, then chop.
    pub fn adaptive<E>(
        domain: &Domain,
        p: usize,
        start_degrees: &[usize],
        opts: Adaptive,
        sampler: &dyn Fn(&[Vec<f64>]) -> Result<Vec<Vec<f64>>, E>,
    ) -> Result<Self, E> {
        let cap_n = opts.cap + 1;
        let mut counts: Vec<usize> = start_degrees
            .iter()
            .map(|&d| (d + 9).min(cap_n))
            .collect();
        loop {
            let grid = node_grid(domain, &counts);
            let values = sampler(&grid)?;
            let f = Self::from_node_values(domain, p, &counts, values);
            let shape = f.shape();
            let scale = f.coeffs.iter().map(|c| maxabs(c)).fold(0.0, f64::max);
            let mut grow = false;
            for dim in 0..counts.len() {
                let n = counts[dim];
                let tail_len = if n >= 16 { 4 } else { (n / 4).max(1) };
                let tail = f.slice_max(&shape, dim, n - tail_len, n);
                if tail > opts.tol * scale && n < cap_n {
                    counts[dim] = (2 * n).min(cap_n);
                    grow = true;
                }
            }
            if !grow {
                let mut f = f;
                let resid: f64 = (0..counts.len())
                    .map(|dim| {
                        let n = counts[dim];
                        if n == cap_n {
                            f.slice_max(&shape, dim, n - 2, n)
                        } else {
                            0.0
                        }
                    })
                    .sum();
                f = f.chop(opts.chop);
                f.truncation_residual += resid;
                return Ok(f);
            }
        }
    }

    /// Max absolute coefficient with index in `[from, to)` along `dim`.
    fn slice_max(&self, shape: &[usize], dim: usize, from: usize, to: usize) -> f64 {
        let inner: usize = shape[dim + 1..].iter().product();
        let n = shape[dim];
        let mut best = 0.0f64;
        for c in &self.coeffs {
            for (flat, v) in c.iter().enumerate() {
                let idx = (flat / inner) % n;
                if idx >= from && idx < to {
                    best = best.max(v.abs());
                }
            }
        }
        best
    }

    /// Drop trailing slices whose coefficients are all below `rel` times the
    /// largest coefficient; the discarded mass is added to the truncation
    /// residual.
    pub fn chop(self, rel: f64) -> Self {
        let scale = self.coeffs.iter().map(|c| maxabs(c)).fold(0.0, f64::max);
        let shape = self.shape();
        let mut keep = self.degrees.clone();
        for dim in 0..shape.len() {
            let mut d = self.degrees[dim];
            while d > 0 && self.slice_max(&shape, dim, d, d + 1) <= rel * scale {
                d -= 1;
            }
            keep[dim] = d;
        }
        self.resize(&keep)
    }

    /// Pad with zeros or truncate to `degrees`; truncated mass is recorded.
    pub fn resize(&self, degrees: &[usize]) -> Self {
        let old = self.shape();
        let new = shape_of(degrees);
        if old == new {
            return self.clone();
        }
        let total: usize = new.iter().product();
        let mut dropped = 0.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let mut out = vec![0.0; total];
                let mut idx = vec![0usize; old.len()];
                for (flat, &v) in c.iter().enumerate() {
                    let mut rem = flat;
                    for dim in (0..old.len()).rev() {
                        idx[dim] = rem % old[dim];
                        rem /= old[dim];
                    }
                    if idx.iter().zip(&new).all(|(i, n)| i < n) {
                        let mut j = 0;
                        for dim in 0..new.len() {
                            j = j * new[dim] + idx[dim];
                        }
                        out[j] = v;
                    } else {
                        dropped += v.abs();
                    }
                }
                out
            })
            .collect();
        SepFunc {
            domain: self.domain.clone(),
            m: self.m,
            p: self.p,
            degrees: degrees.to_vec(),
            coeffs,
            truncation_residual: self.truncation_residual + dropped,
        }
    }

    /// Truncate every dimension to at most `cap`.
    pub fn truncate_to_cap(&self, cap: usize) -> Self {
        let d: Vec<usize> = self.degrees.iter().map(|&d| d.min(cap)).collect();
        self.resize(&d)
    }

    fn same_space(&self, o: &SepFunc) -> Result<(), FuncError> {
        if self.domain != o.domain || self.m != o.m {
            Err(FuncError::Mismatch)
        } else {
            Ok(())
        }
    }

    /// `a·self + b·o`, padding to common degrees.
    pub fn axpby(&self, a: f64, o: &SepFunc, b: f64) -> Result<SepFunc, FuncError> {
        self.same_space(o)?;
        let deg: Vec<usize> = self
            .degrees
            .iter()
            .zip(&o.degrees)
            .map(|(x, y)| *x.max(y))
            .collect();
        let x = self.resize(&deg);
        let y = o.resize(&deg);
        let coeffs = x
            .coeffs
            .iter()
            .zip(&y.coeffs)
            .map(|(u, v)| u.iter().zip(v).map(|(p, q)| a * p + b * q).collect())
            .collect();
        Ok(SepFunc {
            domain: self.domain.clone(),
            m: self.m,
            p: self.p.max(o.p),
            degrees: deg,
            coeffs,
            truncation_residual: a.abs() * self.truncation_residual
                + b.abs() * o.truncation_residual,
        })
    }

    pub fn add(&self, o: &SepFunc) -> Result<SepFunc, FuncError> {
        self.axpby(1.0, o, 1.0)
    }

    pub fn sub(&self, o: &SepFunc) -> Result<SepFunc, FuncError> {
        self.axpby(1.0, o, -1.0)
    }

    pub fn scale(&self, s: f64) -> SepFunc {
        let mut f = self.clone();
        f.coeffs.iter_mut().flatten().for_each(|v| *v *= s);
        f.truncation_residual *= s.abs();
        f
    }

    /// Component `h` as a scalar function.
    pub fn component(&self, h: usize) -> SepFunc {
        SepFunc {
            coeffs: vec![self.coeffs[h].clone()],
            m: 1,
            ..self.clone()
        }
    }

    /// Stack scalar functions on a common domain into components.
    pub fn stack(parts: &[SepFunc]) -> Result<SepFunc, FuncError> {
        let first = parts.first().ok_or(FuncError::Mismatch)?;
        let deg: Vec<usize> = (0..first.degrees.len())
            .map(|d| parts.iter().map(|f| f.degrees[d]).max().unwrap())
            .collect();
        let mut coeffs = Vec::new();
        let mut resid = 0.0;
        for f in parts {
            if f.domain != first.domain {
                return Err(FuncError::Mismatch);
            }
            let g = f.resize(&deg);
            resid += g.truncation_residual;
            coeffs.extend(g.coeffs);
        }
        Ok(SepFunc {
            domain: first.domain.clone(),
            m: coeffs.len(),
            p: first.p,
            degrees: deg,
            coeffs,
            truncation_residual: resid,
        })
    }

    /// Exact partial derivative `∂^β` with `β = (β_t, β_x1, ..)`.
    pub fn partial_derivative(&self, beta: &[usize]) -> SepFunc {
        let mut out = self.clone();
        for (dim, &order) in beta.iter().enumerate() {
            if order == 0 {
                continue;
            }
            if order > out.degrees[dim] {
                let mut deg = out.degrees.clone();
                deg[dim] = 0;
                let mut z = out.resize(&deg);
                z.coeffs.iter_mut().flatten().for_each(|v| *v = 0.0);
                z.truncation_residual = 0.0;
                return z;
            }
            let (lo, hi) = self.domain.interval(dim);
            let s = 2.0 / (hi - lo);
            let shape = out.shape();
            let new_n = shape[dim] - order;
            out.coeffs = out
                .coeffs
                .iter()
                .map(|c| {
                    map_axis(c, &shape, dim, new_n, &|fib, res| {
                        let mut d = fib.to_vec();
                        for _ in 0..order {
                            d = cheb::deriv(&d).into_iter().map(|v| v * s).collect();
                        }
                        res.copy_from_slice(&d[..res.len()]);
                    })
                })
                .collect();
            out.degrees[dim] -= order;
        }
        out
    }

    /// `j`-fold nested antiderivative in time from `t0`.
    pub fn iterated_time_integral(&self, j: usize) -> Result<SepFunc, FuncError> {
        self.iterated_time_integral_capped(j, DEGREE_CAP)
    }

    pub fn iterated_time_integral_capped(&self, j: usize, cap: usize) -> Result<SepFunc, FuncError> {
        let needed = self.degrees[0] + j;
        if needed > cap {
            return Err(FuncError::DegreeCap {
                dim: 0,
                needed,
                cap,
            });
        }
        let (lo, hi) = self.domain.interval(0);
        let t0 = self.domain.t0;
        let shape = self.shape();
        let new_n = shape[0] + j;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                map_axis(c, &shape, 0, new_n, &|fib, res| {
                    let s = Cheb1 {
                        lo,
                        hi,
                        c: fib.to_vec(),
                    }
                    .integrate_n(t0, j);
                    res.copy_from_slice(&s.c[..res.len()]);
                })
            })
            .collect();
        let mut deg = self.degrees.clone();
        deg[0] += j;
        Ok(SepFunc {
            domain: self.domain.clone(),
            m: self.m,
            p: self.p,
            degrees: deg,
            coeffs,
            truncation_residual: self.truncation_residual * self.domain.tbar().powi(j as i32),
        })
    }

    /// Multiply every component by a series in `t`.
    pub fn mul_time(&self, c: &Cheb1) -> SepFunc {
        let shape = self.shape();
        let new_n = shape[0] + c.c.len() - 1;
        let coeffs = self
            .coeffs
            .iter()
            .map(|v| {
                map_axis(v, &shape, 0, new_n, &|fib, res| {
                    res.copy_from_slice(&cheb::mul(fib, &c.c));
                })
            })
            .collect();
        let mut deg = self.degrees.clone();
        deg[0] = new_n - 1;
        SepFunc {
            domain: self.domain.clone(),
            m: self.m,
            p: self.p,
            degrees: deg,
            coeffs,
            truncation_residual: self.truncation_residual,
        }
    }

    /// Componentwise outer product `c(t) · g(x)` for a time-independent `g`.
    pub fn outer_time(c: &Cheb1, g: &SepFunc) -> SepFunc {
        g.resize(&{
            let mut d = g.degrees.clone();
            d[0] = 0;
            d
        })
        .mul_time(c)
    }

    /// Values of component `h` on the tensor grid `pts` (unit coordinates).
    pub fn values_on_unit_grid(&self, h: usize, pts: &[Vec<f64>]) -> Vec<f64> {
        let mut shape = self.shape();
        let mut v = self.coeffs[h].clone();
        for (dim, u) in pts.iter().enumerate() {
            let mat = cheb::eval_matrix(shape[dim], u);
            let (out, sh) = apply_axis(&v, &shape, dim, &mat, u.len());
            v = out;
            shape = sh;
        }
        v
    }

    /// Values of component `h` on a physical tensor grid.
    pub fn values_on_grid(&self, h: usize, grid: &[Vec<f64>]) -> Vec<f64> {
        let pts: Vec<Vec<f64>> = grid
            .iter()
            .enumerate()
            .map(|(dim, g)| {
                let (lo, hi) = self.domain.interval(dim);
                g.iter().map(|&x| cheb::to_unit(x, lo, hi)).collect()
            })
            .collect();
        self.values_on_unit_grid(h, &pts)
    }

    /// Point evaluation of all components.
    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let grid: Vec<Vec<f64>> = std::iter::once(vec![t])
            .chain(x.iter().map(|&v| vec![v]))
            .collect();
        (0..self.m).map(|h| self.values_on_grid(h, &grid)[0]).collect()
    }

    /// Largest coefficient difference after padding to common degrees.
    pub fn max_coeff_diff(&self, o: &SepFunc) -> Result<f64, FuncError> {
        let d = self.sub(o)?;
        Ok(d.coeffs.iter().map(|c| maxabs(c)).fold(0.0, f64::max))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| maxabs(c)).fold(0.0, f64::max)
    }

    /// Evaluate `∂^β` of every component on a physical grid.
    pub fn derivative_values(&self, beta: &[usize], grid: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let d = self.partial_derivative(beta);
        (0..self.m).map(|h| d.values_on_grid(h, grid)).collect()
    }

    pub fn to_json(&self) -> Result<String, FuncError> {
        serde_json::to_string_pretty(self).map_err(|e| FuncError::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<SepFunc, FuncError> {
        let f: SepFunc = serde_json::from_str(s).map_err(|e| FuncError::Serde(e.to_string()))?;
        f.domain.validate()?;
        if f.degrees.len() != f.domain.dims() || f.coeffs.len() != f.m {
            return Err(FuncError::Serde("inconsistent degrees or components".into()));
        }
        let n = f.len();
        if f.coeffs.iter().any(|c| c.len() != n) {
            return Err(FuncError::Serde("coefficient array has wrong length".into()));
        }
        f.check_finite()?;
        Ok(f)
    }
}

/// Sample expressions in `(t, x)` on a physical tensor grid.
pub fn sample_exprs(exprs: &[Expr], grid: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, FuncError> {
    let total: usize = grid.iter().map(|g| g.len()).product();
    let dims = grid.len();
    exprs
        .iter()
        .map(|e| {
            (0..total)
                .into_par_iter()
                .map(|flat| {
                    let mut pt = vec![0.0; dims];
                    grid_point(grid, flat, &mut pt);
                    let env = PointEnv {
                        t: pt[0],
                        x: &pt[1..],
                        slots: &[],
                        values: &[],
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

/// Interpolant of `exprs` with the given degrees and the maximal sampled
/// error on a grid three times finer.
pub fn interpolate(
    exprs: &[Expr],
    domain: &Domain,
    degrees: &[usize],
    p: usize,
) -> Result<(SepFunc, f64), FuncError> {
    domain.validate()?;
    if degrees.len() != domain.dims() {
        return Err(FuncError::Mismatch);
    }
    for (dim, &d) in degrees.iter().enumerate() {
        if d > DEGREE_CAP {
            return Err(FuncError::DegreeCap {
                dim,
                needed: d,
                cap: DEGREE_CAP,
            });
        }
    }
    let counts: Vec<usize> = degrees.iter().map(|d| d + 1).collect();
    let grid = node_grid(domain, &counts);
    let values = sample_exprs(exprs, &grid)?;
    let f = SepFunc::from_node_values(domain, p, &counts, values);
    f.check_finite()?;
    let fine: Vec<Vec<f64>> = degrees
        .iter()
        .enumerate()
        .map(|(dim, &d)| {
            let (lo, hi) = domain.interval(dim);
            cheb::lobatto(3 * (d + 1))
                .into_iter()
                .map(|u| cheb::from_unit(u, lo, hi))
                .collect()
        })
        .collect();
    let exact = sample_exprs(exprs, &fine)?;
    let mut err = 0.0f64;
    for (h, ex) in exact.iter().enumerate() {
        let approx = f.values_on_grid(h, &fine);
        for (a, b) in approx.iter().zip(ex) {
            err = err.max((a - b).abs());
        }
    }
    Ok((f, err))
}

/// Adaptive interpolation of expressions in `(t, x)`.
pub fn interpolate_adaptive(
    exprs: &[Expr],
    domain: &Domain,
    p: usize,
) -> Result<SepFunc, FuncError> {
    domain.validate()?;
    let start: Vec<usize> = (0..domain.dims())
        .map(|dim| {
            let varies = exprs.iter().any(|e| {
                if dim == 0 {
                    e.depends_on_t()
                } else {
                    e.depends_on(&|v| *v == crate::expr::Var::X(dim - 1))
                }
            });
            if varies {
                8
            } else {
                0
            }
        })
        .collect();
    let f = SepFunc::adaptive(domain, p, &start, Adaptive::default(), &|grid| {
        sample_exprs(exprs, grid)
    })?;
    let f = SepFunc { m: exprs.len(), ..f };
    f.check_finite()?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, Arity};
    use std::f64::consts::PI;

    fn dom(t: (f64, f64, f64), s: &[[f64; 2]]) -> Domain {
        Domain::new(t.0, t.1, t.2, s.to_vec()).unwrap()
    }

    fn ex(s: &str) -> Expr {
        parse_expression(s, &Arity::space_time(1)).unwrap()
    }

    #[test]
    fn domain_invariants() {
        assert!(Domain::new(0.0, 0.0, 0.0, vec![]).is_err());
        assert!(Domain::new(0.0, -1.0, 1.0, vec![]).is_err());
        assert!(Domain::new(0.0, 1.0, 1.0, vec![[1.0, 1.0]]).is_err());
        let d = dom((0.0, 0.25, 0.5), &[[0.0, 1.0]]);
        assert_eq!(d.tbar(), 0.5);
    }

    #[test]
    fn interpolate_polynomial_exactly() {
        let d = dom((0.5, 0.5, 0.5), &[[-1.0, 1.0]]);
        let (f, err) = interpolate(&[ex("x1^2")], &d, &[0, 2], 0).unwrap();
        assert!(err < 1e-13);
        assert!((f.eval(0.3, &[0.7])[0] - 0.49).abs() < 1e-14);
        let (z, err) = interpolate(&[ex("0")], &d, &[0, 2], 0).unwrap();
        assert_eq!(err, 0.0);
        assert!(z.coeffs[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn interpolate_sin_and_second_derivative() {
        let d = dom((0.0, 0.5, 0.5), &[[-PI, PI]]);
        let (f, err) = interpolate(&[ex("sin(x1)")], &d, &[0, 20], 0).unwrap();
        assert!(err <= 1e-10, "{err}");
        let dd = f.partial_derivative(&[0, 2]);
        let mut worst = 0.0f64;
        for i in 0..200 {
            let x = -PI + 2.0 * PI * i as f64 / 199.0;
            worst = worst.max((dd.eval(0.0, &[x])[0] + x.sin()).abs());
        }
        assert!(worst <= 1e-8, "{worst}");
    }

    #[test]
    fn derivatives_of_polynomial() {
        let d = dom((0.5, 0.5, 0.5), &[[-1.0, 1.0]]);
        let (f, _) = interpolate(&[ex("x1^2")], &d, &[0, 2], 0).unwrap();
        let fx = f.partial_derivative(&[0, 1]);
        assert!((fx.eval(0.2, &[0.3])[0] - 0.6).abs() < 1e-14);
        let ft = f.partial_derivative(&[1, 0]);
        assert!(ft.coeffs[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn time_integrals() {
        let d = dom((0.0, 0.0, 1.0), &[]);
        let one = SepFunc::constant(&d, 0, &[1.0]);
        let i2 = one.iterated_time_integral(2).unwrap();
        assert!((i2.eval(1.0, &[])[0] - 0.5).abs() < 1e-15);
        assert!(i2.eval(0.0, &[])[0].abs() < 1e-15);
        let zero = SepFunc::zero(&d, 1, 0).iterated_time_integral(1).unwrap();
        assert_eq!(zero.max_abs_coeff(), 0.0);
        let back = i2.partial_derivative(&[2]);
        assert!(back.max_coeff_diff(&one).unwrap() < 1e-12);
    }

    #[test]
    fn adaptive_interpolation_chops() {
        let d = dom((0.0, 1.0, 1.0), &[[0.0, 2.0]]);
        let f = interpolate_adaptive(&[ex("t^3*x1 + 1")], &d, 0).unwrap();
        assert_eq!(f.degrees, vec![3, 1]);
        let g = interpolate_adaptive(&[ex("exp(t)*sin(3*x1)")], &d, 0).unwrap();
        let v = g.eval(0.4, &[1.1])[0];
        assert!((v - 0.4f64.exp() * 3.3f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn time_products_and_outer() {
        let d = dom((0.0, 1.0, 1.0), &[[0.0, 1.0]]);
        let g = interpolate_adaptive(&[ex("x1^2")], &d, 0).unwrap();
        let c = Cheb1::shifted_monomial(-1.0, 1.0, 0.0, 2);
        let h = SepFunc::outer_time(&c, &g);
        assert!((h.eval(0.6, &[0.5])[0] - 0.18 * 0.25).abs() < 1e-15);
        let k = h.mul_time(&c);
        assert!((k.eval(0.6, &[0.5])[0] - 0.18 * 0.18 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let d = dom((0.0, 1.0, 1.0), &[[0.0, 1.0]]);
        let f = interpolate_adaptive(&[ex("t*x1 + 2"), ex("x1")], &d, 1).unwrap();
        let s = f.to_json().unwrap();
        assert!(s.contains("\"S\""));
        let g = SepFunc::from_json(&s).unwrap();
        assert_eq!(f, g);
        assert!(SepFunc::from_json("{\"m\": 1}").is_err());
    }
}
