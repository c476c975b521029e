//! One-dimensional Chebyshev (first kind) utilities on `[-1, 1]` and on
//! affinely mapped intervals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Chebyshev points of the first kind, `cos(π(j+½)/n)`.
pub fn nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| (PI * (j as f64 + 0.5) / n as f64).cos())
        .collect()
}

/// Chebyshev–Lobatto points including both endpoints.
pub fn lobatto(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            .map(|j| (PI * j as f64 / (n - 1) as f64).cos())
            .collect(),
    }
}

/// Row-major `n × n` matrix taking values at `nodes(n)` to coefficients.
pub fn analysis_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let w = if k == 0 { 1.0 } else { 2.0 } / n as f64;
        for j in 0..n {
            m[k * n + j] = w * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
        }
    }
    m
}

/// Row-major `pts × n` matrix with entries `T_k(u_i)`.
pub fn eval_matrix(n: usize, pts: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; pts.len() * n];
    for (i, &u) in pts.iter().enumerate() {
        let row = &mut m[i * n..(i + 1) * n];
        if n > 0 {
            row[0] = 1.0;
        }
        if n > 1 {
            row[1] = u;
        }
        for k in 2..n {
            row[k] = 2.0 * u * row[k - 1] - row[k - 2];
        }
    }
    m
}

pub fn clenshaw(c: &[f64], u: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * u * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c.first().copied().unwrap_or(0.0) + u * b1 - b2
}

/// Derivative coefficients on `[-1, 1]`; the result has length
/// `max(len - 1, 1)`.
pub fn deriv(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n + 1];
    for k in (1..n).rev() {
        d[k - 1] = d[k + 1] + 2.0 * k as f64 * c[k];
    }
    d[0] *= 0.5;
    d.truncate(n - 1);
    d
}

/// Antiderivative coefficients on `[-1, 1]` with zero constant term.
pub fn antideriv(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n + 1];
    for (k, &ck) in c.iter().enumerate() {
        match k {
            0 => out[1] += ck,
            1 => out[2] += ck / 4.0,
            _ => {
                out[k + 1] += ck / (2.0 * (k + 1) as f64);
                out[k - 1] -= ck / (2.0 * (k - 1) as f64);
            }
        }
    }
    out
}

/// Product of two Chebyshev series via `T_i T_j = (T_{i+j} + T_{|i-j|})/2`.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            let v = 0.5 * ai * bj;
            out[i + j] += v;
            out[i.abs_diff(j)] += v;
        }
    }
    out
}

/// Affine map from `[lo, hi]` to `[-1, 1]`.
pub fn to_unit(x: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        0.0
    } else {
        (2.0 * x - lo - hi) / (hi - lo)
    }
}

pub fn from_unit(u: f64, lo: f64, hi: f64) -> f64 {
    0.5 * (lo + hi) + 0.5 * (hi - lo) * u
}

/// A Chebyshev series in one variable on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cheb1 {
    pub lo: f64,
    pub hi: f64,
    pub c: Vec<f64>,
}

impl Cheb1 {
    pub fn zero(lo: f64, hi: f64) -> Self {
        Cheb1 { lo, hi, c: vec![0.0] }
    }

    pub fn constant(lo: f64, hi: f64, v: f64) -> Self {
        Cheb1 { lo, hi, c: vec![v] }
    }

    /// The monomial `(t - t0)^j / j!` represented exactly.
    pub fn shifted_monomial(lo: f64, hi: f64, t0: f64, j: usize) -> Self {
        // x - t0 = h·u + (mid - t0)
        let h = 0.5 * (hi - lo);
        let lin = Cheb1 {
            lo,
            hi,
            c: vec![0.5 * (lo + hi) - t0, h],
        };
        let mut out = Cheb1::constant(lo, hi, 1.0);
        for k in 1..=j {
            out = out.mul(&lin).scale(1.0 / k as f64);
        }
        out
    }

    /// Interpolate at `n` Chebyshev nodes.
    pub fn interpolate<E>(
        lo: f64,
        hi: f64,
        n: usize,
        f: &dyn Fn(f64) -> Result<f64, E>,
    ) -> Result<Self, E> {
        let u = nodes(n);
        let mut vals = Vec::with_capacity(n);
        for &ui in &u {
            vals.push(f(from_unit(ui, lo, hi))?);
        }
        Ok(Self::from_node_values(lo, hi, &vals))
    }

    pub fn from_node_values(lo: f64, hi: f64, vals: &[f64]) -> Self {
        let n = vals.len();
        let a = analysis_matrix(n);
        let c = (0..n)
            .map(|k| (0..n).map(|j| a[k * n + j] * vals[j]).sum())
            .collect();
        Cheb1 { lo, hi, c }
    }

    /// Adaptive interpolation doubling the node count until the trailing
    /// coefficients fall below `tol` relative to the largest one.
    pub fn adaptive<E>(
        lo: f64,
        hi: f64,
        max_n: usize,
        tol: f64,
        f: &dyn Fn(f64) -> Result<f64, E>,
    ) -> Result<Self, E> {
        let mut n = 17;
        loop {
            let s = Self::interpolate(lo, hi, n, f)?;
            let scale = s.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tail = s.c[n - 4..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if tail <= tol * scale || scale == 0.0 || n >= max_n {
                return Ok(s.chopped(tol * 1e-2));
            }
            n = (2 * n - 1).min(max_n);
        }
    }

    /// Drop trailing coefficients below `rel` times the largest one.
    pub fn chopped(mut self, rel: f64) -> Self {
        let scale = self.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        while self.c.len() > 1 && self.c.last().unwrap().abs() <= rel * scale {
            self.c.pop();
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.c, to_unit(x, self.lo, self.hi))
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.c.iter_mut().for_each(|v| *v *= s);
        self
    }

    pub fn add(&self, o: &Cheb1) -> Cheb1 {
        let n = self.c.len().max(o.c.len());
        let mut c = vec![0.0; n];
        for (i, v) in self.c.iter().enumerate() {
            c[i] += v;
        }
        for (i, v) in o.c.iter().enumerate() {
            c[i] += v;
        }
        Cheb1 {
            lo: self.lo,
            hi: self.hi,
            c,
        }
    }

    pub fn mul(&self, o: &Cheb1) -> Cheb1 {
        Cheb1 {
            lo: self.lo,
            hi: self.hi,
            c: mul(&self.c, &o.c),
        }
    }

    pub fn deriv(&self) -> Cheb1 {
        let s = if self.hi > self.lo {
            2.0 / (self.hi - self.lo)
        } else {
            0.0
        };
        let c = deriv(&self.c).into_iter().map(|v| v * s).collect();
        Cheb1 {
            lo: self.lo,
            hi: self.hi,
            c,
        }
    }

    pub fn deriv_n(&self, n: usize) -> Cheb1 {
        (0..n).fold(self.clone(), |acc, _| acc.deriv())
    }

    /// Antiderivative vanishing at `t0`.
    pub fn antideriv_from(&self, t0: f64) -> Cheb1 {
        let s = 0.5 * (self.hi - self.lo);
        let mut c: Vec<f64> = antideriv(&self.c).into_iter().map(|v| v * s).collect();
        c[0] -= clenshaw(&c, to_unit(t0, self.lo, self.hi));
        Cheb1 {
            lo: self.lo,
            hi: self.hi,
            c,
        }
    }

    /// `j`-fold nested antiderivative from `t0`.
    pub fn integrate_n(&self, t0: f64, j: usize) -> Cheb1 {
        (0..j).fold(self.clone(), |acc, _| acc.antideriv_from(t0))
    }

    /// Maximum of `|f|` sampled at `n` Lobatto points.
    pub fn sup_abs(&self, n: usize) -> f64 {
        lobatto(n.max(2))
            .iter()
            .map(|&u| clenshaw(&self.c, u).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_polynomials() {
        let f = |x: f64| -> Result<f64, ()> { Ok(3.0 * x * x * x - x + 2.0) };
        let s = Cheb1::interpolate(-1.0, 2.0, 6, &f).unwrap();
        for x in [-1.0, 0.1, 1.7, 2.0] {
            assert!((s.eval(x) - f(x).unwrap()).abs() < 1e-13);
        }
        assert!(s.c[4].abs() < 1e-14 && s.c[5].abs() < 1e-14);
    }

    #[test]
    fn derivative_and_antiderivative() {
        let f = |x: f64| -> Result<f64, ()> { Ok(x.sin()) };
        let s = Cheb1::interpolate(0.0, 2.0, 24, &f).unwrap();
        let d = s.deriv();
        for x in [0.0, 0.7, 2.0] {
            assert!((d.eval(x) - x.cos()).abs() < 1e-12);
        }
        let i = s.antideriv_from(0.5);
        for x in [0.0, 0.5, 1.3] {
            assert!((i.eval(x) - (0.5f64.cos() - x.cos())).abs() < 1e-13);
        }
        let back = i.deriv();
        for x in [0.2, 1.9] {
            assert!((back.eval(x) - x.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn products_and_monomials() {
        let m = Cheb1::shifted_monomial(-0.5, 1.5, 0.25, 3);
        for x in [-0.5, 0.25, 1.0, 1.5] {
            let e = (x - 0.25f64).powi(3) / 6.0;
            assert!((m.eval(x) - e).abs() < 1e-14);
        }
        let a = Cheb1::shifted_monomial(0.0, 1.0, 0.0, 2);
        let b = Cheb1::shifted_monomial(0.0, 1.0, 0.0, 1);
        let p = a.mul(&b);
        assert!((p.eval(0.8) - 0.8f64.powi(3) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_resolves_exponential() {
        let f = |x: f64| -> Result<f64, ()> { Ok((3.0 * x).exp()) };
        let s = Cheb1::adaptive(-1.0, 1.0, 129, 1e-14, &f).unwrap();
        assert!((s.eval(0.3) - 0.9f64.exp()).abs() < 1e-12);
        assert!(s.degree() < 40);
    }
}
