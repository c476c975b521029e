//! Lipschitz factors with loss of derivatives and the contraction constants
//! `Λ̄_{k,n}` built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{eval_g, initial_polynomial, CauchyProblem, PdeError};
use crate::expr::{affine_split, Bindings, Var};
use crate::funcspace::{cheb, graded_norms_upto, Cheb1, Domain, NormConfig, Radii, SepFunc};

/// Replaces vanishing factors so that logarithms stay finite.
pub const LAMBDA_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorMode {
    Constant,
    Function,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzMethod {
    LinearExact,
    Sampled,
    Given,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingMeta {
    pub pairs: usize,
    pub seed: u64,
    pub inflation: f64,
    pub k_max: usize,
    pub certified: bool,
}

/// Factors `Λ_k`, constant or functions on `T × S`; indices past the stored
/// range reuse the last entry.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzFactors {
    pub mode: FactorMode,
    /// `Λ_k` in constant mode, `sup_{T×S} Λ_k` in function mode; running max.
    pub constants: Vec<f64>,
    #[serde(skip)]
    pub functions: Vec<SepFunc>,
    /// `G` does not depend on `y`; every `Λ̄_{k,n}` with `n ≥ 1` is zero.
    pub exact_zero: bool,
    pub method: LipschitzMethod,
    pub sampling: Option<SamplingMeta>,
}

fn running_max_floor(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0f64;
    values
        .iter()
        .map(|v| {
            acc = acc.max(*v);
            acc.max(LAMBDA_FLOOR)
        })
        .collect()
}

impl LipschitzFactors {
    pub fn constant(values: &[f64]) -> Self {
        let exact_zero = values.iter().all(|v| *v == 0.0);
        LipschitzFactors {
            mode: FactorMode::Constant,
            constants: running_max_floor(values),
            functions: Vec::new(),
            exact_zero,
            method: LipschitzMethod::Given,
            sampling: None,
        }
    }

    /// Function-mode factors from scalar functions on `T × S`.
    pub fn from_functions(fs: Vec<SepFunc>) -> Result<Self, PdeError> {
        let cfg = NormConfig::default();
        let sups = fs
            .iter()
            .map(|f| Ok(graded_norms_upto(&f.clone().with_p(0), 0, &cfg)?[0]))
            .collect::<Result<Vec<f64>, PdeError>>()?;
        let exact_zero = sups.iter().all(|v| *v == 0.0);
        Ok(LipschitzFactors {
            mode: FactorMode::Function,
            constants: running_max_floor(&sups),
            functions: fs,
            exact_zero,
            method: LipschitzMethod::Given,
            sampling: None,
        })
    }

    pub fn get(&self, k: usize) -> f64 {
        *self
            .constants
            .get(k)
            .unwrap_or_else(|| self.constants.last().unwrap_or(&LAMBDA_FLOOR))
    }

    fn function(&self, k: usize) -> &SepFunc {
        self.functions
            .get(k)
            .unwrap_or_else(|| self.functions.last().expect("function-mode factors are non-empty"))
    }
}

/// Largest `Σ_z |c_{h,z}(t)|` over components and a dense time grid, for
/// right-hand sides affine in the placeholders with coefficients free of `x`.
fn linear_exact(problem: &CauchyProblem) -> Result<LipschitzFactors, PdeError> {
    let (lo, hi) = problem.domain.interval(0);
    let ts: Vec<f64> = cheb::lobatto(2001)
        .into_iter()
        .map(|u| cheb::from_unit(u, lo, hi))
        .collect();
    let mut norm = 0.0f64;
    for (h, e) in problem.rhs.iter().enumerate() {
        let split = affine_split(e).ok_or_else(|| {
            PdeError::NotLinear(format!("component {} is not affine in the derivatives", h + 1))
        })?;
        for (_, c) in &split.terms {
            if c.depends_on_x() {
                return Err(PdeError::NotLinear(format!("coefficient {c} depends on x")));
            }
        }
        for &t in &ts {
            let b = Bindings::new().with(Var::T, t);
            let mut row = 0.0;
            for (_, c) in &split.terms {
                row += c.eval(&b)?.abs();
            }
            norm = norm.max(row);
        }
    }
    let mut f = LipschitzFactors::constant(&[norm]);
    f.method = LipschitzMethod::LinearExact;
    Ok(f)
}

/// Random polynomial perturbation with `‖w‖_j ≤ r_j` for `j ≤ top`.
fn perturbation(
    rng: &mut ChaCha8Rng,
    center: &SepFunc,
    radii: &Radii,
    top: usize,
    cfg: &NormConfig,
) -> Result<SepFunc, PdeError> {
    let mut deg = vec![3usize; center.degrees.len()];
    deg[0] = 2;
    let mut w = SepFunc::zero(&center.domain, center.m, center.p).resize(&deg);
    for c in w.coeffs.iter_mut() {
        for v in c.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let norms = graded_norms_upto(&w, top, cfg)?;
    let mut s = f64::INFINITY;
    for (j, n) in norms.iter().enumerate() {
        if *n > 0.0 {
            s = s.min(radii.get(j).value() / n);
        }
    }
    let frac: f64 = rng.gen_range(0.05..1.0);
    Ok(w.scale(if s.is_finite() { s * frac } else { frac }))
}

fn sampled(
    problem: &CauchyProblem,
    radii: &Radii,
    k_max: usize,
    pairs: usize,
    seed: u64,
) -> Result<LipschitzFactors, PdeError> {
    let cfg = NormConfig::default();
    let top = k_max + problem.l + problem.p;
    for j in 0..=top {
        if radii.get(j).is_infinite() {
            return Err(PdeError::InfiniteRadius { k: j });
        }
    }
    if problem.slots().is_empty() {
        let mut f = LipschitzFactors::constant(&[0.0]);
        f.method = LipschitzMethod::Sampled;
        return Ok(f);
    }
    let i0 = initial_polynomial(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = vec![0.0f64; k_max + 1];
    let mut used = 0usize;
    for _ in 0..pairs {
        let u = i0.add(&perturbation(&mut rng, &i0, radii, top, &cfg)?)?;
        let v = i0.add(&perturbation(&mut rng, &i0, radii, top, &cfg)?)?;
        let dg = eval_g(problem, &u)?.sub(&eval_g(problem, &v)?)?.with_p(0);
        let num = graded_norms_upto(&dg, k_max, &cfg)?;
        let den = graded_norms_upto(&u.sub(&v)?, k_max + problem.l, &cfg)?;
        let mut any = false;
        for k in 0..=k_max {
            let dk = den[k + problem.l];
            if dk > 0.0 {
                best[k] = best[k].max(num[k] / dk);
                any = true;
            }
        }
        used += any as usize;
    }
    if used == 0 {
        return Err(PdeError::EmptySample);
    }
    let inflation = 1.25;
    let vals: Vec<f64> = best.iter().map(|b| b * inflation).collect();
    let mut f = LipschitzFactors::constant(&vals);
    f.exact_zero = false;
    f.method = LipschitzMethod::Sampled;
    f.sampling = Some(SamplingMeta {
        pairs,
        seed,
        inflation,
        k_max,
        certified: false,
    });
    Ok(f)
}

/// Estimate `Λ_k` for `k ≤ k_max`.
///
/// `LinearExact` is exact for right-hand sides affine in the derivatives
/// with time-only coefficients (max-row-sum norm of the coefficient matrix).
/// `Sampled` draws `pairs` random perturbations of `i0` inside the ball and
/// inflates the largest observed ratio by 1.25; it is an estimate, not a
/// certified bound.
pub fn estimate_lipschitz(
    problem: &CauchyProblem,
    radii: &Radii,
    method: LipschitzMethod,
    k_max: usize,
    pairs: usize,
    seed: u64,
) -> Result<LipschitzFactors, PdeError> {
    match method {
        LipschitzMethod::LinearExact => linear_exact(problem),
        LipschitzMethod::Sampled => sampled(problem, radii, k_max, pairs, seed),
        LipschitzMethod::Given => Err(PdeError::InvalidProblem(
            "given factors are constructed directly".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    /// The nested-integral recursion.
    Conservative,
    /// `T̄^{nd}/(nd)! · Π_{j<n} Λ_{k+jL}`.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPath {
    ClosedForm,
    Spectral,
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaValue {
    pub k: usize,
    pub n: usize,
    /// `max_x Λ^j_{k,n}` at `|t − t0| = T̄` for `j = 1..d`.
    pub per_j: Vec<f64>,
    pub bar: f64,
    pub path: LambdaPath,
}

fn ln_fact(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

const TAU_NODES: usize = 96;

/// One branch of the recursion on a `(τ, x)` node grid with
/// `τ ∈ [0, T̄]`. `levels[i][q][x]` holds `Λ_{k+iL}` at the nodes; returns
/// `max_x Λ^j_{k,n}(T̄, x)` for each `j`.
fn spectral_chain(levels: &[Vec<Vec<f64>>], nx: usize, d: usize, tbar: f64) -> Vec<f64> {
    let nt = TAU_NODES;
    let taus: Vec<f64> = cheb::nodes(nt)
        .into_iter()
        .map(|u| cheb::from_unit(u, 0.0, tbar))
        .collect();
    let mut prev: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0; nx]; nt]; d];
    let mut at_end: Vec<Vec<f64>> = vec![vec![1.0; nx]; d];
    for lam in levels.iter().rev() {
        let g: Vec<Vec<f64>> = (0..nt)
            .map(|q| {
                (0..nx)
                    .map(|x| {
                        let m = (0..d).map(|l| prev[l][q][x]).fold(0.0, f64::max);
                        lam[q][x] * m
                    })
                    .collect()
            })
            .collect();
        let mut next = vec![vec![vec![0.0; nx]; nt]; d];
        let mut end = vec![vec![0.0; nx]; d];
        for x in 0..nx {
            let col: Vec<f64> = (0..nt).map(|q| g[q][x]).collect();
            let mut s = Cheb1::from_node_values(0.0, tbar, &col);
            for j in 0..d {
                s = s.antideriv_from(0.0);
                for (q, &tau) in taus.iter().enumerate() {
                    next[j][q][x] = s.eval(tau).abs();
                }
                end[j][x] = s.eval(tbar).abs();
            }
        }
        prev = next;
        at_end = end;
    }
    at_end
        .iter()
        .map(|row| row.iter().cloned().fold(0.0, f64::max))
        .collect()
}

fn x_nodes(domain: &Domain, fs: &[&SepFunc]) -> Vec<Vec<f64>> {
    (1..domain.dims())
        .map(|dim| {
            let varies = fs.iter().any(|f| f.degrees[dim] > 0);
            let (lo, hi) = domain.interval(dim);
            if varies {
                cheb::lobatto(17)
                    .into_iter()
                    .map(|u| cheb::from_unit(u, lo, hi))
                    .collect()
            } else {
                vec![0.5 * (lo + hi)]
            }
        })
        .collect()
}

/// Values of `Λ_k(t0 ± τ, x)` on the branch grid, extended by the sup over
/// `T` where `t0 ± τ` leaves `T`.
fn branch_values(f: &SepFunc, xs: &[Vec<f64>], sign: f64, reach: f64, tbar: f64) -> Vec<Vec<f64>> {
    let dom = &f.domain;
    let taus: Vec<f64> = cheb::nodes(TAU_NODES)
        .into_iter()
        .map(|u| cheb::from_unit(u, 0.0, tbar))
        .collect();
    let (lo, hi) = dom.interval(0);
    let tgrid: Vec<f64> = cheb::lobatto(64)
        .into_iter()
        .map(|u| cheb::from_unit(u, lo, hi))
        .collect();
    let mut g = vec![tgrid];
    g.extend(xs.iter().cloned());
    let dense = f.values_on_grid(0, &g);
    let nx: usize = xs.iter().map(|v| v.len()).product::<usize>().max(1);
    let sup: Vec<f64> = (0..nx)
        .map(|x| (0..64).map(|q| dense[q * nx + x].abs()).fold(0.0, f64::max))
        .collect();
    taus.iter()
        .map(|&tau| {
            if tau <= reach {
                let mut g = vec![vec![dom.t0 + sign * tau]];
                g.extend(xs.iter().cloned());
                f.values_on_grid(0, &g).into_iter().map(f64::abs).collect()
            } else {
                sup.clone()
            }
        })
        .collect()
}

/// `Λ^j_{k,n}` and `Λ̄_{k,n}` from the nested-integral recursion
///
/// ```text
/// Λ^j_{k,0} = 1,   Λ^j_{k,n+1}(t, x) = |∫…∫_{t0}^{t} Λ_k(s, x) max_l Λ^l_{k+L,n}(s, x) ds^j|
/// ```
///
/// evaluated at `|t − t0| = T̄`. Constant factors with `d = 1` or `T̄ ≤ 1`
/// use the closed form `Π Λ · T̄^{n-1+j}/(n-1+j)!`; otherwise the recursion
/// runs on Chebyshev nodes in `τ = |t − t0|`.
pub fn lambda_recursion(
    factors: &LipschitzFactors,
    domain: &Domain,
    d: usize,
    l: usize,
    k: usize,
    n: usize,
) -> Result<LambdaValue, PdeError> {
    let tbar = domain.tbar();
    if n == 0 {
        return Ok(LambdaValue {
            k,
            n,
            per_j: vec![1.0; d],
            bar: 1.0,
            path: LambdaPath::ClosedForm,
        });
    }
    if factors.exact_zero {
        return Ok(LambdaValue {
            k,
            n,
            per_j: vec![0.0; d],
            bar: 0.0,
            path: LambdaPath::ClosedForm,
        });
    }
    let (per_j, path) = match factors.mode {
        FactorMode::Constant if d == 1 || tbar <= 1.0 => {
            let ln_prod: f64 = (0..n).map(|i| factors.get(k + i * l).ln()).sum();
            let per_j = (1..=d)
                .map(|j| {
                    let e = n - 1 + j;
                    (ln_prod + e as f64 * tbar.ln() - ln_fact(e)).exp()
                })
                .collect();
            (per_j, LambdaPath::ClosedForm)
        }
        FactorMode::Constant => {
            let levels: Vec<Vec<Vec<f64>>> = (0..n)
                .map(|i| vec![vec![factors.get(k + i * l)]; TAU_NODES])
                .collect();
            (spectral_chain(&levels, 1, d, tbar), LambdaPath::Spectral)
        }
        FactorMode::Function => {
            let used: Vec<&SepFunc> = (0..n).map(|i| factors.function(k + i * l)).collect();
            let xs = x_nodes(domain, &used);
            let nx = xs.iter().map(|v| v.len()).product::<usize>().max(1);
            let mut best = vec![0.0f64; d];
            for (sign, reach) in [(1.0, domain.b), (-1.0, domain.a)] {
                let levels: Vec<Vec<Vec<f64>>> = used
                    .iter()
                    .map(|f| branch_values(f, &xs, sign, reach, tbar))
                    .collect();
                for (b, v) in best.iter_mut().zip(spectral_chain(&levels, nx, d, tbar)) {
                    *b = b.max(v);
                }
            }
            (best, LambdaPath::Spectral)
        }
    };
    let bar = per_j.iter().cloned().fold(0.0, f64::max);
    Ok(LambdaValue {
        k,
        n,
        per_j,
        bar,
        path,
    })
}

/// `ln Λ̄_{k,n}` for `n = 0..=n_max` in the requested mode.
pub fn ln_lambda_bar_row(
    factors: &LipschitzFactors,
    domain: &Domain,
    d: usize,
    l: usize,
    k: usize,
    n_max: usize,
    mode: LambdaMode,
) -> Result<(Vec<f64>, LambdaPath), PdeError> {
    let tbar = domain.tbar();
    match mode {
        LambdaMode::Paper => {
            let row = (0..=n_max)
                .map(|n| {
                    if n == 0 {
                        0.0
                    } else if factors.exact_zero {
                        f64::NEG_INFINITY
                    } else {
                        let ln_prod: f64 = (0..n).map(|i| factors.get(k + i * l).ln()).sum();
                        ln_prod + (n * d) as f64 * tbar.ln() - ln_fact(n * d)
                    }
                })
                .collect();
            Ok((row, LambdaPath::Paper))
        }
        LambdaMode::Conservative => {
            let mut row = Vec::with_capacity(n_max + 1);
            let mut path = LambdaPath::ClosedForm;
            for n in 0..=n_max {
                if factors.exact_zero && n > 0 {
                    row.push(f64::NEG_INFINITY);
                    continue;
                }
                if factors.mode == FactorMode::Constant && (d == 1 || tbar <= 1.0) && n > 0 {
                    let ln_prod: f64 = (0..n).map(|i| factors.get(k + i * l).ln()).sum();
                    row.push(ln_prod + n as f64 * tbar.ln() - ln_fact(n));
                    continue;
                }
                let v = lambda_recursion(factors, domain, d, l, k, n)?;
                if v.path == LambdaPath::Spectral {
                    path = LambdaPath::Spectral;
                }
                row.push(v.bar.ln());
            }
            Ok((row, path))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::interpolate;
    use crate::expr::{parse_expression, Arity};

    fn dom(a: f64, b: f64) -> Domain {
        Domain::new(0.0, a, b, vec![[0.0, 1.0]]).unwrap()
    }

    #[test]
    fn recursion_examples() {
        let f = LipschitzFactors::constant(&[2.0]);
        let dm = dom(0.5, 0.5);
        assert_eq!(lambda_recursion(&f, &dm, 1, 2, 0, 0).unwrap().bar, 1.0);
        assert!((lambda_recursion(&f, &dm, 1, 2, 0, 1).unwrap().bar - 1.0).abs() < 1e-15);
        assert!((lambda_recursion(&f, &dm, 1, 2, 0, 2).unwrap().bar - 0.5).abs() < 1e-15);
        let (row, _) = ln_lambda_bar_row(&f, &dm, 2, 2, 0, 3, LambdaMode::Paper).unwrap();
        let expect = 8.0 * 0.5f64.powi(6) / 720.0;
        assert!((row[3].exp() - expect).abs() < 1e-15);
    }

    #[test]
    fn spectral_matches_closed_form_where_both_apply() {
        let f = LipschitzFactors::constant(&[1.5, 2.0, 2.5]);
        let dm = dom(0.8, 0.8);
        for n in 1..6 {
            let closed = lambda_recursion(&f, &dm, 2, 1, 0, n).unwrap();
            let levels: Vec<Vec<Vec<f64>>> = (0..n)
                .map(|i| vec![vec![f.get(i)]; TAU_NODES])
                .collect();
            let spec = spectral_chain(&levels, 1, 2, 0.8);
            for (a, b) in closed.per_j.iter().zip(&spec) {
                assert!((a - b).abs() <= 1e-10 * a, "{n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn function_mode_constant_functions() {
        let dm = dom(0.3, 0.7);
        let e = parse_expression("3", &Arity::space_time(1)).unwrap();
        let lam = interpolate(&[e], &dm, &[0, 0], 0).unwrap().0;
        let f = LipschitzFactors::from_functions(vec![lam]).unwrap();
        for n in 0..8 {
            let v = lambda_recursion(&f, &dm, 1, 1, 0, n).unwrap();
            let expect = 3f64.powi(n as i32) * 0.7f64.powi(n as i32) / ln_fact(n).exp();
            assert!((v.bar - expect).abs() <= 1e-10 * expect);
        }
    }

    #[test]
    fn linear_exact_factors() {
        let dm = dom(0.5, 0.5);
        let p = CauchyProblem::scalar(dm.clone(), 1, 0, 2, "Dx2(y)", &["sin(x)"]).unwrap();
        let f = estimate_lipschitz(&p, &Radii::infinite(), LipschitzMethod::LinearExact, 4, 0, 0).unwrap();
        assert_eq!(f.get(7), 1.0);
        let p = CauchyProblem::scalar(dm.clone(), 1, 0, 2, "cos(t)*Dx2(y) - 2*Dx(y) + x", &["x"]).unwrap();
        let f = estimate_lipschitz(&p, &Radii::infinite(), LipschitzMethod::LinearExact, 4, 0, 0).unwrap();
        assert!((f.get(0) - 3.0).abs() < 1e-12);
        let c = CauchyProblem::scalar(dm.clone(), 1, 0, 0, "5", &["x"]).unwrap();
        let f = estimate_lipschitz(&c, &Radii::infinite(), LipschitzMethod::LinearExact, 4, 0, 0).unwrap();
        assert!(f.exact_zero && f.get(0) == LAMBDA_FLOOR);
        let nl = CauchyProblem::scalar(dm, 1, 0, 1, "y*Dx(y)", &["x"]).unwrap();
        assert!(matches!(
            estimate_lipschitz(&nl, &Radii::infinite(), LipschitzMethod::LinearExact, 4, 0, 0),
            Err(PdeError::NotLinear(_))
        ));
    }

    #[test]
    fn sampled_burgers_factor_is_near_the_closed_form_scale() {
        let dm = dom(0.0, 0.2);
        let p = CauchyProblem::scalar(dm, 1, 0, 1, "y*Dx(y)", &["x"]).unwrap();
        let r = Radii::constant(0.5).unwrap();
        let f = estimate_lipschitz(&p, &r, LipschitzMethod::Sampled, 1, 16, 7).unwrap();
        // |u u' - v v'| ≤ (|u'| + |v|)|u - v|, both ≤ 1.5 here; closed form 2^k (r + ‖i0‖).
        assert!(f.get(0) > 0.2 && f.get(0) <= 1.25 * 1.5);
        assert!(f.get(1) <= 1.25 * 2.0 * 1.5 + 1e-12);
        assert!(matches!(
            estimate_lipschitz(&p, &Radii::infinite(), LipschitzMethod::Sampled, 1, 4, 7),
            Err(PdeError::InfiniteRadius { .. })
        ));
    }
}
