//! Contractions with loss of derivatives over graded spaces.
//!
//! A graded space is presented by a family of seminorms `‖·‖_k` that is
//! nondecreasing in `k`. An iteration map `P` loses `L` derivatives when
//! `‖P^{n+1}y − P^n y‖_k ≤ α_{kn} ‖P y − y‖_{k+nL}`; the iterates converge
//! whenever the Weissinger series `Σ_n α_{kn} ‖P y0 − y0‖_{k+nL}` is finite
//! for every `k`.
//!
//! Verdicts on that series are heuristic: they look at a trailing window of
//! finitely many terms and never claim a proof.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::funcspace::{Radii, Radius};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("base sequence too short: need index {needed}, have {have} entries")]
    InsufficientBase { needed: usize, have: usize },
    #[error("iterate {n} left the admissible set")]
    MembershipViolated { n: usize },
    #[error("Weissinger row for k = {k} is {verdict:?}, not converged")]
    NotConverged { k: usize, verdict: Verdict },
    #[error("seminorm evaluation failed: {0}")]
    Seminorm(String),
    #[error("contraction constant alpha_{k} = {alpha} must be < 1")]
    AlphaTooLarge { k: usize, alpha: f64 },
    #[error("target is outside the image ball at index {k}: distance {distance} > {radius}")]
    OutsideImageBall { k: usize, distance: f64, radius: f64 },
    #[error("iterate {n} escaped the ball at k = {k}: distance {distance} > {radius}")]
    EscapedBall {
        n: usize,
        k: usize,
        distance: f64,
        radius: f64,
    },
    #[error("S∘D differs from the identity by {error} at k = {k}")]
    NotRightInverse { k: usize, error: f64 },
    #[error("map evaluation failed: {0}")]
    Map(String),
    #[error("empty history")]
    EmptyHistory,
}

/// A graded space given by its seminorms and vector operations.
pub trait GradedSpace {
    type Elem: Clone;
    fn seminorm(&self, x: &Self::Elem, k: usize) -> Result<f64, CoreError>;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem, CoreError>;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem, CoreError>;

    /// All requested seminorms of one element; spaces with shared work per
    /// call may override this.
    fn seminorms(&self, x: &Self::Elem, ks: &[usize]) -> Result<Vec<f64>, CoreError> {
        ks.iter().map(|&k| self.seminorm(x, k)).collect()
    }
}

/// `R` with `‖x‖_k = |x|` for every `k`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarSpace;

impl GradedSpace for ScalarSpace {
    type Elem = f64;
    fn seminorm(&self, x: &f64, _k: usize) -> Result<f64, CoreError> {
        Ok(x.abs())
    }
    fn sub(&self, a: &f64, b: &f64) -> Result<f64, CoreError> {
        Ok(a - b)
    }
    fn add(&self, a: &f64, b: &f64) -> Result<f64, CoreError> {
        Ok(a + b)
    }
}

/// Finite sequences with `‖x‖_k = max_{i ≤ k} |x_i|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SequenceSpace;

impl GradedSpace for SequenceSpace {
    type Elem = Vec<f64>;
    fn seminorm(&self, x: &Vec<f64>, k: usize) -> Result<f64, CoreError> {
        Ok(x.iter().take(k + 1).fold(0.0, |m, v| m.max(v.abs())))
    }
    fn sub(&self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>, CoreError> {
        Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
    }
    fn add(&self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>, CoreError> {
        Ok(a.iter().zip(b).map(|(x, y)| x + y).collect())
    }
}

pub type AlphaFn = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum AlphaSpec {
    /// `table[k][n]`.
    Table(Vec<Vec<f64>>),
    /// `α_{kn} = Π_{j<n} base[k + jL]`.
    Product(Vec<f64>),
    /// Closed form `(k, n) ↦ ln α_{kn}`.
    LogGenerator(AlphaFn),
}

/// Contraction constants `α_{kn}` with loss `L`; `α_{k0} = 1` always.
#[derive(Clone)]
pub struct LodConstants {
    pub l: usize,
    pub spec: AlphaSpec,
}

impl std::fmt::Debug for LodConstants {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.spec {
            AlphaSpec::Table(_) => "table",
            AlphaSpec::Product(_) => "product",
            AlphaSpec::LogGenerator(_) => "generator",
        };
        write!(f, "LodConstants {{ l: {}, kind: {kind} }}", self.l)
    }
}

impl LodConstants {
    pub fn table(l: usize, table: Vec<Vec<f64>>) -> Self {
        LodConstants {
            l,
            spec: AlphaSpec::Table(table),
        }
    }

    pub fn product(l: usize, base: Vec<f64>) -> Self {
        LodConstants {
            l,
            spec: AlphaSpec::Product(base),
        }
    }

    /// From a closed form for `α_{kn}`.
    pub fn generator(l: usize, f: impl Fn(usize, usize) -> f64 + Send + Sync + 'static) -> Self {
        LodConstants {
            l,
            spec: AlphaSpec::LogGenerator(Arc::new(move |k, n| f(k, n).ln())),
        }
    }

    /// From a closed form for `ln α_{kn}`, for constants that overflow.
    pub fn log_generator(
        l: usize,
        f: impl Fn(usize, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        LodConstants {
            l,
            spec: AlphaSpec::LogGenerator(Arc::new(f)),
        }
    }

    pub fn ln_alpha(&self, k: usize, n: usize) -> Result<f64, CoreError> {
        if n == 0 {
            return Ok(0.0);
        }
        let v = match &self.spec {
            AlphaSpec::Table(t) => {
                let row = t.get(k).ok_or(CoreError::InsufficientBase {
                    needed: k,
                    have: t.len(),
                })?;
                let a = *row.get(n).ok_or(CoreError::InsufficientBase {
                    needed: n,
                    have: row.len(),
                })?;
                a.ln()
            }
            AlphaSpec::Product(base) => {
                let mut s = 0.0;
                for j in 0..n {
                    let i = k + j * self.l;
                    let a = *base.get(i).ok_or(CoreError::InsufficientBase {
                        needed: i,
                        have: base.len(),
                    })?;
                    s += a.ln();
                }
                s
            }
            AlphaSpec::LogGenerator(f) => f(k, n),
        };
        if v.is_nan() {
            return Err(CoreError::NonFinite(format!("alpha({k}, {n})")));
        }
        Ok(v)
    }

    pub fn alpha(&self, k: usize, n: usize) -> Result<f64, CoreError> {
        Ok(self.ln_alpha(k, n)?.exp())
    }
}

/// `Π_{j=0}^{n-1} α_{k+jL}`; the empty product is 1.
pub fn product_constants(base: &[f64], l: usize, k: usize, n: usize) -> Result<f64, CoreError> {
    LodConstants::product(l, base.to_vec()).alpha(k, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Diverging,
    Inconclusive,
}

/// Parameters of the windowed verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictRule {
    pub window: usize,
    pub margin: f64,
    pub rel_tail: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        VerdictRule {
            window: 10,
            margin: 0.05,
            rel_tail: 1e-14,
        }
    }
}

fn log_sum_exp(ls: &[f64]) -> f64 {
    let m = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + ls.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Windowed verdict on a series given by the logarithms of its terms.
/// Returns the verdict and the largest ratio in the window.
pub fn verdict_of(log_terms: &[f64], rule: &VerdictRule) -> (Verdict, Option<f64>) {
    let n = log_terms.len();
    let w = rule.window;
    let tail_zero = |from: usize| log_terms[from..].iter().all(|l| *l == f64::NEG_INFINITY);
    if n == 0 {
        return (Verdict::Inconclusive, None);
    }
    if n < w + 1 {
        let v = if tail_zero(n.saturating_sub(w).max(1).min(n - 1)) && n > 1 {
            Verdict::Converged
        } else {
            Verdict::Inconclusive
        };
        return (v, None);
    }
    let start = n - w;
    if tail_zero(start) {
        return (Verdict::Converged, Some(0.0));
    }
    let mut max_ratio = 0.0f64;
    let mut increasing = true;
    for i in start..n {
        let (a, b) = (log_terms[i - 1], log_terms[i]);
        let r = if a == f64::NEG_INFINITY {
            if b == f64::NEG_INFINITY {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (b - a).exp()
        };
        max_ratio = max_ratio.max(r);
        if !(b > a) {
            increasing = false;
        }
    }
    let ln_sum = log_sum_exp(log_terms);
    let small_last = log_terms[n - 1] < rule.rel_tail.ln() + ln_sum;
    if max_ratio < 1.0 - rule.margin && small_last {
        (Verdict::Converged, Some(max_ratio))
    } else if increasing {
        (Verdict::Diverging, Some(max_ratio))
    } else {
        (Verdict::Inconclusive, Some(max_ratio))
    }
}

/// One row `k` of a Weissinger certificate.
#[derive(Debug, Clone, Serialize)]
pub struct WeissingerRow {
    pub k: usize,
    /// `α_{kn} ‖P y0 − y0‖_{k+nL}`; `null` in JSON when overflowing.
    pub terms: Vec<f64>,
    pub log_terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
    pub max_window_ratio: Option<f64>,
    pub rule: VerdictRule,
}

impl WeissingerRow {
    pub fn from_log_terms(k: usize, log_terms: Vec<f64>, rule: VerdictRule) -> Result<Self, CoreError> {
        if log_terms.iter().any(|l| l.is_nan()) {
            return Err(CoreError::NonFinite(format!("Weissinger term for k = {k}")));
        }
        let terms: Vec<f64> = log_terms.iter().map(|l| l.exp()).collect();
        let mut acc = 0.0;
        let partial_sums = terms
            .iter()
            .map(|t| {
                acc += t;
                acc
            })
            .collect();
        let (verdict, max_window_ratio) = verdict_of(&log_terms, &rule);
        Ok(WeissingerRow {
            k,
            terms,
            log_terms,
            partial_sums,
            verdict,
            max_window_ratio,
            rule,
        })
    }

    pub fn sum(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }

    /// Tail `Σ_{j ≥ n}` from the stored terms plus a geometric extrapolation
    /// of the remainder; fails unless the row converged.
    pub fn tail(&self, n: usize) -> Result<TailBound, CoreError> {
        if self.verdict != Verdict::Converged {
            return Err(CoreError::NotConverged {
                k: self.k,
                verdict: self.verdict,
            });
        }
        let len = self.terms.len();
        let last = *self.terms.last().unwrap_or(&0.0);
        let ratio = if len >= 2 && self.terms[len - 2] > 0.0 {
            self.terms[len - 1] / self.terms[len - 2]
        } else {
            0.0
        };
        let geometric = |first: f64| {
            if first == 0.0 {
                0.0
            } else {
                first / (1.0 - ratio)
            }
        };
        let (partial, extrapolated) = if n < len {
            let partial: f64 = self.terms[n..].iter().rev().sum();
            (partial, geometric(last * ratio))
        } else {
            let steps = (n - len + 1) as i32;
            (0.0, geometric(last * ratio.powi(steps)))
        };
        Ok(TailBound {
            k: self.k,
            n,
            partial,
            extrapolated,
            total: partial + extrapolated,
            is_estimate: extrapolated > 0.0,
        })
    }
}

/// A posteriori tail: `partial` is a bound from finitely many terms,
/// `extrapolated` a geometric estimate of what remains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    pub k: usize,
    pub n: usize,
    pub partial: f64,
    pub extrapolated: f64,
    pub total: f64,
    pub is_estimate: bool,
}

/// Terms `α_{kn} ‖P y0 − y0‖_{k+nL}` for `n ≤ n_max` with their verdict.
pub fn weissinger_sum(
    constants: &LodConstants,
    increments: &dyn Fn(usize) -> Result<f64, CoreError>,
    k: usize,
    n_max: usize,
) -> Result<WeissingerRow, CoreError> {
    let mut logs = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let inc = increments(k + n * constants.l)?;
        if inc.is_nan() || inc < 0.0 {
            return Err(CoreError::NonFinite(format!("increment at {}", k + n * constants.l)));
        }
        logs.push(constants.ln_alpha(k, n)? + inc.ln());
    }
    WeissingerRow::from_log_terms(k, logs, VerdictRule::default())
}

/// Bound on `‖ȳ − P^n y0‖_k` from the Weissinger tail starting at `n`.
pub fn a_posteriori_bound(
    constants: &LodConstants,
    increments: &dyn Fn(usize) -> Result<f64, CoreError>,
    k: usize,
    n: usize,
    n_max: usize,
) -> Result<TailBound, CoreError> {
    weissinger_sum(constants, increments, k, n_max)?.tail(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    pub k_check: Vec<usize>,
    pub tol: f64,
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Converged,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    Checked,
    Unchecked,
}

#[derive(Debug, Clone)]
pub struct FixedPointRun<E> {
    /// `y0, P y0, P² y0, …`
    pub iterates: Vec<E>,
    /// `increments[n][i] = ‖P^{n+1} y0 − P^n y0‖_{k_check[i]}`.
    pub increments: Vec<Vec<f64>>,
    pub k_check: Vec<usize>,
    pub candidate: E,
    pub status: RunStatus,
    pub membership: Membership,
    /// Pairs `(n, k)` where `‖·‖_k > ‖·‖_{k'}` for a larger checked `k'`.
    pub monotonicity_violations: Vec<(usize, usize)>,
}

impl<E> FixedPointRun<E> {
    pub fn steps(&self) -> usize {
        self.increments.len()
    }
}

pub type MapFn<'a, E> = dyn FnMut(&E) -> Result<E, CoreError> + 'a;
pub type MemberFn<'a, E> = dyn FnMut(usize, &E) -> Result<bool, CoreError> + 'a;

/// Iterate `P` from `y0` until every checked increment is below `tol`.
pub fn iterate_to_fixed_point<S: GradedSpace>(
    space: &S,
    map: &mut MapFn<'_, S::Elem>,
    y0: S::Elem,
    stop: &StopRule,
    mut member: Option<&mut MemberFn<'_, S::Elem>>,
) -> Result<FixedPointRun<S::Elem>, CoreError> {
    let mut ks = stop.k_check.clone();
    ks.sort_unstable();
    ks.dedup();
    if let Some(m) = member.as_mut() {
        if !m(0, &y0)? {
            return Err(CoreError::MembershipViolated { n: 0 });
        }
    }
    let mut iterates = vec![y0];
    let mut increments = Vec::new();
    let mut violations = Vec::new();
    let mut status = RunStatus::Inconclusive;
    for n in 0..stop.n_max {
        let cur = iterates.last().unwrap();
        let next = map(cur)?;
        let diff = space.sub(&next, cur)?;
        let norms = space.seminorms(&diff, &ks)?;
        if norms.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite(format!("increment at step {n}")));
        }
        for i in 1..norms.len() {
            let slack = 1e-12 * norms[i].abs().max(1e-300);
            if norms[i - 1] > norms[i] + slack {
                violations.push((n, ks[i - 1]));
            }
        }
        if let Some(m) = member.as_mut() {
            if !m(n + 1, &next)? {
                return Err(CoreError::MembershipViolated { n: n + 1 });
            }
        }
        let done = norms.iter().all(|v| *v < stop.tol);
        iterates.push(next);
        increments.push(norms);
        if done {
            status = RunStatus::Converged;
            break;
        }
    }
    Ok(FixedPointRun {
        candidate: iterates.last().unwrap().clone(),
        iterates,
        increments,
        k_check: ks,
        status,
        membership: if member.is_some() {
            Membership::Checked
        } else {
            Membership::Unchecked
        },
        monotonicity_violations: violations,
    })
}

/// Largest excess of `‖P^m y0 − P^n y0‖_k` over the telescoped bound
/// `Σ_{j=n}^{m-1} α_{kj} ‖P y0 − y0‖_{k+jL}` across stored iterates.
pub fn cauchy_chain_excess<S: GradedSpace>(
    space: &S,
    iterates: &[S::Elem],
    constants: &LodConstants,
    first_increment: &dyn Fn(usize) -> Result<f64, CoreError>,
    k: usize,
) -> Result<f64, CoreError> {
    let len = iterates.len();
    let mut terms = Vec::with_capacity(len);
    for j in 0..len {
        terms.push(constants.alpha(k, j)? * first_increment(k + j * constants.l)?);
    }
    let mut worst = f64::NEG_INFINITY;
    for n in 0..len {
        for m in n + 1..len {
            let d = space.seminorm(&space.sub(&iterates[m], &iterates[n])?, k)?;
            let bound: f64 = terms[n..m].iter().sum();
            worst = worst.max(d - bound);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct EquationSolution<E> {
    pub x: E,
    pub run: FixedPointRun<E>,
    /// `‖f(x) − y‖_k` for the checked `k`.
    pub residuals: Vec<f64>,
}

/// Solve `f(x) = y` by iterating `P(x) = x − f(x) + y` from `y`.
pub fn solve_equation<S: GradedSpace>(
    space: &S,
    f: &mut MapFn<'_, S::Elem>,
    y: &S::Elem,
    stop: &StopRule,
    member: Option<&mut MemberFn<'_, S::Elem>>,
) -> Result<EquationSolution<S::Elem>, CoreError> {
    let mut p = |x: &S::Elem| -> Result<S::Elem, CoreError> {
        let fx = f(x)?;
        space.add(&space.sub(x, &fx)?, y)
    };
    let run = iterate_to_fixed_point(space, &mut p, y.clone(), stop, member)?;
    let x = run.candidate.clone();
    let fx = f(&x)?;
    let residuals = space.seminorms(&space.sub(&fx, y)?, &run.k_check)?;
    Ok(EquationSolution { x, run, residuals })
}

fn seq_get(v: &[f64], i: usize) -> f64 {
    *v.get(i).unwrap_or_else(|| v.last().unwrap_or(&f64::NAN))
}

/// Data for local inversion of `f` near `x0` with right inverse data
/// `S∘D = 1`.
pub struct InverseSetup<'a, E> {
    pub f: &'a dyn Fn(&E) -> Result<E, CoreError>,
    pub d: &'a dyn Fn(&E) -> Result<E, CoreError>,
    pub s: &'a dyn Fn(&E) -> Result<E, CoreError>,
    pub x0: E,
    pub y: E,
    pub radii: Radii,
    /// `α_k`, extended by the last entry.
    pub alpha: Vec<f64>,
    /// `δ_k`, extended by the last entry.
    pub delta: Vec<f64>,
    pub l: usize,
    pub l_d: usize,
    /// `(L_S, σ_k)` enables the Lipschitz diagnostic for `f`.
    pub s_data: Option<(usize, Vec<f64>)>,
    pub probes: Vec<E>,
    pub stop: StopRule,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainEntry {
    pub n: usize,
    pub k: usize,
    pub distance: f64,
    /// `α_k r_{k+L} + δ_{k+L_D} r̄_{k+L_D}`.
    pub bound: f64,
    pub radius: f64,
    pub inside: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzCheck {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct InverseReport<E> {
    pub solution: E,
    pub run: FixedPointRun<E>,
    /// `(k + L_D, r̄_{k+L_D})` for the checked `k`.
    pub image_radii: Vec<(usize, f64)>,
    pub image_distances: Vec<f64>,
    pub chain: Vec<ChainEntry>,
    pub lipschitz: Option<Vec<LipschitzCheck>>,
    pub residuals: Vec<f64>,
}

/// Solve `f(x) = y` near `x0` by iterating `P_y(x) = x − D[f(x) − y]`
/// inside `B̄_R(x0)`.
///
/// Requires `α_k < 1` at every checked `k` so that the image radius
/// `r̄_{k+L_D} = r_{k+L}(1 − α_k)/δ_{k+L_D}` is positive.
pub fn invert_locally<S: GradedSpace>(
    space: &S,
    setup: &InverseSetup<'_, S::Elem>,
) -> Result<InverseReport<S::Elem>, CoreError> {
    let ks = setup.stop.k_check.clone();
    for p in &setup.probes {
        let back = (setup.s)(&(setup.d)(p)?)?;
        let diff = space.sub(&back, p)?;
        for &k in &ks {
            let e = space.seminorm(&diff, k)?;
            let scale = 1.0 + space.seminorm(p, k)?;
            if e > 1e-12 * scale {
                return Err(CoreError::NotRightInverse { k, error: e });
            }
        }
    }
    let fx0 = (setup.f)(&setup.x0)?;
    let mut image_radii = Vec::new();
    let mut image_distances = Vec::new();
    for &k in &ks {
        let a = seq_get(&setup.alpha, k);
        if !(a < 1.0) {
            return Err(CoreError::AlphaTooLarge { k, alpha: a });
        }
        let idx = k + setup.l_d;
        let rbar = setup.radii.get(k + setup.l).value() * (1.0 - a) / seq_get(&setup.delta, idx);
        let dist = space.seminorm(&space.sub(&setup.y, &fx0)?, idx)?;
        if dist > rbar {
            return Err(CoreError::OutsideImageBall {
                k: idx,
                distance: dist,
                radius: rbar,
            });
        }
        image_radii.push((idx, rbar));
        image_distances.push(dist);
    }

    let mut chain = Vec::new();
    let mut escaped: Option<CoreError> = None;
    {
        let mut member = |n: usize, x: &S::Elem| -> Result<bool, CoreError> {
            let d = space.sub(x, &setup.x0)?;
            for (i, &k) in ks.iter().enumerate() {
                let dist = space.seminorm(&d, k)?;
                let radius = setup.radii.get(k).value();
                let a = seq_get(&setup.alpha, k);
                let bound = a * setup.radii.get(k + setup.l).value()
                    + seq_get(&setup.delta, k + setup.l_d) * image_radii[i].1;
                let inside = dist <= radius;
                chain.push(ChainEntry {
                    n,
                    k,
                    distance: dist,
                    bound,
                    radius,
                    inside,
                });
                if !inside && escaped.is_none() {
                    escaped = Some(CoreError::EscapedBall {
                        n,
                        k,
                        distance: dist,
                        radius,
                    });
                }
            }
            Ok(escaped.is_none())
        };
        let mut p = |x: &S::Elem| -> Result<S::Elem, CoreError> {
            let r = space.sub(&(setup.f)(x)?, &setup.y)?;
            space.sub(x, &(setup.d)(&r)?)
        };
        let res = iterate_to_fixed_point(space, &mut p, setup.x0.clone(), &setup.stop, Some(&mut member));
        match res {
            Ok(run) => {
                let solution = run.candidate.clone();
                let fx = (setup.f)(&solution)?;
                let residuals = space.seminorms(&space.sub(&fx, &setup.y)?, &ks)?;
                let lipschitz = match &setup.s_data {
                    None => None,
                    Some((l_s, sigma)) => {
                        let mut checks = Vec::new();
                        for w in run.iterates.windows(2) {
                            let (x, xb) = (&w[0], &w[1]);
                            let dfx = space.sub(&(setup.f)(x)?, &(setup.f)(xb)?)?;
                            let dx = space.sub(x, xb)?;
                            for &k in &ks {
                                let lhs = space.seminorm(&dfx, k)?;
                                let rhs = seq_get(sigma, k)
                                    * (seq_get(&setup.alpha, k)
                                        * space.seminorm(&dx, k + l_s + setup.l)?
                                        + space.seminorm(&dx, k + l_s)?);
                                checks.push(LipschitzCheck {
                                    k,
                                    lhs,
                                    rhs,
                                    holds: lhs <= rhs * (1.0 + 1e-12) + 1e-300,
                                });
                            }
                        }
                        Some(checks)
                    }
                };
                return Ok(InverseReport {
                    solution,
                    run,
                    image_radii,
                    image_distances,
                    chain,
                    lipschitz,
                    residuals,
                });
            }
            Err(CoreError::MembershipViolated { .. }) if escaped.is_some() => {}
            Err(e) => return Err(e),
        }
    }
    Err(escaped.unwrap())
}

/// Summability diagnostic for `Σ_n ‖P^{n+1} y0 − P^n y0‖_k`.
#[derive(Debug, Clone, Serialize)]
pub struct WPrimeRow {
    pub k: usize,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
    /// Loss-free constants reconstructed when the sum converges.
    pub alphas: Option<Vec<f64>>,
    /// First step with a vanishing increment, where the fallback starts.
    pub fixed_from: Option<usize>,
}

/// `history[n][i] = ‖P^{n+1} y0 − P^n y0‖_{k_list[i]}`; `first_increment(j)`
/// returns `‖P y0 − y0‖_j`, used by the fallback
/// `α_{kn} = 1/(n² ‖P y0 − y0‖_{k+nL})` once the iterates stop moving.
pub fn w_prime_diagnostic(
    history: &[Vec<f64>],
    k_list: &[usize],
    l: usize,
    first_increment: &dyn Fn(usize) -> f64,
) -> Result<Vec<WPrimeRow>, CoreError> {
    if history.is_empty() {
        return Err(CoreError::EmptyHistory);
    }
    let mut rows = Vec::new();
    for (i, &k) in k_list.iter().enumerate() {
        let inc: Vec<f64> = history.iter().map(|h| h[i]).collect();
        let logs: Vec<f64> = inc.iter().map(|v| v.ln()).collect();
        let (verdict, _) = verdict_of(&logs, &VerdictRule::default());
        let mut acc = 0.0;
        let partial_sums = inc
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        let fixed_from = inc.iter().position(|v| *v == 0.0);
        let alphas = (verdict == Verdict::Converged).then(|| {
            (0..inc.len())
                .map(|n| {
                    if n == 0 {
                        return 1.0;
                    }
                    if inc[0] == 0.0 {
                        return 1.0;
                    }
                    match fixed_from {
                        Some(nn) if n >= nn => {
                            let g = first_increment(k + n * l);
                            if g > 0.0 {
                                1.0 / ((n * n) as f64 * g)
                            } else {
                                1.0
                            }
                        }
                        _ => inc[n] / inc[0],
                    }
                })
                .collect()
        });
        rows.push(WPrimeRow {
            k,
            partial_sums,
            verdict,
            alphas,
            fixed_from,
        });
    }
    Ok(rows)
}

/// Radii helper for scalar toys.
pub fn radius_value(r: Radius) -> f64 {
    r.value()
}
