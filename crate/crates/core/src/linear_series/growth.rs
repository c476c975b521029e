//! Growth classes for initial data and the bounds derived from them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{grid_max, multi_indices, probe_grid, x_derivative, LinearError, LinearProblem};
use crate::funcspace::Radius;
use crate::graded_core::{verdict_of, Verdict, VerdictRule, WeissingerRow};
use crate::picard_pde::IncrementModel;

/// Terms summed when bounding the radii series.
const RADII_TERMS: usize = 1000;

fn one() -> f64 {
    1.0
}

/// Model for `‖y_{0j}‖_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GrowthClass {
    /// `scale · c^m`.
    Exponential {
        c: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · c^m · m!`.
    Analytic {
        c: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · m^{σ m}`.
    Sigma {
        sigma: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// No information; allowed only where the data does not enter.
    Free,
}

pub(crate) fn ln_fact(n: usize) -> f64 {
    (2..=n).map(|v| (v as f64).ln()).sum()
}

/// `n · ln v` with `0 · ln 0 = 0`.
fn times_ln(n: usize, ln_v: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * ln_v
    }
}

fn log_sum_exp(ls: &[f64]) -> f64 {
    let m = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + ls.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

impl GrowthClass {
    pub fn validate(&self) -> Result<(), LinearError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let good = match *self {
            GrowthClass::Exponential { c, scale } | GrowthClass::Analytic { c, scale } => ok(c) && ok(scale),
            GrowthClass::Sigma { sigma, scale } => ok(sigma) && ok(scale),
            GrowthClass::Free => true,
        };
        if good {
            Ok(())
        } else {
            Err(LinearError::BadGrowth(format!("{self:?}")))
        }
    }

    /// `ln` of the model at index `m`; `None` for [`GrowthClass::Free`].
    pub fn ln_model(&self, m: usize) -> Option<f64> {
        match *self {
            GrowthClass::Exponential { c, scale } => Some(scale.ln() + times_ln(m, c.ln())),
            GrowthClass::Analytic { c, scale } => Some(scale.ln() + times_ln(m, c.ln()) + ln_fact(m)),
            GrowthClass::Sigma { sigma, scale } => {
                let mf = m as f64;
                Some(scale.ln() + if m == 0 { 0.0 } else { sigma * mf * mf.ln() })
            }
            GrowthClass::Free => None,
        }
    }

    pub fn model(&self, m: usize) -> Option<f64> {
        self.ln_model(m).map(f64::exp)
    }

    fn label(&self) -> &'static str {
        match self {
            GrowthClass::Exponential { .. } => "exponential",
            GrowthClass::Analytic { .. } => "analytic",
            GrowthClass::Sigma { .. } => "sigma",
            GrowthClass::Free => "free",
        }
    }
}

/// Classes for the initial conditions that enter the series: `j ≥ γ` with
/// non-zero data.
fn active_classes(lp: &LinearProblem, growth: &[GrowthClass]) -> Result<Vec<(usize, GrowthClass)>, LinearError> {
    let mut out = Vec::new();
    for j in lp.gamma..lp.d {
        if lp.y0[j].iter().all(|e| e.is_zero()) {
            continue;
        }
        let g = *growth.get(j).ok_or(LinearError::MissingGrowth { j })?;
        g.validate()?;
        if g == GrowthClass::Free {
            return Err(LinearError::MissingGrowth { j });
        }
        out.push((j, g));
    }
    Ok(out)
}

/// Admissible `T̄` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Threshold {
    Unbounded,
    Below(f64),
    /// Boundary case the rule cannot decide.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JRule {
    pub j: usize,
    pub class: &'static str,
    pub verdict: Verdict,
    pub threshold: Threshold,
    pub rule: String,
}

/// Convergence verdict of the series at a given `T̄`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub tbar: f64,
    pub verdict: Verdict,
    pub threshold: Threshold,
    pub per_j: Vec<JRule>,
    /// Windowed verdict on the majorant terms.
    pub numeric: Verdict,
    /// The numeric verdict does not contradict the rule.
    pub agrees: bool,
    pub log_terms: Vec<f64>,
    pub witness: Option<String>,
}

impl Classification {
    pub fn rule_summary(&self) -> String {
        self.per_j
            .iter()
            .map(|r| format!("j = {}: {}", r.j, r.rule))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn rule_for(j: usize, g: GrowthClass, d: usize, l: usize, pn: f64, tbar: f64) -> JRule {
    let (df, lf) = (d as f64, l as f64);
    let mk = |verdict, threshold, rule: String| JRule {
        j,
        class: g.label(),
        verdict,
        threshold,
        rule,
    };
    if pn == 0.0 {
        return mk(Verdict::Converged, Threshold::Unbounded, "p = 0: the series is finite".into());
    }
    match g {
        GrowthClass::Exponential { .. } | GrowthClass::Free => mk(
            Verdict::Converged,
            Threshold::Unbounded,
            "exponential class: converges for every d, L and T̄".into(),
        ),
        GrowthClass::Analytic { c, .. } => {
            if d > l {
                mk(Verdict::Converged, Threshold::Unbounded, format!("analytic class with d = {d} > L = {l}"))
            } else if d < l {
                mk(
                    Verdict::Diverging,
                    Threshold::Below(0.0),
                    format!("analytic class with d = {d} < L = {l}: ((n+1)L)! outgrows (nd)!"),
                )
            } else {
                let thr = (1.0 / (pn * c.powf(lf))).powf(1.0 / df);
                let v = if (tbar - thr).abs() <= 1e-12 * thr {
                    Verdict::Inconclusive
                } else if tbar < thr {
                    Verdict::Converged
                } else {
                    Verdict::Diverging
                };
                mk(v, Threshold::Below(thr), format!("analytic class with d = L = {d}: needs T̄ < {thr:.6}"))
            }
        }
        GrowthClass::Sigma { sigma, .. } => {
            let crit = sigma * lf;
            if (df - crit).abs() <= 1e-12 * crit.max(1.0) {
                mk(
                    Verdict::Inconclusive,
                    Threshold::Undetermined,
                    format!("sigma class on the boundary d = σL = {crit}"),
                )
            } else if df > crit {
                mk(Verdict::Converged, Threshold::Unbounded, format!("sigma class with d = {d} > σL = {crit}"))
            } else {
                mk(
                    Verdict::Diverging,
                    Threshold::Below(0.0),
                    format!("sigma class with d = {d} < σL = {crit}"),
                )
            }
        }
    }
}

/// Decide convergence of the series at `tbar` from the growth classes.
///
/// The rule compares `(T̄^d ‖p‖)^n model((n+1)L) / (nd)!` asymptotically;
/// the forcing term is dominated by an exponential class and never decides.
/// Majorant terms for `n ≤ n_max` are also tested numerically.
pub fn classify_convergence(
    lp: &LinearProblem,
    growth: &[GrowthClass],
    tbar: f64,
    n_max: usize,
) -> Result<Classification, LinearError> {
    let classes = active_classes(lp, growth)?;
    let pn = lp.p_norm()?;
    let (d, l, g) = (lp.d, lp.l(), lp.gamma);
    let per_j: Vec<JRule> = classes.iter().map(|&(j, c)| rule_for(j, c, d, l, pn, tbar)).collect();
    let verdict = crate::picard_pde::combine_verdicts(per_j.iter().map(|r| r.verdict));
    let mut threshold = Threshold::Unbounded;
    for r in &per_j {
        threshold = match (threshold, r.threshold) {
            (Threshold::Below(a), Threshold::Below(b)) => Threshold::Below(a.min(b)),
            (Threshold::Below(a), _) | (_, Threshold::Below(a)) => Threshold::Below(a),
            (Threshold::Undetermined, _) | (_, Threshold::Undetermined) => Threshold::Undetermined,
            _ => Threshold::Unbounded,
        };
    }
    let ln_step = d as f64 * tbar.ln() + pn.ln();
    let log_terms: Vec<f64> = (0..=n_max)
        .map(|n| {
            let parts: Vec<f64> = classes
                .iter()
                .map(|&(j, c)| c.ln_model((n + 1) * l).unwrap_or(f64::NEG_INFINITY) - ln_fact(j - g + d))
                .collect();
            times_ln(n, ln_step) - ln_fact(n * d) + log_sum_exp(&parts)
        })
        .collect();
    let (numeric, _) = if classes.is_empty() {
        (Verdict::Converged, None)
    } else {
        verdict_of(&log_terms, &VerdictRule::default())
    };
    let agrees = numeric == verdict || numeric == Verdict::Inconclusive || verdict == Verdict::Inconclusive;
    let witness = (verdict == Verdict::Diverging).then(|| {
        let n = log_terms.len() - 1;
        format!(
            "ln a_n − ln a_(n−1) = {:.3} at n = {n} and growing",
            log_terms[n] - log_terms[n.saturating_sub(1)]
        )
    });
    Ok(Classification {
        tbar,
        verdict,
        threshold,
        per_j,
        numeric,
        agrees,
        log_terms,
        witness,
    })
}

/// Parameters of the increment majorant, detached from the problem.
#[derive(Debug, Clone)]
struct IncrementParams {
    classes: Vec<(usize, GrowthClass)>,
    pn: f64,
    q: f64,
    d: usize,
    g: usize,
    l: usize,
    tbar: f64,
}

impl IncrementParams {
    fn new(lp: &LinearProblem, growth: &[GrowthClass]) -> Result<Self, LinearError> {
        Ok(IncrementParams {
            classes: active_classes(lp, growth)?,
            pn: lp.p_norm()?,
            q: lp.q_bound,
            d: lp.d,
            g: lp.gamma,
            l: lp.l(),
            tbar: lp.domain.tbar(),
        })
    }

    /// `max_{β ≤ γ} T̄^{e−β}/(e−β)!`, or `1/(e−γ)!` when `T̄ ≤ 1`.
    fn time_factor(&self, e: usize) -> f64 {
        let lo = e.saturating_sub(self.g);
        if self.tbar <= 1.0 {
            return (-ln_fact(lo)).exp();
        }
        (lo..=e)
            .map(|k| (times_ln(k, self.tbar.ln()) - ln_fact(k)).exp())
            .fold(0.0, f64::max)
    }

    fn at(&self, idx: usize) -> f64 {
        let mut sum = 0.0;
        for &(j, c) in &self.classes {
            let model = c.model(idx + self.l).unwrap_or(0.0);
            sum += model * self.time_factor(j - self.g + self.d);
        }
        let q_factor = if self.tbar <= 1.0 { 1.0 } else { self.time_factor(self.d) };
        self.pn * sum + self.q * q_factor
    }
}

/// Majorant of `‖P(i0) − i0‖_idx` from the growth classes:
/// `‖p‖ Σ_j model_j(idx + L) τ_j + Q τ_q` with time factors that reduce to
/// `1/(j + d − 2γ)!` and `1` when `T̄ ≤ 1`.
pub fn increment_bound_at(lp: &LinearProblem, growth: &[GrowthClass], idx: usize) -> Result<f64, LinearError> {
    Ok(IncrementParams::new(lp, growth)?.at(idx))
}

/// [`increment_bound_at`] at `k + nL`.
pub fn increment_bound(lp: &LinearProblem, growth: &[GrowthClass], k: usize, n: usize) -> Result<f64, LinearError> {
    increment_bound_at(lp, growth, k + n * lp.l())
}

/// The increment majorant as a model usable by hybrid certificates.
pub fn growth_increment_model(lp: &LinearProblem, growth: &[GrowthClass]) -> Result<IncrementModel, LinearError> {
    let params = IncrementParams::new(lp, growth)?;
    Ok(Arc::new(move |idx| params.at(idx)))
}

/// Radius `r_k` bounding `Σ_h ‖term_h‖_k` through the growth classes;
/// infinite when the bounding series does not converge.
pub fn radii_from_series(lp: &LinearProblem, growth: &[GrowthClass], k: usize) -> Result<Radius, LinearError> {
    let params = IncrementParams::new(lp, growth)?;
    let (d, g, l) = (lp.d, lp.gamma, lp.l());
    let tbar = params.tbar;
    let ln_t = tbar.ln();
    let ln_tpow = |e: usize| {
        if tbar <= 1.0 {
            times_ln(e - e.min(g), ln_t)
        } else {
            times_ln(e, ln_t)
        }
    };
    let ln_p = params.pn.ln();
    let ln_dg = ln_fact(d - g);
    let logs: Vec<f64> = (1..=RADII_TERMS)
        .map(|h| {
            let mut parts: Vec<f64> = params
                .classes
                .iter()
                .map(|&(j, c)| {
                    c.ln_model(k + h * l).unwrap_or(f64::NEG_INFINITY) + times_ln(h, ln_p) + ln_tpow(h * (d - g) + j)
                        - h as f64 * ln_dg
                        - ln_fact(j - g)
                })
                .collect();
            if params.q > 0.0 {
                parts.push(
                    times_ln(h - 1, ln_p) + params.q.ln() + ln_tpow(h * (d - g) + g) - ln_fact(h * (d - g)),
                );
            }
            log_sum_exp(&parts)
        })
        .collect();
    if logs.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Ok(Radius::finite(1e-300)?);
    }
    let row = WeissingerRow::from_log_terms(k, logs, VerdictRule::default())?;
    if row.verdict != Verdict::Converged {
        return Ok(Radius::INF);
    }
    let total = row.tail(0)?.total;
    Ok(Radius::finite(total.max(1e-300))?)
}

/// A grid observation exceeding the declared growth model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthViolation {
    pub j: usize,
    pub order: usize,
    pub observed: f64,
    pub model: f64,
}

/// Compare `‖y_{0j}‖_m` on a grid with the model for `m ≤ max_order`.
pub fn spot_check_growth(
    lp: &LinearProblem,
    growth: &[GrowthClass],
    max_order: usize,
) -> Result<Vec<GrowthViolation>, LinearError> {
    let s = lp.domain.s();
    let grid = probe_grid(&lp.domain, false);
    let mut out = Vec::new();
    for (j, c) in active_classes(lp, growth)? {
        let mut by_order = vec![0.0f64; max_order + 1];
        for nu in multi_indices(s, max_order) {
            let ord: usize = nu.iter().sum();
            for e in &lp.y0[j] {
                let v = grid_max(&x_derivative(e, &nu), &grid)?;
                by_order[ord] = by_order[ord].max(v);
            }
        }
        let mut norm = 0.0f64;
        for (m, v) in by_order.iter().enumerate() {
            norm = norm.max(*v);
            let model = c.model(m).unwrap_or(f64::INFINITY);
            if norm > model * (1.0 + 1e-9) {
                out.push(GrowthViolation {
                    j,
                    order: m,
                    observed: norm,
                    model,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, Arity, Expr};
    use crate::funcspace::Domain;
    use std::f64::consts::PI;

    fn ex(s: &str) -> Expr {
        parse_expression(s, &Arity::space_time(1)).unwrap()
    }

    fn lp(d: usize, gamma: usize, l: u32, tbar: f64, q: (&str, f64)) -> LinearProblem {
        let dm = Domain::new(0.0, tbar, tbar, vec![[-PI, PI]]).unwrap();
        let y0 = (0..d).map(|_| vec![ex("sin(x)")]).collect();
        LinearProblem::new(dm, d, gamma, vec![l], vec![vec![ex("1")]], vec![ex(q.0)], q.1, y0).unwrap()
    }

    const EXP1: GrowthClass = GrowthClass::Exponential { c: 1.0, scale: 1.0 };
    const AN1: GrowthClass = GrowthClass::Analytic { c: 1.0, scale: 1.0 };

    #[test]
    fn increment_examples() {
        let p = lp(1, 0, 1, 0.5, ("1", 1.0));
        assert!((increment_bound(&p, &[EXP1], 0, 0).unwrap() - 2.0).abs() < 1e-15);
        let p = lp(1, 0, 2, 0.5, ("1", 1.0));
        assert!((increment_bound(&p, &[AN1], 0, 3).unwrap() - 40321.0).abs() < 1e-6);
    }

    #[test]
    fn radii_examples() {
        let p = lp(1, 0, 2, 0.5, ("0", 0.0));
        let r = radii_from_series(&p, &[EXP1], 0).unwrap();
        assert!((r.value() - 1.0).abs() < 1e-12, "{r:?}");
        assert!(radii_from_series(&p, &[AN1], 0).unwrap().is_infinite());
    }

    #[test]
    fn classification_grid() {
        for d in 1..=3 {
            for l in 1..=3u32 {
                let p = lp(d, 0, l, 0.1, ("0", 0.0));
                let growth = vec![AN1; d];
                let c = classify_convergence(&p, &growth, 0.1, 60).unwrap();
                let want = if d >= l as usize { Verdict::Converged } else { Verdict::Diverging };
                assert_eq!(c.verdict, want, "d = {d}, L = {l}");
                assert!(c.agrees, "d = {d}, L = {l}: {:?}", c.numeric);
                let e = classify_convergence(&p, &vec![EXP1; d], 0.1, 60).unwrap();
                assert_eq!(e.verdict, Verdict::Converged);
            }
        }
        let sig = GrowthClass::Sigma { sigma: 1.5, scale: 1.0 };
        let c2 = classify_convergence(&lp(2, 0, 1, 0.1, ("0", 0.0)), &[sig; 2], 0.1, 60).unwrap();
        assert_eq!(c2.verdict, Verdict::Converged);
        let c1 = classify_convergence(&lp(1, 0, 1, 0.1, ("0", 0.0)), &[sig], 0.1, 60).unwrap();
        assert_eq!(c1.verdict, Verdict::Diverging);
    }

    #[test]
    fn analytic_threshold_is_monotone() {
        let p = lp(2, 0, 2, 0.5, ("0", 0.0));
        let mut last = Verdict::Converged;
        for t in [0.2, 0.5, 0.9, 0.99, 1.01, 1.5] {
            let v = classify_convergence(&p, &[AN1; 2], t, 60).unwrap().verdict;
            if last == Verdict::Diverging {
                assert_eq!(v, Verdict::Diverging);
            }
            last = v;
        }
        assert_eq!(last, Verdict::Diverging);
    }

    #[test]
    fn spot_check_flags_bad_model() {
        let dm = Domain::new(0.0, 0.5, 0.5, vec![[-PI, PI]]).unwrap();
        let p = LinearProblem::new(dm, 1, 0, vec![1], vec![vec![ex("1")]], vec![ex("0")], 0.0, vec![vec![ex("sin(2*x)")]])
            .unwrap();
        assert!(spot_check_growth(&p, &[EXP1], 8).unwrap().len() >= 7);
        assert!(spot_check_growth(&p, &[GrowthClass::Exponential { c: 2.0, scale: 1.0 }], 8).unwrap().is_empty());
    }

    #[test]
    fn serde_shape() {
        let g: GrowthClass = serde_json::from_str(r#"{"kind":"analytic","c":2.0}"#).unwrap();
        assert_eq!(g, GrowthClass::Analytic { c: 2.0, scale: 1.0 });
    }
}
