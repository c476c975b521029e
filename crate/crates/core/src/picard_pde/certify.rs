//! Weissinger certificates and end-to-end solves.

use std::cell::RefCell;
use std::sync::Arc;

use serde::Serialize;

use super::{
    apply_p_with, check_ball_invariance, combine_verdicts, constant_bounds, estimate_lipschitz,
    initial_polynomial, ln_lambda_bar_row, residual, BallInvariance, CauchyProblem, LambdaMode,
    LambdaPath, LipschitzFactors, LipschitzMethod, PdeError, Residual, SepSpace,
};
use crate::funcspace::{ball_check, graded_norms_upto, BallReport, NormConfig, Radii, SepFunc};
use crate::graded_core::{
    iterate_to_fixed_point, CoreError, Membership, RunStatus, StopRule, TailBound, Verdict,
    VerdictRule, WeissingerRow,
};

/// Bound `j ↦ ‖P(i0) − i0‖_j` supplied by a growth model.
pub type IncrementModel = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Where the increments `‖P(i0) − i0‖_{k+nL}` come from.
#[derive(Clone)]
pub enum NormSource {
    /// Grid norms; limited to indices up to the numeric cap.
    Numeric,
    GrowthModel(IncrementModel),
    /// Grid norms up to the cap, the model beyond it.
    Hybrid(IncrementModel),
}

impl NormSource {
    pub fn label(&self) -> &'static str {
        match self {
            NormSource::Numeric => "numeric",
            NormSource::GrowthModel(_) => "growth_model",
            NormSource::Hybrid(_) => "hybrid",
        }
    }
}

impl std::fmt::Debug for NormSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LodCertificate {
    pub mode: LambdaMode,
    pub lambda_path: LambdaPath,
    pub norm_source: &'static str,
    pub d: usize,
    pub l: usize,
    pub tbar: f64,
    pub factors: Vec<f64>,
    pub rows: Vec<WeissingerRow>,
    /// `ln Λ̄_{k,n}` per row.
    pub ln_lambda_bar: Vec<Vec<f64>>,
    /// `‖P(i0) − i0‖_{k+nL}` per row.
    pub increments: Vec<Vec<f64>>,
    pub verdict: Verdict,
    pub witness: Option<String>,
    pub notes: Vec<String>,
}

fn increments_for(
    problem: &CauchyProblem,
    source: &NormSource,
    top: usize,
    cfg: &NormConfig,
) -> Result<Vec<f64>, PdeError> {
    let numeric = |upto: usize| -> Result<Vec<f64>, PdeError> {
        let i0 = initial_polynomial(problem)?;
        let diff = apply_p_with(problem, &i0, &i0)?.sub(&i0)?;
        Ok(graded_norms_upto(&diff, upto, cfg)?)
    };
    match source {
        NormSource::Numeric => {
            if top > cfg.k_cap {
                return Err(PdeError::MissingGrowthModel {
                    index: top,
                    cap: cfg.k_cap,
                });
            }
            numeric(top)
        }
        NormSource::GrowthModel(m) => Ok((0..=top).map(|j| m(j)).collect()),
        NormSource::Hybrid(m) => {
            let mut v = numeric(top.min(cfg.k_cap))?;
            v.extend((v.len()..=top).map(|j| m(j)));
            Ok(v)
        }
    }
}

/// Weissinger terms `Λ̄_{k,n} ‖P(i0) − i0‖_{k+nL}` for `k ∈ k_list`,
/// `n ≤ n_max`, with windowed verdicts per row.
pub fn certify_weissinger(
    problem: &CauchyProblem,
    factors: &LipschitzFactors,
    k_list: &[usize],
    n_max: usize,
    source: &NormSource,
    mode: LambdaMode,
    cfg: &NormConfig,
) -> Result<LodCertificate, PdeError> {
    let l = problem.l;
    let top = k_list.iter().map(|k| k + n_max * l).max().unwrap_or(0);
    let inc = increments_for(problem, source, top, cfg)?;
    let mut rows = Vec::new();
    let mut lams = Vec::new();
    let mut incs = Vec::new();
    let mut path = match mode {
        LambdaMode::Paper => LambdaPath::Paper,
        LambdaMode::Conservative => LambdaPath::ClosedForm,
    };
    for &k in k_list {
        let (lam, p) =
            ln_lambda_bar_row(factors, &problem.domain, problem.d, l, k, n_max, mode)?;
        if p == LambdaPath::Spectral {
            path = p;
        }
        let row_inc: Vec<f64> = (0..=n_max).map(|n| inc[k + n * l]).collect();
        let logs: Vec<f64> = lam
            .iter()
            .zip(&row_inc)
            .map(|(a, b)| if *b == 0.0 { f64::NEG_INFINITY } else { a + b.ln() })
            .collect();
        rows.push(WeissingerRow::from_log_terms(k, logs, VerdictRule::default())?);
        lams.push(lam);
        incs.push(row_inc);
    }
    let verdict = combine_verdicts(rows.iter().map(|r| r.verdict));
    let witness = rows.iter().find(|r| r.verdict == Verdict::Diverging).map(|r| {
        let w = r.rule.window;
        let n = r.terms.len();
        format!(
            "row k = {}: terms strictly increase over n = {}..{}, ln term from {:.3} to {:.3}",
            r.k,
            n - w - 1,
            n - 1,
            r.log_terms[n - w - 1],
            r.log_terms[n - 1]
        )
    });
    let mut notes = Vec::new();
    if factors.sampling.is_some() {
        notes.push("Lipschitz factors are sampled estimates, not certified bounds".into());
    }
    if path == LambdaPath::Spectral {
        notes.push("lambda bar evaluated by Chebyshev quadrature of the recursion".into());
    }
    Ok(LodCertificate {
        mode,
        lambda_path: path,
        norm_source: source.label(),
        d: problem.d,
        l,
        tbar: problem.domain.tbar(),
        factors: factors.constants.clone(),
        rows,
        ln_lambda_bar: lams,
        increments: incs,
        verdict,
        witness,
        notes,
    })
}

/// How `solve` obtains Lipschitz factors.
#[derive(Debug, Clone)]
pub enum FactorChoice {
    /// Exact for linear right-hand sides, sampled otherwise when radii are
    /// finite, skipped when neither applies.
    Auto,
    LinearExact,
    Sampled { pairs: usize, seed: u64 },
    Given(LipschitzFactors),
    Skip,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub radii: Radii,
    pub factors: FactorChoice,
    pub lambda_mode: LambdaMode,
    pub k_check: Vec<usize>,
    pub tol: f64,
    pub n_max: usize,
    pub certify_first: bool,
    pub cert_n_max: usize,
    pub norm_source: NormSource,
    pub residual_tol: f64,
    pub store_iterates: bool,
    pub check_invariance: bool,
    pub norm_cfg: NormConfig,
    /// Probe pairs and seed when `Auto` falls back to sampling.
    pub sample_pairs: usize,
    pub sample_seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            radii: Radii::infinite(),
            factors: FactorChoice::Auto,
            lambda_mode: LambdaMode::Conservative,
            k_check: vec![0, 1, 2],
            tol: 1e-12,
            n_max: 50,
            certify_first: false,
            cert_n_max: 30,
            norm_source: NormSource::Numeric,
            residual_tol: 1e-7,
            store_iterates: false,
            check_invariance: true,
            norm_cfg: NormConfig::default(),
            sample_pairs: 64,
            sample_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: RunStatus,
    pub steps: usize,
    pub k_check: Vec<usize>,
    /// `increments[n][i] = ‖P^{n+1}(i0) − P^n(i0)‖_{k_check[i]}`.
    pub increments: Vec<Vec<f64>>,
    pub factors: Option<LipschitzFactors>,
    pub certificate: Option<LodCertificate>,
    /// `posteriori[n][i]` bounds `‖y − P^n(i0)‖_{k_check[i]}` when the row
    /// converged.
    pub posteriori: Vec<Vec<Option<TailBound>>>,
    pub residual: Residual,
    pub ball_log: Vec<BallReport>,
    pub ball_invariance: Option<BallInvariance>,
    pub truncation_residual: f64,
    pub membership: Membership,
    pub monotonicity_violations: Vec<(usize, usize)>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub solution: SepFunc,
    #[serde(skip)]
    pub iterates: Vec<SepFunc>,
}

fn radii_finite_upto(r: &Radii, top: usize) -> bool {
    (0..=top).all(|j| !r.get(j).is_infinite())
}

fn pick_factors(
    problem: &CauchyProblem,
    cfg: &SolveConfig,
    k_max: usize,
    notes: &mut Vec<String>,
) -> Result<Option<LipschitzFactors>, PdeError> {
    let sampled_ok = radii_finite_upto(&cfg.radii, k_max + problem.l + problem.p);
    match &cfg.factors {
        FactorChoice::Skip => Ok(None),
        FactorChoice::Given(f) => Ok(Some(f.clone())),
        FactorChoice::LinearExact => {
            estimate_lipschitz(problem, &cfg.radii, LipschitzMethod::LinearExact, k_max, 0, 0).map(Some)
        }
        FactorChoice::Sampled { pairs, seed } => {
            estimate_lipschitz(problem, &cfg.radii, LipschitzMethod::Sampled, k_max, *pairs, *seed)
                .map(Some)
        }
        FactorChoice::Auto => {
            match estimate_lipschitz(problem, &cfg.radii, LipschitzMethod::LinearExact, k_max, 0, 0) {
                Ok(f) => Ok(Some(f)),
                Err(PdeError::NotLinear(why)) if sampled_ok => {
                    notes.push(format!("nonlinear right-hand side ({why}); factors sampled"));
                    estimate_lipschitz(
                        problem,
                        &cfg.radii,
                        LipschitzMethod::Sampled,
                        k_max,
                        cfg.sample_pairs,
                        cfg.sample_seed,
                    )
                        .map(Some)
                }
                Err(PdeError::NotLinear(why)) => {
                    notes.push(format!(
                        "nonlinear right-hand side ({why}) with infinite radii; no certificate"
                    ));
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Picard iteration from `i0` with ball logging, optional certification,
/// residual validation and a posteriori bounds.
pub fn solve(problem: &CauchyProblem, cfg: &SolveConfig) -> Result<SolveReport, PdeError> {
    let mut notes = Vec::new();
    let mut k_check = cfg.k_check.clone();
    k_check.sort_unstable();
    k_check.dedup();
    let k_max = *k_check.last().unwrap_or(&0);
    let i0 = initial_polynomial(problem)?;

    let factors = pick_factors(problem, cfg, k_max, &mut notes)?;
    let certificate = match &factors {
        None => None,
        Some(f) => {
            let mut n_cert = cfg.cert_n_max;
            if matches!(cfg.norm_source, NormSource::Numeric) && problem.l > 0 {
                let fit = cfg.norm_cfg.k_cap.saturating_sub(k_max) / problem.l;
                if fit < n_cert {
                    notes.push(format!(
                        "numeric norms reach index {}; certificate truncated to n <= {fit}",
                        cfg.norm_cfg.k_cap
                    ));
                    n_cert = fit;
                }
            }
            let cert = certify_weissinger(
                problem,
                f,
                &k_check,
                n_cert,
                &cfg.norm_source,
                cfg.lambda_mode,
                &cfg.norm_cfg,
            )?;
            if cfg.certify_first && cert.verdict == Verdict::Diverging {
                return Err(PdeError::Diverging(Box::new(cert)));
            }
            if cert.verdict == Verdict::Inconclusive {
                notes.push("Weissinger certificate inconclusive".into());
            }
            Some(cert)
        }
    };

    let ball_invariance = if cfg.check_invariance
        && radii_finite_upto(&cfg.radii, k_max + problem.l + problem.p)
    {
        let m = (0..=k_max)
            .map(|k| constant_bounds(problem, &cfg.radii, k, 20_000).map(|b| b.value))
            .collect::<Result<Vec<f64>, _>>()?;
        Some(check_ball_invariance(&cfg.radii, &m, problem.domain.tbar(), problem.d))
    } else {
        None
    };

    let space = SepSpace { cfg: cfg.norm_cfg };
    let failure: RefCell<Option<PdeError>> = RefCell::new(None);
    let mut ball_log: Vec<BallReport> = Vec::new();
    let mut escape: Option<PdeError> = None;
    let stop = StopRule {
        k_check: k_check.clone(),
        tol: cfg.tol,
        n_max: cfg.n_max,
    };
    let run = {
        let mut map = |y: &SepFunc| -> Result<SepFunc, CoreError> {
            apply_p_with(problem, &i0, y).map_err(|e| {
                let msg = e.to_string();
                *failure.borrow_mut() = Some(e);
                CoreError::Map(msg)
            })
        };
        let mut member = |n: usize, y: &SepFunc| -> Result<bool, CoreError> {
            let rep = ball_check(y, &i0, &cfg.radii, k_max, &cfg.norm_cfg)
                .map_err(|e| CoreError::Seminorm(e.to_string()))?;
            if !rep.member {
                let e = rep.entries.iter().find(|e| !e.inside).unwrap();
                escape = Some(PdeError::BallEscape {
                    n,
                    k: e.k,
                    distance: e.distance,
                    radius: e.radius.value(),
                });
            }
            let ok = rep.member;
            ball_log.push(rep);
            Ok(ok)
        };
        iterate_to_fixed_point(&space, &mut map, i0.clone(), &stop, Some(&mut member))
    };
    let run = match run {
        Ok(r) => r,
        Err(CoreError::MembershipViolated { .. }) if escape.is_some() => return Err(escape.unwrap()),
        Err(e) => return Err(failure.into_inner().unwrap_or(PdeError::Core(e))),
    };

    let solution = run.candidate.clone();
    let res = residual(problem, &solution)?;
    if run.status == RunStatus::Converged {
        let worst = res
            .ic_residuals
            .iter()
            .cloned()
            .fold(res.pde_residual, f64::max);
        if worst > cfg.residual_tol {
            return Err(PdeError::ResidualTooLarge {
                residual: worst,
                tol: cfg.residual_tol,
            });
        }
    } else {
        notes.push(format!("no convergence to tol {} within {} steps", cfg.tol, cfg.n_max));
    }

    let posteriori = (0..run.iterates.len())
        .map(|n| {
            k_check
                .iter()
                .enumerate()
                .map(|(i, _)| certificate.as_ref().and_then(|c| c.rows[i].tail(n).ok()))
                .collect()
        })
        .collect();
    if certificate.is_some() {
        notes.push("a posteriori tails beyond the computed terms are geometric estimates".into());
    }
    let truncation_residual = run
        .iterates
        .iter()
        .map(|f| f.truncation_residual)
        .fold(0.0, f64::max);
    Ok(SolveReport {
        status: run.status,
        steps: run.steps(),
        k_check,
        increments: run.increments.clone(),
        factors,
        certificate,
        posteriori,
        residual: res,
        ball_log,
        ball_invariance,
        truncation_residual,
        membership: run.membership,
        monotonicity_violations: run.monotonicity_violations.clone(),
        notes,
        solution,
        iterates: if cfg.store_iterates { run.iterates } else { Vec::new() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::Domain;
    use std::f64::consts::PI;

    fn heat(tbar: f64, y0: &str) -> CauchyProblem {
        let dm = Domain::new(0.0, tbar, tbar, vec![[-PI, PI]]).unwrap();
        CauchyProblem::scalar(dm, 1, 0, 2, "Dx2(y)", &[y0]).unwrap()
    }

    #[test]
    fn heat_solve_matches_exponential_decay() {
        let p = heat(0.1, "sin(x)");
        let model: IncrementModel = Arc::new(|_| 0.1);
        let cfg = SolveConfig {
            norm_source: NormSource::Hybrid(model),
            ..SolveConfig::default()
        };
        let r = solve(&p, &cfg).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        assert!(r.steps <= 10);
        for &(t, x) in &[(0.1, 1.0), (-0.1, -2.0), (0.05, 0.3)] {
            let v = r.solution.eval(t, &[x])[0];
            assert!((v - (-t as f64).exp() * x.sin()).abs() < 1e-10);
        }
        let cert = r.certificate.unwrap();
        assert_eq!(cert.verdict, Verdict::Converged);
        assert!(r.posteriori[3][0].is_some());
    }

    #[test]
    fn zero_rhs_returns_initial_polynomial() {
        let dm = Domain::new(0.0, 1.0, 1.0, vec![[0.0, 1.0]]).unwrap();
        let p = CauchyProblem::scalar(dm, 1, 0, 0, "0", &["x^3"]).unwrap();
        let r = solve(&p, &SolveConfig::default()).unwrap();
        assert_eq!(r.steps, 1);
        let i0 = initial_polynomial(&p).unwrap();
        assert!(r.solution.max_coeff_diff(&i0).unwrap() < 1e-15);
    }

    #[test]
    fn ode_certificate_and_ball_escape() {
        let dm = Domain::new(0.0, 2.0, 2.0, vec![]).unwrap();
        let p = CauchyProblem::scalar(dm, 1, 0, 0, "3*y", &["1"]).unwrap();
        let f = LipschitzFactors::constant(&[3.0]);
        let c = certify_weissinger(&p, &f, &[0], 60, &NormSource::Numeric, LambdaMode::Conservative, &NormConfig::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Converged);
        let cfg = SolveConfig {
            radii: Radii::constant(1.0).unwrap(),
            check_invariance: false,
            ..SolveConfig::default()
        };
        assert!(matches!(solve(&p, &cfg), Err(PdeError::BallEscape { n: 1, .. })));
    }

    #[test]
    fn numeric_source_respects_cap() {
        let p = heat(0.1, "sin(x)");
        let f = LipschitzFactors::constant(&[1.0]);
        assert!(matches!(
            certify_weissinger(&p, &f, &[0], 30, &NormSource::Numeric, LambdaMode::Conservative, &NormConfig::default()),
            Err(PdeError::MissingGrowthModel { .. })
        ));
    }
}
