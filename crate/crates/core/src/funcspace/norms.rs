use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cheb, FuncError, SepFunc};

/// Grid density and derivative-order cap for numeric norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormConfig {
    pub min_points: usize,
    pub factor: usize,
    pub k_cap: usize,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            min_points: 64,
            factor: 4,
            k_cap: 8,
        }
    }
}

impl NormConfig {
    /// Lobatto points (unit coordinates) for a dimension of degree `deg`.
    /// Constant dimensions need a single point.
    pub fn points(&self, deg: usize) -> Vec<f64> {
        if deg == 0 {
            vec![0.0]
        } else {
            cheb::lobatto(self.min_points.max(self.factor * (deg + 1)))
        }
    }
}

/// Multi-indices `β ∈ N^dims` with `|β| ≤ k`, `β_0 ≤ t_max` and
/// `β_i ≤ degrees[i]` (larger orders give zero derivatives).
fn multi_indices(dims: usize, k: usize, t_max: usize, degrees: &[usize]) -> Vec<Vec<usize>> {
    fn rec(
        dim: usize,
        left: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        t_max: usize,
        degrees: &[usize],
    ) {
        if dim == degrees.len() {
            out.push(cur.clone());
            return;
        }
        let mut hi = left.min(degrees[dim]);
        if dim == 0 {
            hi = hi.min(t_max);
        }
        for b in 0..=hi {
            cur.push(b);
            rec(dim + 1, left - b, cur, out, t_max, degrees);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::with_capacity(dims), &mut out, t_max, degrees);
    out
}

/// Norms for every `k ≤ k_max`: entry `k` is the max over components and
/// admissible `β` with `|β| ≤ k` of the grid sup of `|∂^β f^h|`.
fn norms_upto(
    f: &SepFunc,
    k_max: usize,
    t_max: usize,
    cfg: &NormConfig,
) -> Result<Vec<f64>, FuncError> {
    if k_max > cfg.k_cap {
        return Err(FuncError::OrderTooHigh {
            k: k_max,
            cap: cfg.k_cap,
        });
    }
    let pts: Vec<Vec<f64>> = f.degrees.iter().map(|&d| cfg.points(d)).collect();
    let betas = multi_indices(f.degrees.len(), k_max, t_max, &f.degrees);
    let sups: Vec<(usize, f64)> = betas
        .par_iter()
        .map(|beta| {
            let d = f.partial_derivative(beta);
            let mut best = 0.0f64;
            for h in 0..d.m {
                for v in d.values_on_unit_grid(h, &pts) {
                    if !v.is_finite() {
                        return (beta.iter().sum(), f64::NAN);
                    }
                    best = best.max(v.abs());
                }
            }
            (beta.iter().sum(), best)
        })
        .collect();
    let mut by_order = vec![0.0f64; k_max + 1];
    for (order, v) in sups {
        if v.is_nan() {
            return Err(FuncError::NonFinite(vec![]));
        }
        by_order[order] = by_order[order].max(v);
    }
    for k in 1..=k_max {
        by_order[k] = by_order[k].max(by_order[k - 1]);
    }
    Ok(by_order)
}

/// Graded norms `‖f‖_0, …, ‖f‖_{k_max}` with time-derivative order at most
/// `f.p`.
pub fn graded_norms_upto(f: &SepFunc, k_max: usize, cfg: &NormConfig) -> Result<Vec<f64>, FuncError> {
    norms_upto(f, k_max, f.p, cfg)
}

pub fn graded_norm_with(f: &SepFunc, k: usize, cfg: &NormConfig) -> Result<f64, FuncError> {
    Ok(graded_norms_upto(f, k, cfg)?[k])
}

/// `‖f‖_k = max_h max_{|β| ≤ k, β_t ≤ p} sup |∂^β f^h|` on the default grid.
pub fn graded_norm(f: &SepFunc, k: usize) -> Result<f64, FuncError> {
    graded_norm_with(f, k, &NormConfig::default())
}

pub fn joint_norm_with(f: &SepFunc, k: usize, cfg: &NormConfig) -> Result<f64, FuncError> {
    Ok(norms_upto(f, k, usize::MAX, cfg)?[k])
}

/// Same as [`graded_norm`] without the restriction on the time order.
pub fn joint_norm(f: &SepFunc, k: usize) -> Result<f64, FuncError> {
    joint_norm_with(f, k, &NormConfig::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Radius {
    Finite(f64),
    Infinite(InfiniteTag),
}

/// Serializes as the string `"infinite"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfiniteTag {
    #[serde(rename = "infinite")]
    Infinite,
}

impl Radius {
    pub const INF: Radius = Radius::Infinite(InfiniteTag::Infinite);

    pub fn finite(r: f64) -> Result<Radius, FuncError> {
        if r > 0.0 && r.is_finite() {
            Ok(Radius::Finite(r))
        } else if r == f64::INFINITY {
            Ok(Radius::INF)
        } else {
            Err(FuncError::BadRadius(r))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Radius::Infinite(_))
    }

    /// The value with `+∞` for the sentinel.
    pub fn value(&self) -> f64 {
        match self {
            Radius::Finite(r) => *r,
            Radius::Infinite(_) => f64::INFINITY,
        }
    }

    pub fn admits(&self, dist: f64) -> bool {
        match self {
            Radius::Finite(r) => dist <= *r,
            Radius::Infinite(_) => true,
        }
    }
}

/// Radii `k ↦ r_k`; indices past the list reuse the last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    values: Vec<Radius>,
}

impl Radii {
    pub fn infinite() -> Radii {
        Radii {
            values: vec![Radius::INF],
        }
    }

    pub fn constant(r: f64) -> Result<Radii, FuncError> {
        Ok(Radii {
            values: vec![Radius::finite(r)?],
        })
    }

    pub fn from_values(values: Vec<Radius>) -> Result<Radii, FuncError> {
        if values.is_empty() {
            return Err(FuncError::BadRadius(0.0));
        }
        for r in &values {
            if let Radius::Finite(v) = r {
                Radius::finite(*v)?;
            }
        }
        Ok(Radii { values })
    }

    pub fn from_fn(k_max: usize, f: impl Fn(usize) -> f64) -> Result<Radii, FuncError> {
        let values = (0..=k_max)
            .map(|k| Radius::finite(f(k)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Radii { values })
    }

    pub fn get(&self, k: usize) -> Radius {
        *self.values.get(k).unwrap_or_else(|| self.values.last().unwrap())
    }

    pub fn values(&self) -> &[Radius] {
        &self.values
    }

    pub fn all_infinite(&self) -> bool {
        self.values.iter().all(Radius::is_infinite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallEntry {
    pub k: usize,
    pub distance: f64,
    pub radius: Radius,
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallReport {
    pub entries: Vec<BallEntry>,
    pub member: bool,
}

/// Membership of `f` in `B̄_R(center)` checked for `k ≤ k_max`.
pub fn ball_check(
    f: &SepFunc,
    center: &SepFunc,
    radii: &Radii,
    k_max: usize,
    cfg: &NormConfig,
) -> Result<BallReport, FuncError> {
    if f.domain != center.domain || f.m != center.m || f.p != center.p {
        return Err(FuncError::Mismatch);
    }
    if radii.all_infinite() {
        let entries = (0..=k_max)
            .map(|k| BallEntry {
                k,
                distance: f64::NAN,
                radius: Radius::INF,
                inside: true,
            })
            .collect();
        return Ok(BallReport {
            entries,
            member: true,
        });
    }
    let d = f.sub(center)?;
    let norms = graded_norms_upto(&d, k_max, cfg)?;
    let entries: Vec<BallEntry> = norms
        .iter()
        .enumerate()
        .map(|(k, &dist)| {
            let radius = radii.get(k);
            BallEntry {
                k,
                distance: dist,
                radius,
                inside: radius.admits(dist),
            }
        })
        .collect();
    let member = entries.iter().all(|e| e.inside);
    Ok(BallReport { entries, member })
}
