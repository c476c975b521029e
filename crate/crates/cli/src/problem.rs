//! Problem-file schema and conversion into library types.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use picard_lod::expr::{parse_expression, Arity, BinOp, Expr, Var};
use picard_lod::funcspace::{Domain, Radii, Radius};
use picard_lod::linear_series::{GrowthClass, LinearProblem};
use picard_lod::picard_pde::CauchyProblem;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

/// A number or a constant expression such as `"-pi"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Value(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default)]
    pub t0: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "S")]
    pub space: Vec<[Num; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderSpec {
    pub d: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(rename = "L")]
    pub l: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

/// `initial[j]` is a string for scalar problems or a list over components.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitialEntry {
    Scalar(String),
    Vector(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RadiiSpec {
    Keyword(String),
    Values(Vec<f64>),
}

fn default_tol() -> f64 {
    1e-12
}
fn default_n_max() -> usize {
    50
}
fn default_k_check() -> Vec<usize> {
    vec![0, 1, 2]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_k_check")]
    pub k_check: Vec<usize>,
    /// Points per dimension of the exported solution table.
    #[serde(default)]
    pub degrees: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tol: default_tol(),
            n_max: default_n_max(),
            k_check: default_k_check(),
            degrees: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub domain: DomainSpec,
    pub order: OrderSpec,
    #[serde(default)]
    pub components: Option<usize>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub rhs: OneOrMany,
    pub initial: Vec<InitialEntry>,
    #[serde(default)]
    pub growth: Option<Vec<GrowthClass>>,
    #[serde(default)]
    pub radii: Option<RadiiSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub forcing_bound: Option<f64>,
    #[serde(default)]
    pub oracle: Option<String>,
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let pf: ProblemFile = serde_json::from_str(text).map_err(|e| anyhow!("schema error: {e}"))?;
        if pf.schema_version != SCHEMA_VERSION {
            bail!(
                "schema error: unsupported schema_version {} (expected {SCHEMA_VERSION})",
                pf.schema_version
            );
        }
        Ok(pf)
    }

    fn number(&self, n: &Num) -> Result<f64> {
        match n {
            Num::Value(v) => Ok(*v),
            Num::Text(s) => {
                let e = parse_expression(s, &Arity::spatial(0).with_constants(&self.parameters))?;
                Ok(e.eval(&picard_lod::expr::Bindings::new())?)
            }
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        let space = self
            .domain
            .space
            .iter()
            .map(|[lo, hi]| Ok([self.number(lo)?, self.number(hi)?]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Domain::new(self.domain.t0, self.domain.a, self.domain.b, space)?)
    }

    fn rhs_strings(&self) -> Vec<String> {
        match &self.rhs {
            OneOrMany::One(s) => vec![s.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    pub fn cauchy(&self) -> Result<CauchyProblem> {
        let rhs = self.rhs_strings();
        let m = rhs.len();
        if let Some(c) = self.components {
            if c != m {
                bail!("schema error: components = {c} but {m} right-hand sides given");
            }
        }
        let y0 = self
            .initial
            .iter()
            .enumerate()
            .map(|(j, e)| match e {
                InitialEntry::Scalar(s) if m == 1 => Ok(vec![s.clone()]),
                InitialEntry::Vector(v) if v.len() == m => Ok(v.clone()),
                _ => Err(anyhow!("schema error: initial[{j}] must have {m} component(s)")),
            })
            .collect::<Result<Vec<_>>>()?;
        let rhs_refs: Vec<&str> = rhs.iter().map(String::as_str).collect();
        let y0_refs: Vec<Vec<&str>> = y0.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let o = &self.order;
        Ok(CauchyProblem::parse(
            self.domain()?,
            o.d,
            o.p,
            o.l,
            &rhs_refs,
            &y0_refs,
            &self.parameters,
        )?)
    }

    pub fn linear(&self) -> Result<LinearProblem> {
        Ok(LinearProblem::from_cauchy(&self.cauchy()?, self.forcing_bound)?)
    }

    pub fn radii(&self) -> Result<Radii> {
        match &self.radii {
            None => Ok(Radii::infinite()),
            Some(RadiiSpec::Keyword(k)) if k == "infinite" => Ok(Radii::infinite()),
            Some(RadiiSpec::Keyword(k)) => bail!("schema error: radii must be \"infinite\" or a list, got \"{k}\""),
            Some(RadiiSpec::Values(v)) => {
                let rs = v.iter().map(|r| Radius::finite(*r)).collect::<Result<Vec<_>, _>>()?;
                Ok(Radii::from_values(rs)?)
            }
        }
    }

    pub fn oracle(&self) -> Result<Option<Expr>> {
        let s = self.domain.space.len();
        self.oracle
            .as_ref()
            .map(|o| Ok(parse_expression(o, &Arity::space_time(s).with_constants(&self.parameters))?))
            .transpose()
    }
}

/// `μ` of a scalar right-hand side of the form `y · ∂_x^μ y`.
pub fn burgers_form(cp: &CauchyProblem) -> Option<Vec<u32>> {
    if cp.m != 1 {
        return None;
    }
    let Expr::Binary(BinOp::Mul, a, b) = &cp.rhs[0] else {
        return None;
    };
    let slot = |e: &Expr| match e {
        Expr::Var(Var::Deriv { alpha, gamma: 0, comp: 0 }) => Some(alpha.clone()),
        _ => None,
    };
    let (x, y) = (slot(a)?, slot(b)?);
    let zero = |v: &[u32]| v.iter().all(|&o| o == 0);
    match (zero(&x), zero(&y)) {
        (true, false) => Some(y),
        (false, true) => Some(x),
        _ => None,
    }
}
