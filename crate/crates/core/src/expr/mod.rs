//! Expression trees for right-hand sides, coefficients and initial data.
//!
//! Expressions are built from real constants, the time variable `t`, spatial
//! variables `x1..xs`, derivative placeholders standing for
//! `∂_x^α ∂_t^γ y_h`, named symbols, the primitives `sin`, `cos`, `exp`,
//! negation, the four arithmetic operators and integer powers.

mod calculus;
mod parse;

use std::collections::HashMap;
use std::fmt;

pub use calculus::{
    affine_split, simplify, symbolic_partial, total_x_derivative, AffineSplit,
};
pub use parse::{parse_expression, Arity};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared variable `{0}`")]
    Undeclared(String),
    #[error("derivative placeholder `{name}` exceeds declared orders (L = {l}, p = {p})")]
    PlaceholderOutOfRange { name: String, l: u32, p: u32 },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite intermediate value")]
    NonFinite,
}

/// A leaf variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    /// Spatial coordinate, zero based (`X(0)` prints as `x1`).
    X(usize),
    /// Placeholder for `∂_x^alpha ∂_t^gamma y_{comp}`; `comp` is zero based.
    Deriv {
        alpha: Vec<u32>,
        gamma: u32,
        comp: usize,
    },
    Sym(String),
}

impl Var {
    pub fn deriv(alpha: Vec<u32>, gamma: u32, comp: usize) -> Var {
        Var::Deriv { alpha, gamma, comp }
    }

    pub fn is_placeholder(&self) -> bool {
        matches!(self, Var::Deriv { .. })
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Sym(s) => write!(f, "{s}"),
            Var::Deriv { alpha, gamma, comp } => {
                let mut s = format!("y{}", comp + 1);
                for (i, &a) in alpha.iter().enumerate().rev() {
                    if a > 0 {
                        s = if i == 0 {
                            format!("Dx{a}({s})")
                        } else {
                            format!("Dx{}_{a}({s})", i + 1)
                        };
                    }
                }
                if *gamma > 0 {
                    s = format!("Dt{gamma}({s})");
                }
                write!(f, "{s}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Sin,
    Cos,
    Exp,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

/// Source of variable values during evaluation.
pub trait Env {
    fn lookup(&self, v: &Var) -> Option<f64>;
}

/// Hash-map backed bindings.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    map: HashMap<Var, f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, v: Var, value: f64) -> Self {
        self.map.insert(v, value);
        self
    }

    pub fn set(&mut self, v: Var, value: f64) {
        self.map.insert(v, value);
    }
}

impl Env for Bindings {
    fn lookup(&self, v: &Var) -> Option<f64> {
        self.map.get(v).copied()
    }
}

/// Point environment used on grids: `t`, the spatial coordinates and a
/// table of placeholder values.
pub struct PointEnv<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub slots: &'a [Var],
    pub values: &'a [f64],
}

impl Env for PointEnv<'_> {
    fn lookup(&self, v: &Var) -> Option<f64> {
        match v {
            Var::T => Some(self.t),
            Var::X(i) => self.x.get(*i).copied(),
            _ => self
                .slots
                .iter()
                .position(|s| s == v)
                .map(|i| self.values[i]),
        }
    }
}

impl Expr {
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn t() -> Expr {
        Expr::Var(Var::T)
    }

    pub fn x(i: usize) -> Expr {
        Expr::Var(Var::X(i))
    }

    pub fn unary(op: UnOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn pow(e: Expr, n: i32) -> Expr {
        Expr::Pow(Box::new(e), n)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn eval(&self, env: &dyn Env) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => env
                .lookup(v)
                .ok_or_else(|| ExprError::Unbound(v.to_string()))?,
            Expr::Unary(op, a) => {
                let a = a.eval(env)?;
                match op {
                    UnOp::Sin => a.sin(),
                    UnOp::Cos => a.cos(),
                    UnOp::Exp => a.exp(),
                    UnOp::Neg => -a,
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::DivisionByZero);
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(a, n) => {
                let a = a.eval(env)?;
                if *n < 0 && a == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                a.powi(*n)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite)
        }
    }

    /// Visit every variable leaf.
    pub fn visit_vars(&self, f: &mut dyn FnMut(&Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(v),
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.visit_vars(f),
            Expr::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Distinct variables in first-occurrence order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        self.visit_vars(&mut |v| {
            if !out.contains(v) {
                out.push(v.clone());
            }
        });
        out
    }

    pub fn placeholders(&self) -> Vec<Var> {
        self.vars().into_iter().filter(Var::is_placeholder).collect()
    }

    pub fn depends_on(&self, pred: &dyn Fn(&Var) -> bool) -> bool {
        let mut hit = false;
        self.visit_vars(&mut |v| hit |= pred(v));
        hit
    }

    pub fn depends_on_t(&self) -> bool {
        self.depends_on(&|v| matches!(v, Var::T))
    }

    pub fn depends_on_x(&self) -> bool {
        self.depends_on(&|v| matches!(v, Var::X(_)))
    }

    /// Replace variables according to `f`; leaves for which `f` returns
    /// `None` are kept.
    pub fn substitute(&self, f: &dyn Fn(&Var) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(f)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(f), b.substitute(f)),
            Expr::Pow(a, n) => Expr::pow(a.substitute(f), *n),
        }
    }

    /// Number of nodes, used to keep symbolic derivative growth visible.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }
}

fn fmt_const(c: f64) -> String {
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        format!("(-{:?})", -c)
    } else {
        format!("{c:?}")
    }
}

/// Fully parenthesized printing; `parse_expression(print(e)) == e`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{}", fmt_const(*c)),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Unary(op, a) => match op {
                UnOp::Sin => write!(f, "sin({a})"),
                UnOp::Cos => write!(f, "cos({a})"),
                UnOp::Exp => write!(f, "exp({a})"),
                UnOp::Neg => write!(f, "(-({a}))"),
            },
            Expr::Binary(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Pow(a, n) => {
                if *n < 0 {
                    write!(f, "(({a})^(-{}))", -(*n as i64))
                } else {
                    write!(f, "(({a})^{n})")
                }
            }
        }
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_basic() {
        let e = parse_expression("sin(x1)", &Arity::spatial(1)).unwrap();
        let b = Bindings::new().with(Var::X(0), 0.0);
        assert_eq!(e.eval(&b).unwrap(), 0.0);

        let ar = Arity::spatial(0).with_symbols(&["z"]);
        let e = parse_expression("2*z + 1", &ar).unwrap();
        let b = Bindings::new().with(Var::Sym("z".into()), 3.0);
        assert_eq!(e.eval(&b).unwrap(), 7.0);

        let e = parse_expression("1/(1+x1^2)", &Arity::spatial(1)).unwrap();
        let b = Bindings::new().with(Var::X(0), 1.0);
        assert_eq!(e.eval(&b).unwrap(), 0.5);
    }

    #[test]
    fn eval_errors() {
        let e = parse_expression("1/x", &Arity::spatial(1)).unwrap();
        let b = Bindings::new().with(Var::X(0), 0.0);
        assert_eq!(e.eval(&b), Err(ExprError::DivisionByZero));
        assert!(matches!(e.eval(&Bindings::new()), Err(ExprError::Unbound(_))));
        let e = parse_expression("exp(exp(x))", &Arity::spatial(1)).unwrap();
        let b = Bindings::new().with(Var::X(0), 10.0);
        assert_eq!(e.eval(&b), Err(ExprError::NonFinite));
        let e = parse_expression("x^(-2)", &Arity::spatial(1)).unwrap();
        let b = Bindings::new().with(Var::X(0), 0.0);
        assert_eq!(e.eval(&b), Err(ExprError::DivisionByZero));
    }

    #[test]
    fn placeholder_display() {
        let v = Var::deriv(vec![2, 1], 1, 0);
        assert_eq!(v.to_string(), "Dt1(Dx2(Dx2_1(y1)))");
    }
}
