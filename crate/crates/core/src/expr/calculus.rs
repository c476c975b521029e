use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BinOp, Bindings, Env, Expr, UnOp, Var};

fn as_const(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

fn finite(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Const(v))
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => finite(x + y).unwrap_or_else(|| Expr::binary(BinOp::Add, a, b)),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::binary(BinOp::Add, a, b),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => finite(x - y).unwrap_or_else(|| Expr::binary(BinOp::Sub, a, b)),
        (_, Some(y)) if y == 0.0 => a,
        (Some(x), _) if x == 0.0 => neg(b),
        _ => Expr::binary(BinOp::Sub, a, b),
    }
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Unary(UnOp::Neg, inner) => *inner,
        other => Expr::unary(UnOp::Neg, other),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => finite(x * y).unwrap_or_else(|| Expr::binary(BinOp::Mul, a, b)),
        (Some(x), _) => scale(x, b),
        (_, Some(y)) => scale(y, a),
        _ => Expr::binary(BinOp::Mul, a, b),
    }
}

/// `c * e` with constant collection into a single leading factor.
fn scale(c: f64, e: Expr) -> Expr {
    if c == 0.0 {
        return Expr::Const(0.0);
    }
    if c == 1.0 {
        return e;
    }
    if c == -1.0 {
        return neg(e);
    }
    match e {
        Expr::Binary(BinOp::Mul, l, r) if as_const(&l).is_some() => {
            let k = as_const(&l).unwrap();
            match finite(c * k) {
                Some(_) => scale(c * k, *r),
                None => Expr::binary(BinOp::Mul, Expr::Const(c), Expr::binary(BinOp::Mul, *l, *r)),
            }
        }
        Expr::Unary(UnOp::Neg, inner) => scale(-c, *inner),
        other => Expr::binary(BinOp::Mul, Expr::Const(c), other),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) if y != 0.0 => {
            finite(x / y).unwrap_or_else(|| Expr::binary(BinOp::Div, a, b))
        }
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        _ => Expr::binary(BinOp::Div, a, b),
    }
}

pub(crate) fn pow(a: Expr, n: i32) -> Expr {
    if n == 0 {
        return Expr::Const(1.0);
    }
    if n == 1 {
        return a;
    }
    match a {
        Expr::Const(c) if !(c == 0.0 && n < 0) => {
            finite(c.powi(n)).unwrap_or_else(|| Expr::pow(Expr::Const(c), n))
        }
        Expr::Pow(b, m) => match m.checked_mul(n) {
            Some(k) => pow(*b, k),
            None => Expr::pow(Expr::Pow(b, m), n),
        },
        other => Expr::pow(other, n),
    }
}

fn unary(op: UnOp, a: Expr) -> Expr {
    if op == UnOp::Neg {
        return neg(a);
    }
    if let Some(c) = as_const(&a) {
        let v = match op {
            UnOp::Sin => c.sin(),
            UnOp::Cos => c.cos(),
            UnOp::Exp => c.exp(),
            UnOp::Neg => unreachable!(),
        };
        if let Some(e) = finite(v) {
            return e;
        }
    }
    Expr::unary(op, a)
}

/// Light bottom-up simplification: constant folding, 0/1 identities,
/// nested powers and double negation.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Unary(op, a) => unary(*op, simplify(a)),
        Expr::Binary(op, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match op {
                BinOp::Add => add(a, b),
                BinOp::Sub => sub(a, b),
                BinOp::Mul => mul(a, b),
                BinOp::Div => div(a, b),
            }
        }
        Expr::Pow(a, n) => pow(simplify(a), *n),
    }
}

/// Differentiate with a caller-supplied rule for leaves.
fn differentiate(e: &Expr, leaf: &dyn Fn(&Var) -> Expr) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(v) => leaf(v),
        Expr::Unary(op, a) => {
            let da = differentiate(a, leaf);
            if da.is_zero() {
                return Expr::Const(0.0);
            }
            let a = (**a).clone();
            match op {
                UnOp::Sin => mul(unary(UnOp::Cos, a), da),
                UnOp::Cos => mul(neg(unary(UnOp::Sin, a)), da),
                UnOp::Exp => mul(unary(UnOp::Exp, a), da),
                UnOp::Neg => neg(da),
            }
        }
        Expr::Binary(op, a, b) => {
            let da = differentiate(a, leaf);
            let db = differentiate(b, leaf);
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b), mul(a, db)),
                BinOp::Div => {
                    if db.is_zero() {
                        div(da, b)
                    } else {
                        div(sub(mul(da, b.clone()), mul(a, db)), pow(b, 2))
                    }
                }
            }
        }
        Expr::Pow(a, n) => {
            let da = differentiate(a, leaf);
            if da.is_zero() {
                return Expr::Const(0.0);
            }
            mul(scale(*n as f64, pow((**a).clone(), n - 1)), da)
        }
    }
}

/// Exact `order`-th partial derivative with respect to `var`.
///
/// Placeholders are opaque leaves: their derivative with respect to `t` or
/// `x_i` is zero. Differentiating with respect to a placeholder itself is
/// allowed.
pub fn symbolic_partial(e: &Expr, var: &Var, order: u32) -> Expr {
    let mut out = simplify(e);
    for _ in 0..order {
        out = differentiate(&out, &|v| Expr::Const(if v == var { 1.0 } else { 0.0 }));
        if out.is_zero() {
            break;
        }
    }
    out
}

/// Total derivative in `x_i` along a solution: the chain rule maps the
/// placeholder `∂_x^α ∂_t^γ y_h` to `∂_x^{α+e_i} ∂_t^γ y_h`.
pub fn total_x_derivative(e: &Expr, i: usize) -> Expr {
    differentiate(e, &|v| match v {
        Var::X(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
        Var::Deriv { alpha, gamma, comp } => {
            let mut a = alpha.clone();
            if a.len() <= i {
                a.resize(i + 1, 0);
            }
            a[i] += 1;
            Expr::Var(Var::Deriv {
                alpha: a,
                gamma: *gamma,
                comp: *comp,
            })
        }
        _ => Expr::Const(0.0),
    })
}

/// `e = Σ coeff_z · z + rest` over the placeholders `z` of `e`.
#[derive(Debug, Clone)]
pub struct AffineSplit {
    pub terms: Vec<(Var, Expr)>,
    pub rest: Expr,
}

/// Detect whether `e` is affine in its placeholders with coefficients free
/// of placeholders. The decomposition is verified numerically on
/// deterministic random probes.
pub fn affine_split(e: &Expr) -> Option<AffineSplit> {
    let zs = e.placeholders();
    let mut terms = Vec::new();
    for z in &zs {
        let c = symbolic_partial(e, z, 1);
        if c.depends_on(&|v| v.is_placeholder()) {
            return None;
        }
        terms.push((z.clone(), c));
    }
    let rest = simplify(&e.substitute(&|v| v.is_placeholder().then_some(Expr::Const(0.0))));
    let vars = e.vars();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checked = 0;
    'probe: for _ in 0..64 {
        let mut b = Bindings::new();
        for v in &vars {
            b.set(v.clone(), rng.gen_range(-1.3..1.7));
        }
        let lhs = match e.eval(&b) {
            Ok(v) => v,
            Err(_) => continue 'probe,
        };
        let mut rhs = match rest.eval(&b) {
            Ok(v) => v,
            Err(_) => continue 'probe,
        };
        for (z, c) in &terms {
            match (c.eval(&b), b.lookup(z)) {
                (Ok(cv), Some(zv)) => rhs += cv * zv,
                _ => continue 'probe,
            }
        }
        if (lhs - rhs).abs() > 1e-9 * (1.0 + lhs.abs()) {
            return None;
        }
        checked += 1;
        if checked >= 16 {
            break;
        }
    }
    (checked > 0).then_some(AffineSplit { terms, rest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, Arity};

    fn at(e: &Expr, x: f64) -> f64 {
        e.eval(&Bindings::new().with(Var::X(0), x)).unwrap()
    }

    #[test]
    fn power_rule() {
        let e = parse_expression("x1^3", &Arity::spatial(1)).unwrap();
        let d = symbolic_partial(&e, &Var::X(0), 1);
        assert_eq!(d, Expr::binary(BinOp::Mul, Expr::c(3.0), Expr::pow(Expr::x(0), 2)));
    }

    #[test]
    fn second_derivative_of_sin() {
        let e = parse_expression("sin(x1)", &Arity::spatial(1)).unwrap();
        let d = symbolic_partial(&e, &Var::X(0), 2);
        assert_eq!(d, Expr::unary(UnOp::Neg, Expr::unary(UnOp::Sin, Expr::x(0))));
        assert_eq!(symbolic_partial(&e, &Var::X(0), 0), e);
    }

    #[test]
    fn quotient_rule_against_closed_form() {
        let ar = Arity::spatial(1);
        let e = parse_expression("1/(1+x1^2)", &ar).unwrap();
        let d = symbolic_partial(&e, &Var::X(0), 1);
        let expect = parse_expression("-2*x1/(1+x1^2)^2", &ar).unwrap();
        for x in [-1.0, 0.0, 0.3, 2.5] {
            assert!((at(&d, x) - at(&expect, x)).abs() < 1e-14);
        }
        // Central difference cross-check at 0.3.
        let h = 1e-5;
        let fd = (at(&e, 0.3 + h) - at(&e, 0.3 - h)) / (2.0 * h);
        assert!((fd - at(&d, 0.3)).abs() < 1e-8);
    }

    #[test]
    fn placeholders_are_opaque() {
        let ar = Arity::rhs(1, 1, 2, 0);
        let e = parse_expression("x*Dx2(y1)", &ar).unwrap();
        let d = symbolic_partial(&e, &Var::X(0), 1);
        assert_eq!(d, Expr::Var(Var::deriv(vec![2], 0, 0)));
        let dt = symbolic_partial(&e, &Var::T, 1);
        assert!(dt.is_zero());
    }

    #[test]
    fn total_derivative_shifts_placeholders() {
        let ar = Arity::rhs(1, 1, 1, 0);
        let e = parse_expression("y1*Dx1(y1)", &ar).unwrap();
        let d = total_x_derivative(&e, 0);
        let b = Bindings::new()
            .with(Var::deriv(vec![0], 0, 0), 2.0)
            .with(Var::deriv(vec![1], 0, 0), 3.0)
            .with(Var::deriv(vec![2], 0, 0), 5.0);
        // z1^2 + z0 z2
        assert_eq!(d.eval(&b).unwrap(), 9.0 + 10.0);
    }

    #[test]
    fn affine_detection() {
        let ar = Arity::rhs(1, 1, 2, 1);
        let e = parse_expression("cos(t)*Dx2(y1) + x^2 - 3*Dt1(y1)", &ar).unwrap();
        let s = affine_split(&e).unwrap();
        assert_eq!(s.terms.len(), 2);
        assert!(!s.rest.depends_on(&|v| v.is_placeholder()));
        let e = parse_expression("y1*Dx1(y1)", &ar).unwrap();
        assert!(affine_split(&e).is_none());
        let e = parse_expression("sin(y1)", &ar).unwrap();
        assert!(affine_split(&e).is_none());
    }

    #[test]
    fn simplifier_identities() {
        let ar = Arity::spatial(1);
        let e = parse_expression("0*x + 1*x - 0 + (x^2)^3 - -(-(x))", &ar).unwrap();
        let s = simplify(&e);
        for x in [0.4, -1.1] {
            assert!((at(&s, x) - at(&e, x)).abs() < 1e-14);
        }
        assert!(s.size() < e.size());
    }
}
