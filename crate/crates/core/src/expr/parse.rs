use std::collections::BTreeMap;

use super::{BinOp, Expr, ExprError, UnOp, Var};

/// Declares which names an expression may use.
#[derive(Debug, Clone, Default)]
pub struct Arity {
    /// Number of spatial dimensions.
    pub s: usize,
    /// Number of solution components (0 forbids placeholders).
    pub m: usize,
    /// Maximal spatial derivative order in placeholders.
    pub l: u32,
    /// Maximal time derivative order in placeholders.
    pub p: u32,
    pub allow_t: bool,
    pub symbols: Vec<String>,
    /// Named constants substituted at parse time.
    pub constants: BTreeMap<String, f64>,
}

impl Arity {
    /// Functions of `x1..xs` only.
    pub fn spatial(s: usize) -> Self {
        Arity {
            s,
            ..Default::default()
        }
    }

    /// Functions of `t, x1..xs`.
    pub fn space_time(s: usize) -> Self {
        Arity {
            s,
            allow_t: true,
            ..Default::default()
        }
    }

    /// Right-hand sides `F[t, x, z]`.
    pub fn rhs(s: usize, m: usize, l: u32, p: u32) -> Self {
        Arity {
            s,
            m,
            l,
            p,
            allow_t: true,
            ..Default::default()
        }
    }

    pub fn with_symbols(mut self, names: &[&str]) -> Self {
        self.symbols.extend(names.iter().map(|s| s.to_string()));
        self
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn with_constants(mut self, c: &BTreeMap<String, f64>) -> Self {
        self.constants.extend(c.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

fn syntax(pos: usize, msg: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        pos,
        msg: msg.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                let mut integer = true;
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                if j < b.len() && b[j] == b'.' {
                    integer = false;
                    j += 1;
                    while j < b.len() && b[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < b.len() && (b[j] == b'e' || b[j] == b'E') {
                    let mut k = j + 1;
                    if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                        k += 1;
                    }
                    if k < b.len() && b[k].is_ascii_digit() {
                        integer = false;
                        while k < b.len() && b[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                let v: f64 = text
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
                i = j;
                out.push((Tok::Num(v, integer), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_') {
                    j += 1;
                }
                out.push((Tok::Ident(src[i..j].to_string()), start));
                i = j;
                continue;
            }
            _ => return Err(syntax(i, format!("unexpected character `{}`", c as char))),
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    i: usize,
    arity: &'a Arity,
}

enum DerivOp {
    X { dim: usize, order: u32 },
    T { order: u32 },
}

fn parse_deriv_op(name: &str) -> Option<DerivOp> {
    let digits = |s: &str| -> Option<u32> {
        if !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit()) {
            s.parse().ok()
        } else {
            None
        }
    };
    let order_of = |s: &str| if s.is_empty() { Some(1) } else { digits(s) };
    if let Some(rest) = name.strip_prefix("Dt") {
        return order_of(rest).map(|order| DerivOp::T { order });
    }
    let rest = name.strip_prefix("Dx")?;
    match rest.split_once('_') {
        Some((i, k)) => {
            let dim = digits(i)? as usize;
            if dim == 0 {
                return None;
            }
            Some(DerivOp::X {
                dim: dim - 1,
                order: digits(k)?,
            })
        }
        None => order_of(rest).map(|order| DerivOp::X { dim: 0, order }),
    }
}

/// `prefix` followed by an optional 1-based index.
fn indexed(name: &str, prefix: char) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() {
        return Some(0);
    }
    if rest.bytes().all(|c| c.is_ascii_digit()) {
        let i: usize = rest.parse().ok()?;
        if i >= 1 {
            return Some(i - 1);
        }
    }
    None
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let j = (self.i + k).min(self.toks.len() - 1);
        &self.toks[j].0
    }

    fn pos(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Minus {
            if let Tok::Num(v, _) = *self.peek_at(1) {
                if *self.peek_at(2) != Tok::Caret {
                    self.bump();
                    self.bump();
                    return Ok(Expr::Const(-v));
                }
            }
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::unary(UnOp::Neg, inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let n = self.int_exponent()?;
        Ok(Expr::pow(base, n))
    }

    fn int_exponent(&mut self) -> Result<i32, ExprError> {
        let pos = self.pos();
        let paren = *self.peek() == Tok::LParen;
        if paren {
            self.bump();
        }
        let neg = *self.peek() == Tok::Minus;
        if neg {
            self.bump();
        }
        let n = match self.bump() {
            Tok::Num(v, true) if v <= i32::MAX as f64 => v as i32,
            Tok::Num(..) => {
                return Err(syntax(pos, "exponent must be an integer literal"));
            }
            _ => return Err(syntax(pos, "expected integer exponent")),
        };
        if paren {
            self.expect(Tok::RParen, "`)` after exponent")?;
        }
        Ok(if neg { -n } else { n })
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v, _) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, pos),
            Tok::End => Err(syntax(pos, "unexpected end of input")),
            t => Err(syntax(pos, format!("unexpected token {t:?}"))),
        }
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<Expr, ExprError> {
        let func = match name.as_str() {
            "sin" => Some(UnOp::Sin),
            "cos" => Some(UnOp::Cos),
            "exp" => Some(UnOp::Exp),
            _ => None,
        };
        if let Some(op) = func {
            self.expect(Tok::LParen, "`(` after function name")?;
            let arg = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::unary(op, arg));
        }
        if parse_deriv_op(&name).is_some() || indexed(&name, 'y').is_some() {
            let v = self.placeholder(name, pos)?;
            return Ok(Expr::Var(v));
        }
        if let Some(&c) = self.arity.constants.get(&name) {
            return Ok(Expr::Const(c));
        }
        if self.arity.symbols.contains(&name) {
            return Ok(Expr::Var(Var::Sym(name)));
        }
        if name == "t" {
            return if self.arity.allow_t {
                Ok(Expr::Var(Var::T))
            } else {
                Err(ExprError::Undeclared(name))
            };
        }
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        if let Some(i) = indexed(&name, 'x') {
            return if i < self.arity.s {
                Ok(Expr::Var(Var::X(i)))
            } else {
                Err(ExprError::Undeclared(name))
            };
        }
        Err(ExprError::Undeclared(name))
    }

    /// Parses `y<h>` or nested `Dx..(..)`/`Dt..(..)` applications.
    fn placeholder(&mut self, name: String, pos: usize) -> Result<Var, ExprError> {
        let s = self.arity.s;
        let (mut alpha, gamma, comp, text) = self.placeholder_inner(name, pos)?;
        alpha.resize(s.max(alpha.len()), 0);
        let total: u32 = alpha.iter().sum();
        if total > self.arity.l || gamma > self.arity.p {
            return Err(ExprError::PlaceholderOutOfRange {
                name: text,
                l: self.arity.l,
                p: self.arity.p,
            });
        }
        if alpha.len() > s {
            return Err(ExprError::Undeclared(text));
        }
        Ok(Var::Deriv { alpha, gamma, comp })
    }

    fn placeholder_inner(
        &mut self,
        name: String,
        pos: usize,
    ) -> Result<(Vec<u32>, u32, usize, String), ExprError> {
        if let Some(comp) = indexed(&name, 'y') {
            if comp >= self.arity.m {
                return Err(ExprError::Undeclared(name));
            }
            return Ok((vec![0; self.arity.s], 0, comp, name));
        }
        let op = parse_deriv_op(&name).ok_or_else(|| syntax(pos, "expected placeholder"))?;
        self.expect(Tok::LParen, "`(` after derivative operator")?;
        let ipos = self.pos();
        let inner = match self.bump() {
            Tok::Ident(n) => n,
            _ => {
                return Err(syntax(
                    ipos,
                    "derivative operators apply to a solution component or another derivative",
                ))
            }
        };
        if parse_deriv_op(&inner).is_none() && indexed(&inner, 'y').is_none() {
            return Err(syntax(
                ipos,
                "derivative operators apply to a solution component or another derivative",
            ));
        }
        let (mut alpha, mut gamma, comp, text) = self.placeholder_inner(inner, ipos)?;
        self.expect(Tok::RParen, "`)`")?;
        match op {
            DerivOp::T { order } => gamma += order,
            DerivOp::X { dim, order } => {
                if dim >= alpha.len() {
                    if dim >= self.arity.s {
                        return Err(ExprError::Undeclared(format!("x{}", dim + 1)));
                    }
                    alpha.resize(dim + 1, 0);
                }
                alpha[dim] += order;
            }
        }
        Ok((alpha, gamma, comp, format!("{name}({text})")))
    }
}

/// Parse `text` against the declared arity.
pub fn parse_expression(text: &str, arity: &Arity) -> Result<Expr, ExprError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, i: 0, arity };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.pos(), "trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_operators_have_order_one() {
        let ar = Arity::rhs(1, 1, 1, 1);
        assert_eq!(
            parse_expression("Dx(y)", &ar).unwrap(),
            parse_expression("Dx1(y1)", &ar).unwrap()
        );
        assert_eq!(
            parse_expression("Dt(y)", &ar).unwrap(),
            Expr::Var(Var::deriv(vec![0], 1, 0))
        );
    }

    #[test]
    fn heat_rhs_with_bound_constant() {
        let ar = Arity::rhs(1, 1, 2, 0).with_constant("a", 1.0);
        let e = parse_expression("a*Dx2(y1)", &ar).unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Mul,
                Expr::Const(1.0),
                Expr::Var(Var::deriv(vec![2], 0, 0))
            )
        );
    }

    #[test]
    fn burgers_product() {
        let ar = Arity::rhs(1, 1, 1, 0);
        let e = parse_expression("y1*Dx1(y1)", &ar).unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Mul,
                Expr::Var(Var::deriv(vec![0], 0, 0)),
                Expr::Var(Var::deriv(vec![1], 0, 0))
            )
        );
    }

    #[test]
    fn sin_primitive() {
        let e = parse_expression("sin(x1)", &Arity::spatial(1)).unwrap();
        assert_eq!(e, Expr::unary(UnOp::Sin, Expr::x(0)));
    }

    #[test]
    fn nested_and_multi_dim_derivatives() {
        let ar = Arity::rhs(2, 2, 3, 1);
        let e = parse_expression("Dt1(Dx2_2(Dx1(y2)))", &ar).unwrap();
        assert_eq!(e, Expr::Var(Var::deriv(vec![1, 2], 1, 1)));
    }

    #[test]
    fn errors() {
        let ar = Arity::rhs(1, 1, 2, 0);
        assert!(matches!(
            parse_expression("Dx3(y1)", &ar),
            Err(ExprError::PlaceholderOutOfRange { .. })
        ));
        assert!(matches!(
            parse_expression("Dt1(y1)", &ar),
            Err(ExprError::PlaceholderOutOfRange { .. })
        ));
        assert!(matches!(
            parse_expression("y2", &ar),
            Err(ExprError::Undeclared(_))
        ));
        assert!(matches!(
            parse_expression("x2", &ar),
            Err(ExprError::Undeclared(_))
        ));
        assert!(matches!(
            parse_expression("b*x", &ar),
            Err(ExprError::Undeclared(_))
        ));
        assert!(matches!(
            parse_expression("t", &Arity::spatial(1)),
            Err(ExprError::Undeclared(_))
        ));
        match parse_expression("1 + * 2", &ar) {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_expression("x^1.5", &ar),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            parse_expression("Dx1(x)", &ar),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            parse_expression("sin(x", &ar),
            Err(ExprError::Syntax { .. })
        ));
    }

    #[test]
    fn unary_minus_and_powers() {
        let ar = Arity::spatial(1);
        assert_eq!(parse_expression("-2", &ar).unwrap(), Expr::Const(-2.0));
        assert_eq!(
            parse_expression("-2^2", &ar).unwrap(),
            Expr::unary(UnOp::Neg, Expr::pow(Expr::Const(2.0), 2))
        );
        assert_eq!(
            parse_expression("x^-3", &ar).unwrap(),
            Expr::pow(Expr::x(0), -3)
        );
        assert_eq!(
            parse_expression("x^(-3)", &ar).unwrap(),
            Expr::pow(Expr::x(0), -3)
        );
        assert_eq!(
            parse_expression("1e-3*x", &ar).unwrap(),
            Expr::binary(BinOp::Mul, Expr::Const(1e-3), Expr::x(0))
        );
    }

    #[test]
    fn round_trip_examples() {
        let ar = Arity::rhs(2, 2, 2, 1).with_symbols(&["z"]);
        for src in [
            "a",
            "-(x1) + 2*x2^3 - z/(1+x1^2)",
            "sin(cos(exp(-t)))*Dt1(Dx1_1(y2)) - -3",
            "x^(-2)*(-2)^2 - -(0.5)",
            "Dx2_2(y1)*y2 - 1e-300",
        ] {
            let ar = ar.clone().with_constant("a", -1.25);
            let e = parse_expression(src, &ar).unwrap();
            let printed = e.to_string();
            let again = parse_expression(&printed, &ar).unwrap();
            assert_eq!(e, again, "{src} -> {printed}");
        }
    }
}
