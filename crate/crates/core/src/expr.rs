//! Scalar arithmetic expressions for coefficient components.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `t`, `s`, `y1..yk`, `z11..zkd` (row, column) in the `f`
//! and `g` slots, and `wT` (or `wT1..wTd`) in the terminal slot. Functions
//! are `sin cos exp sqrt abs` (one argument) and `min max` (two).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("variable `{name}` at position {pos} is not allowed in the {slot} slot")]
    IllegalVariable { name: String, slot: Slot, pos: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression evaluated to a non-finite value ({0})")]
    NonFinite(f64),
}

/// Which coefficient an expression feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    F,
    G,
    Xi,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::F => "f",
            Slot::G => "g",
            Slot::Xi => "xi",
        })
    }
}

/// Problem dimensions `(k, d, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub k: usize,
    pub d: usize,
    pub l: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { k: 1, d: 1, l: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Var {
    T,
    S,
    /// zero-based component of `y`
    Y(usize),
    /// zero-based (row, column) of `z`
    Z(usize, usize),
    /// zero-based component of `W_T`
    WT(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Values bound to the variables during evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub t: f64,
    pub s: f64,
    pub y: &'a [f64],
    /// row-major `k x d`
    pub z: &'a [f64],
    pub z_cols: usize,
    pub w_terminal: &'a [f64],
}

impl Expr {
    fn eval_raw(&self, b: &Bindings<'_>) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => match *v {
                Var::T => b.t,
                Var::S => b.s,
                Var::Y(c) => b.y[c],
                Var::Z(r, c) => b.z[r * b.z_cols + c],
                Var::WT(c) => b.w_terminal[c],
            },
            Expr::Neg(e) => -e.eval_raw(b)?,
            Expr::Bin(op, l, r) => {
                let x = l.eval_raw(b)?;
                let y = r.eval_raw(b)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(ExprError::DivisionByZero);
                        }
                        x / y
                    }
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval_raw(b)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => x.sqrt(),
                    Func::Abs => x.abs(),
                    Func::Min => x.min(args[1].eval_raw(b)?),
                    Func::Max => x.max(args[1].eval_raw(b)?),
                }
            }
        })
    }

    /// Evaluates the tree; division by zero and non-finite results are errors.
    pub fn eval(&self, b: &Bindings<'_>) -> Result<f64, ExprError> {
        let v = self.eval_raw(b)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite(v))
        }
    }

    /// True if the tree mentions `y` or `z`.
    pub fn depends_on_state(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => matches!(v, Var::Y(_) | Var::Z(..)),
            Expr::Neg(e) => e.depends_on_state(),
            Expr::Bin(_, l, r) => l.depends_on_state() || r.depends_on_state(),
            Expr::Call(_, args) => args.iter().any(Expr::depends_on_state),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::S => write!(f, "s"),
            Var::Y(c) => write!(f, "y{}", c + 1),
            Var::Z(r, c) => write!(f, "z{}{}", r + 1, c + 1),
            Var::WT(c) => write!(f, "wT{}", c + 1),
        }
    }
}

/// Fully parenthesized output that re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "-{e}"),
            Expr::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (n, a) in args.iter().enumerate() {
                    if n > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A parsed expression together with the slot it was checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionAst {
    pub slot: Slot,
    pub root: Expr,
}

impl ExpressionAst {
    pub fn eval(&self, b: &Bindings<'_>) -> Result<f64, ExprError> {
        self.root.eval(b)
    }

    pub fn depends_on_state(&self) -> bool {
        self.root.depends_on_state()
    }
}

impl fmt::Display for ExpressionAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    slot: Slot,
    dims: Dims,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => self.err(self.pos, format!("expected `{}`, found `{}`", c as char, x as char)),
            None => self.err(self.pos, format!("expected `{}`, found end of input", c as char)),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => self.err(self.pos, "unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => self.err(self.pos, format!("unexpected character `{}`", c as char)),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return self.err(start, "malformed number");
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return self.err(save, "malformed exponent");
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::Num(v)),
            Err(_) => self.err(start, format!("malformed number `{text}`")),
        }
    }

    fn identifier(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(func) = Func::from_name(name) {
            self.expect(b'(')?;
            let mut args = vec![self.expr()?];
            while self.peek() == Some(b',') {
                self.pos += 1;
                args.push(self.expr()?);
            }
            self.expect(b')')?;
            if args.len() != func.arity() {
                return self.err(
                    start,
                    format!("{} takes {} argument(s), got {}", name, func.arity(), args.len()),
                );
            }
            return Ok(Expr::Call(func, args));
        }
        let var = self.variable(name, start)?;
        Ok(Expr::Var(var))
    }

    fn variable(&self, name: &str, pos: usize) -> Result<Var, ExprError> {
        let unknown = || ExprError::UnknownIdentifier {
            name: name.to_string(),
            pos,
        };
        let index = |digits: &str, bound: usize| -> Option<usize> {
            if digits.len() != 1 {
                return None;
            }
            let v = digits.parse::<usize>().ok()?;
            (1..=bound).contains(&v).then(|| v - 1)
        };
        let var = match name {
            "t" => Var::T,
            "s" => Var::S,
            "wT" if self.dims.d == 1 => Var::WT(0),
            _ if name.starts_with("wT") => Var::WT(index(&name[2..], self.dims.d).ok_or_else(unknown)?),
            _ if name.starts_with('y') => Var::Y(index(&name[1..], self.dims.k).ok_or_else(unknown)?),
            _ if name.starts_with('z') && name.len() == 3 => Var::Z(
                index(&name[1..2], self.dims.k).ok_or_else(unknown)?,
                index(&name[2..3], self.dims.d).ok_or_else(unknown)?,
            ),
            _ => return Err(unknown()),
        };
        let legal = match self.slot {
            Slot::F | Slot::G => !matches!(var, Var::WT(_)),
            Slot::Xi => matches!(var, Var::WT(_)),
        };
        if !legal {
            return Err(ExprError::IllegalVariable {
                name: name.to_string(),
                slot: self.slot,
                pos,
            });
        }
        Ok(var)
    }
}

/// Parses `text` and checks every variable against `slot` and `dims`.
pub fn parse_expression(text: &str, slot: Slot, dims: Dims) -> Result<ExpressionAst, ExprError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        slot,
        dims,
    };
    if p.peek().is_none() {
        return Err(ExprError::Syntax {
            pos: 0,
            msg: "empty expression".into(),
        });
    }
    let root = p.expr()?;
    if let Some(c) = p.peek() {
        return Err(ExprError::Syntax {
            pos: p.pos,
            msg: format!("unexpected trailing `{}`", c as char),
        });
    }
    Ok(ExpressionAst { slot, root })
}

/// Evaluates an `f`/`g` slot expression at `(t, s, y, z)`, `z` row-major `k x d`.
pub fn evaluate_coefficient(ast: &ExpressionAst, t: f64, s: f64, y: &[f64], z: &[f64]) -> Result<f64, ExprError> {
    let z_cols = if y.is_empty() { 0 } else { z.len() / y.len() };
    ast.eval(&Bindings {
        t,
        s,
        y,
        z,
        z_cols,
        w_terminal: &[],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(text: &str, slot: Slot) -> Result<ExpressionAst, ExprError> {
        parse_expression(text, slot, Dims::default())
    }

    fn eval_f(text: &str, t: f64, s: f64, y: &[f64], z: &[f64]) -> Result<f64, ExprError> {
        evaluate_coefficient(&p(text, Slot::F)?, t, s, y, z)
    }

    #[test]
    fn parse_examples() {
        assert_eq!(p("0", Slot::F).unwrap().root, Expr::Num(0.0));
        assert_eq!(eval_f("t+s", 0.25, 0.5, &[0.0], &[0.0]).unwrap(), 0.75);
        assert!(matches!(
            p("sin(wT)", Slot::F),
            Err(ExprError::IllegalVariable { slot: Slot::F, .. })
        ));
        assert!(matches!(p("t", Slot::Xi), Err(ExprError::IllegalVariable { .. })));
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(eval_f("2*z11", 0.0, 0.0, &[0.0], &[0.5]).unwrap(), 1.0);
        assert_eq!(eval_f("exp(-(1-s))*y1", 0.0, 1.0, &[3.0], &[0.0]).unwrap(), 3.0);
        assert_eq!(eval_f("1/(t-t)", 0.3, 0.0, &[0.0], &[0.0]), Err(ExprError::DivisionByZero));
        assert!(matches!(eval_f("sqrt(0-1)", 0.0, 0.0, &[0.0], &[0.0]), Err(ExprError::NonFinite(_))));
        assert!(matches!(eval_f("exp(1000)", 0.0, 0.0, &[0.0], &[0.0]), Err(ExprError::NonFinite(_))));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = |s: &str| eval_f(s, 0.0, 0.0, &[0.0], &[0.0]).unwrap();
        assert_eq!(e("1 + 2 * 3"), 7.0);
        assert_eq!(e("8 - 3 - 2"), 3.0);
        assert_eq!(e("8 / 4 / 2"), 1.0);
        assert_eq!(e("-2 * 3"), -6.0);
        assert_eq!(e("2 * -3"), -6.0);
        assert_eq!(e("--2"), 2.0);
        assert_eq!(e("min(2, max(1, 3)) + abs(-0.5)"), 2.5);
        assert_eq!(e("1.5e1 + .5"), 15.5);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert_eq!(
            p("1 + * 2", Slot::F),
            Err(ExprError::Syntax {
                pos: 4,
                msg: "unexpected character `*`".into()
            })
        );
        assert!(matches!(p("(1 + 2", Slot::F), Err(ExprError::Syntax { pos: 6, .. })));
        assert!(matches!(p("1 2", Slot::F), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(p("", Slot::F), Err(ExprError::Syntax { pos: 0, .. })));
        assert!(matches!(p("min(1)", Slot::F), Err(ExprError::Syntax { .. })));
        assert!(matches!(p("1e+", Slot::F), Err(ExprError::Syntax { .. })));
        assert!(matches!(p("foo + 1", Slot::F), Err(ExprError::UnknownIdentifier { pos: 0, .. })));
        assert!(matches!(p("y2", Slot::F), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(p("z12", Slot::F), Err(ExprError::UnknownIdentifier { .. })));
    }

    #[test]
    fn multi_dimensional_variables() {
        let dims = Dims { k: 2, d: 3, l: 1 };
        let ast = parse_expression("y2 + z23", Slot::G, dims).unwrap();
        let v = evaluate_coefficient(&ast, 0.0, 0.0, &[1.0, 2.0], &[0.0, 0.0, 0.0, 0.0, 0.0, 5.0]).unwrap();
        assert_eq!(v, 7.0);
        assert!(parse_expression("wT", Slot::Xi, dims).is_err());
        let xi = parse_expression("wT3", Slot::Xi, dims).unwrap();
        let b = Bindings {
            w_terminal: &[0.0, 0.0, 4.0],
            ..Default::default()
        };
        assert_eq!(xi.eval(&b).unwrap(), 4.0);
    }

    #[test]
    fn state_dependence() {
        assert!(!p("t * s + 1", Slot::F).unwrap().depends_on_state());
        assert!(p("sin(y1)", Slot::F).unwrap().depends_on_state());
        assert!(p("0.5*z11", Slot::G).unwrap().depends_on_state());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Num),
            Just(Expr::Var(Var::T)),
            Just(Expr::Var(Var::S)),
            Just(Expr::Var(Var::Y(0))),
            Just(Expr::Var(Var::Z(0, 0))),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
                (
                    prop_oneof![
                        Just(Func::Sin),
                        Just(Func::Cos),
                        Just(Func::Exp),
                        Just(Func::Sqrt),
                        Just(Func::Abs)
                    ],
                    inner.clone()
                )
                    .prop_map(|(f, a)| Expr::Call(f, vec![a])),
                (prop_oneof![Just(Func::Min), Just(Func::Max)], inner.clone(), inner)
                    .prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let text = e.to_string();
            let back = parse_expression(&text, Slot::F, Dims::default()).unwrap();
            prop_assert_eq!(back.root, e);
        }
    }
}
