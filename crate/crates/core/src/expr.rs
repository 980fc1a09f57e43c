//! Scalar expressions over a declared list of state variables.
//!
//! This is the single entry point for user supplied vector field components
//! and target functions. Expressions are parsed once into an immutable tree;
//! evaluation, rule based differentiation and lifting to jets
//! ([`crate::jet::lift`]) all walk that tree.
//!
//! Grammar, loosest to tightest binding:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' int)*
//! int     := ['-'] digits | '(' ['-'] digits ')'
//! atom    := number | ident | func '(' sum ')' | '(' sum ')'
//! func    := sin | cos | exp | ln | sqrt
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`. Only integer
//! exponents are accepted.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn apply(self, v: f64) -> Result<f64, ExprError> {
        match self {
            Func::Sin => Ok(v.sin()),
            Func::Cos => Ok(v.cos()),
            Func::Exp => Ok(v.exp()),
            Func::Ln if v > 0.0 => Ok(v.ln()),
            Func::Ln => Err(ExprError::Domain(format!("ln of non-positive value {v}"))),
            Func::Sqrt if v >= 0.0 => Ok(v.sqrt()),
            Func::Sqrt => Err(ExprError::Domain(format!("sqrt of negative value {v}"))),
        }
    }
}

/// Expression tree. Variables are stored by index into the declared
/// variable list of the enclosing system.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Const(f64),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    // Smart constructors. They fold constants and drop neutral elements,
    // nothing more.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => Expr::neg(b),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (a, _) if a.is_zero() => Expr::Const(0.0),
            (_, b) if b.is_zero() => Expr::Const(0.0),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) if y != 0.0 => Expr::Const(x / y),
            (a, b) if a.is_zero() && !b.is_zero() => Expr::Const(0.0),
            (a, b) if b.is_one() => a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(-x),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        }
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        match (a, n) {
            (_, 0) => Expr::Const(1.0),
            (a, 1) => a,
            (Expr::Const(x), n) => Expr::Const(x.powi(n)),
            (a, n) => Expr::Pow(Box::new(a), n),
        }
    }

    pub fn func(f: Func, a: Expr) -> Expr {
        match a {
            Expr::Const(x) => match f.apply(x) {
                Ok(v) => Expr::Const(v),
                Err(_) => Expr::Func(f, Box::new(Expr::Const(x))),
            },
            a => Expr::Func(f, Box::new(a)),
        }
    }

    /// Evaluates the expression at `x`, one coordinate per declared variable.
    pub fn eval_point(&self, x: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Var(i) => *x.get(*i).ok_or_else(|| {
                ExprError::Domain(format!("variable index {i} outside point of length {}", x.len()))
            })?,
            Expr::Const(c) => *c,
            Expr::Neg(a) => -a.eval_point(x)?,
            Expr::Func(f, a) => f.apply(a.eval_point(x)?)?,
            Expr::Add(a, b) => a.eval_point(x)? + b.eval_point(x)?,
            Expr::Sub(a, b) => a.eval_point(x)? - b.eval_point(x)?,
            Expr::Mul(a, b) => a.eval_point(x)? * b.eval_point(x)?,
            Expr::Div(a, b) => {
                let d = b.eval_point(x)?;
                if d == 0.0 {
                    return Err(ExprError::Domain("division by zero".into()));
                }
                a.eval_point(x)? / d
            }
            Expr::Pow(a, n) => {
                let base = a.eval_point(x)?;
                if base == 0.0 && *n < 0 {
                    return Err(ExprError::Domain("zero raised to a negative power".into()));
                }
                base.powi(*n)
            }
        })
    }

    /// Rule based partial derivative with respect to variable `var`.
    pub fn symbolic_partial(&self, var: usize) -> Expr {
        match self {
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Neg(a) => Expr::neg(a.symbolic_partial(var)),
            Expr::Add(a, b) => Expr::add(a.symbolic_partial(var), b.symbolic_partial(var)),
            Expr::Sub(a, b) => Expr::sub(a.symbolic_partial(var), b.symbolic_partial(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.symbolic_partial(var), (**b).clone()),
                Expr::mul((**a).clone(), b.symbolic_partial(var)),
            ),
            Expr::Div(a, b) => {
                let num = Expr::sub(
                    Expr::mul(a.symbolic_partial(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.symbolic_partial(var)),
                );
                Expr::div(num, Expr::pow((**b).clone(), 2))
            }
            Expr::Pow(a, n) => {
                let da = a.symbolic_partial(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                Expr::mul(
                    Expr::mul(Expr::Const(*n as f64), Expr::pow((**a).clone(), n - 1)),
                    da,
                )
            }
            Expr::Func(f, a) => {
                let da = a.symbolic_partial(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::func(Func::Cos, inner),
                    Func::Cos => Expr::neg(Expr::func(Func::Sin, inner)),
                    Func::Exp => Expr::func(Func::Exp, inner),
                    Func::Ln => Expr::div(Expr::Const(1.0), inner),
                    Func::Sqrt => Expr::div(
                        Expr::Const(1.0),
                        Expr::mul(Expr::Const(2.0), Expr::func(Func::Sqrt, inner)),
                    ),
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Iterated partial derivative for a multi-index `alpha`.
    pub fn symbolic_multi_partial(&self, alpha: &[u32]) -> Expr {
        let mut e = self.clone();
        for (var, &times) in alpha.iter().enumerate() {
            for _ in 0..times {
                e = e.symbolic_partial(var);
            }
        }
        e
    }

    /// Replaces every variable `i` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Var(i) => subs[*i].clone(),
            Expr::Const(c) => Expr::Const(*c),
            Expr::Neg(a) => Expr::neg(a.substitute(subs)),
            Expr::Func(f, a) => Expr::func(*f, a.substitute(subs)),
            Expr::Add(a, b) => Expr::add(a.substitute(subs), b.substitute(subs)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(subs), b.substitute(subs)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(subs), b.substitute(subs)),
            Expr::Div(a, b) => Expr::div(a.substitute(subs), b.substitute(subs)),
            Expr::Pow(a, n) => Expr::pow(a.substitute(subs), *n),
        }
    }

    /// Renders the expression with the given variable names. The output is
    /// fully parenthesised and parses back to the same tree.
    pub fn display<'a>(&'a self, vars: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, vars }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    vars: &'a [String],
}

impl<'a> fmt::Display for ExprDisplay<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e: &'a Expr| ExprDisplay { expr: e, vars: self.vars };
        match self.expr {
            Expr::Var(i) => match self.vars.get(*i) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "_v{i}"),
            },
            Expr::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Neg(a) => write!(f, "(-{})", sub(a)),
            Expr::Func(func, a) => write!(f, "{}({})", func.name(), sub(a)),
            Expr::Add(a, b) => write!(f, "({} + {})", sub(a), sub(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", sub(a), sub(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", sub(a), sub(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", sub(a), sub(b)),
            Expr::Pow(a, n) => write!(f, "({})^{}", sub(a), n),
        }
    }
}

/// Parses `text` over the declared variables.
pub fn parse(text: &str, vars: &[String]) -> Result<Expr, ExprError> {
    parse_with_params(text, vars, &BTreeMap::new())
}

/// Parses `text`; identifiers found in `params` are replaced by their value.
/// Declared variables shadow parameters of the same name.
pub fn parse_with_params(
    text: &str,
    vars: &[String],
    params: &BTreeMap<String, f64>,
) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, vars, params };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [String],
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let mut base = self.atom()?;
        while self.eat(b'^') {
            let n = self.integer_exponent()?;
            base = Expr::Pow(Box::new(base), n);
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32, ExprError> {
        let paren = self.eat(b'(');
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("exponent must be an integer literal"));
        }
        if matches!(self.src.get(self.pos), Some(b'.') | Some(b'e') | Some(b'E')) {
            return Err(self.error("non-integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut n: i32 = digits.parse().map_err(|_| self.error("exponent out of range"))?;
        if negative {
            n = -n;
        }
        if paren && !self.eat(b')') {
            return Err(self.error("expected `)` after exponent"));
        }
        Ok(n)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        // Exponent part only when followed by digits, so `2e` stays an error
        // rather than silently eating a variable named `e`.
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mut look = self.pos + 1;
            if matches!(self.src.get(look), Some(b'+') | Some(b'-')) {
                look += 1;
            }
            if self.src.get(look).is_some_and(|c| c.is_ascii_digit()) {
                self.pos = look;
                digits(self);
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ExprError::Syntax { offset: start, message: format!("bad number `{text}`") })
    }

    fn identifier(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if let Some(func) = Func::from_name(name) {
            if self.peek() == Some(b'(') {
                self.pos += 1;
                let arg = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)` after function argument"));
                }
                return Ok(Expr::Func(func, Box::new(arg)));
            }
        }
        if let Some(i) = self.vars.iter().position(|v| v == name) {
            return Ok(Expr::Var(i));
        }
        if let Some(&value) = self.params.get(name) {
            return Ok(Expr::Const(value));
        }
        Err(ExprError::UnknownVariable(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn product_evaluates() {
        let vars = names(&["x", "y", "z"]);
        let e = parse("x*z", &vars).unwrap();
        assert_eq!(e.eval_point(&[2.0, 0.0, 3.0]).unwrap(), 6.0);
    }

    #[test]
    fn integer_power_node() {
        let vars = names(&["x", "y", "z"]);
        let e = parse("z^2", &vars).unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::Var(2)), 2));
    }

    #[test]
    fn unknown_variable() {
        let vars = names(&["x", "y"]);
        assert_eq!(parse("x*w", &vars), Err(ExprError::UnknownVariable("w".into())));
    }

    #[test]
    fn non_integer_power_rejected() {
        let vars = names(&["x"]);
        assert!(matches!(parse("x^2.5", &vars), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x^x", &vars), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn syntax_error_reports_offset() {
        let vars = names(&["x"]);
        match parse("x + * 2", &vars) {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        let vars = names(&["x"]);
        let e = parse("-x^2", &vars).unwrap();
        assert_eq!(e.eval_point(&[3.0]).unwrap(), -9.0);
        let e = parse("x^-1", &vars).unwrap();
        assert_eq!(e.eval_point(&[4.0]).unwrap(), 0.25);
    }

    #[test]
    fn eval_examples() {
        let vars = names(&["x", "y"]);
        assert_eq!(parse("-y", &vars).unwrap().eval_point(&[1.0, 2.0]).unwrap(), -2.0);
        let mut params = BTreeMap::new();
        params.insert("r".to_string(), 1.0);
        let disk = parse_with_params("(x^2 + y^2 - r^2)/2", &vars, &params).unwrap();
        assert_eq!(disk.eval_point(&[1.0, 0.0]).unwrap(), 0.0);
        let ln = parse("ln(x)", &names(&["x"])).unwrap();
        assert!(matches!(ln.eval_point(&[-1.0]), Err(ExprError::Domain(_))));
        let div = parse("1/x", &names(&["x"])).unwrap();
        assert!(matches!(div.eval_point(&[0.0]), Err(ExprError::Domain(_))));
    }

    #[test]
    fn partial_examples() {
        let vars = names(&["x", "y", "z"]);
        let xz = parse("x*z", &vars).unwrap();
        assert_eq!(xz.symbolic_partial(0), Expr::Var(2));
        let z2 = parse("z^2", &vars).unwrap();
        let dz = z2.symbolic_partial(2);
        assert_eq!(dz, Expr::mul(Expr::Const(2.0), Expr::Var(2)));
        assert_eq!(dz.display(&vars).to_string(), "(2 * z)");
        let s = parse("sin(x)", &vars).unwrap();
        assert!(s.symbolic_partial(1).is_zero());
    }

    #[test]
    fn whitespace_insensitive() {
        let vars = names(&["x", "y"]);
        assert_eq!(parse("x*y+1", &vars).unwrap(), parse("  x *  y\t+ 1 ", &vars).unwrap());
    }

    #[test]
    fn scientific_literals() {
        let vars = names(&["x", "e"]);
        assert_eq!(parse("1e-3", &vars).unwrap(), Expr::Const(1e-3));
        assert_eq!(parse("2*e", &vars).unwrap().eval_point(&[0.0, 3.0]).unwrap(), 6.0);
    }
}
