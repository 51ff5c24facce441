//! Coefficient mini-language.
//!
//! Expressions are polynomials in `t, x, y, z` (`x1, x2, x3` are accepted as
//! aliases) combined with Heaviside factors `H(·)` and explicit
//! `piecewise { cond : expr; ... }` blocks whose conditions are axis-aligned
//! bounds such as `-1 <= x < 0 and t >= 0.5`. Smooth closed-form data may
//! also use `sin`, `cos`, `exp`, `sqrt` and `pi`.
//!
//! A piecewise-polynomial expression is lowered to a [`PiecewiseExpr`]: the
//! box is cut into cells along every breakpoint and each cell carries one
//! polynomial of total degree at most [`MAX_DEGREE`].

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Number of variable slots: `t` and up to three spatial coordinates.
pub const MAX_VARS: usize = 4;
pub const MAX_DEGREE: u32 = 6;

const VAR_NAMES: [&str; MAX_VARS] = ["t", "x", "y", "z"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Heaviside,
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Heaviside => "H",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "H" => Func::Heaviside,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Heaviside => {
                if v >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

/// One-variable interval constraint. `None` means unbounded on that side;
/// the flag marks an inclusive end.
#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    pub var: usize,
    pub lower: Option<(f64, bool)>,
    pub upper: Option<(f64, bool)>,
}

impl Bound {
    fn contains(&self, v: f64) -> bool {
        let lo_ok = match self.lower {
            None => true,
            Some((b, true)) => v >= b,
            Some((b, false)) => v > b,
        };
        let hi_ok = match self.upper {
            None => true,
            Some((b, true)) => v <= b,
            Some((b, false)) => v < b,
        };
        lo_ok && hi_ok
    }

    fn contains_interior(&self, v: f64) -> bool {
        self.lower.is_none_or(|(b, _)| v > b) && self.upper.is_none_or(|(b, _)| v < b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub bounds: Vec<Bound>,
    pub value: Expr,
}

impl Case {
    fn contains(&self, p: &[f64; MAX_VARS]) -> bool {
        self.bounds.iter().all(|b| b.contains(p[b.var]))
    }

    fn contains_interior(&self, p: &[f64; MAX_VARS]) -> bool {
        self.bounds.iter().all(|b| b.contains_interior(p[b.var]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
    Piecewise(Vec<Case>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if let Some(tok) = p.peek() {
            return Err(expr_err(tok.col, format!("unexpected '{}'", tok.kind)));
        }
        Ok(e)
    }

    /// True when no Heaviside factor or piecewise block occurs.
    pub fn is_smooth(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_smooth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_smooth() && b.is_smooth()
            }
            Expr::Call(Func::Heaviside, _) | Expr::Piecewise(_) => false,
            Expr::Call(_, a) => a.is_smooth(),
        }
    }

    /// Highest variable slot referenced (0 = only `t` or constants).
    pub fn max_var(&self) -> Option<usize> {
        let mut best = None;
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                best = Some(best.map_or(*v, |b: usize| b.max(*v)));
            }
            if let Expr::Piecewise(cases) = e {
                for b in cases.iter().flat_map(|c| &c.bounds) {
                    best = Some(best.map_or(b.var, |m: usize| m.max(b.var)));
                }
            }
        });
        best
    }

    pub fn uses_var(&self, var: usize) -> bool {
        let mut used = false;
        self.visit(&mut |e| match e {
            Expr::Var(v) if *v == var => used = true,
            Expr::Piecewise(cases) if cases.iter().flat_map(|c| &c.bounds).any(|b| b.var == var) => {
                used = true
            }
            _ => {}
        });
        used
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Piecewise(cases) => {
                for c in cases {
                    c.value.visit(f);
                }
            }
        }
    }

    /// Direct pointwise evaluation; `p = [t, x, y, z]`.
    pub fn eval(&self, p: &[f64; MAX_VARS]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => p[*i],
            Expr::Neg(a) => -a.eval(p),
            Expr::Add(a, b) => a.eval(p) + b.eval(p),
            Expr::Sub(a, b) => a.eval(p) - b.eval(p),
            Expr::Mul(a, b) => a.eval(p) * b.eval(p),
            Expr::Div(a, b) => a.eval(p) / b.eval(p),
            Expr::Pow(a, k) => a.eval(p).powi(*k as i32),
            Expr::Call(f, a) => f.apply(a.eval(p)),
            Expr::Piecewise(cases) => cases
                .iter()
                .find(|c| c.contains(p))
                .map_or(f64::NAN, |c| c.value.eval(p)),
        }
    }

    /// Lowers to a polynomial. Heaviside factors and piecewise blocks are
    /// resolved at `at`, an interior point of a cell; without `at` they are
    /// rejected.
    pub fn to_poly(&self, at: Option<&[f64; MAX_VARS]>) -> std::result::Result<Poly, String> {
        Ok(match self {
            Expr::Num(v) => Poly::constant(*v),
            Expr::Var(i) => Poly::var(*i),
            Expr::Neg(a) => a.to_poly(at)?.scale(-1.0),
            Expr::Add(a, b) => a.to_poly(at)?.add(&b.to_poly(at)?),
            Expr::Sub(a, b) => a.to_poly(at)?.add(&b.to_poly(at)?.scale(-1.0)),
            Expr::Mul(a, b) => a.to_poly(at)?.mul(&b.to_poly(at)?),
            Expr::Div(a, b) => {
                let d = b.to_poly(at)?;
                match d.as_constant() {
                    Some(c) if c != 0.0 => a.to_poly(at)?.scale(1.0 / c),
                    Some(_) => return Err("division by zero".into()),
                    None => return Err("division by a non-constant expression".into()),
                }
            }
            Expr::Pow(a, k) => a.to_poly(at)?.pow(*k),
            Expr::Call(Func::Heaviside, a) => {
                let arg = a.to_poly(None)?;
                let p = at.ok_or("Heaviside factor in a polynomial context")?;
                Poly::constant(Func::Heaviside.apply(arg.eval(p)))
            }
            Expr::Call(f, a) => {
                let arg = a.to_poly(at)?;
                match arg.as_constant() {
                    Some(c) => Poly::constant(f.apply(c)),
                    None => return Err(format!("{}() of a non-constant argument is not polynomial", f.name())),
                }
            }
            Expr::Piecewise(cases) => {
                let p = at.ok_or("piecewise block in a polynomial context")?;
                let case = cases
                    .iter()
                    .find(|c| c.contains_interior(p))
                    .ok_or("no piecewise case covers this cell")?;
                case.value.to_poly(at)?
            }
        })
    }

    /// Breakpoints `(var, value)` contributed by Heaviside arguments and
    /// piecewise bounds.
    pub(crate) fn breakpoints(&self, out: &mut Vec<(usize, f64)>) -> std::result::Result<(), String> {
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) => a.breakpoints(out)?,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.breakpoints(out)?;
                b.breakpoints(out)?;
            }
            Expr::Call(Func::Heaviside, a) => {
                let arg = a.to_poly(None).map_err(|e| format!("H argument: {e}"))?;
                out.push(arg.affine_root().ok_or("H argument must be affine in a single variable")?);
            }
            Expr::Call(_, a) => a.breakpoints(out)?,
            Expr::Piecewise(cases) => {
                for c in cases {
                    for b in &c.bounds {
                        if let Some((v, _)) = b.lower {
                            out.push((b.var, v));
                        }
                        if let Some((v, _)) = b.upper {
                            out.push((b.var, v));
                        }
                    }
                    c.value.breakpoints(out)?;
                }
            }
        }
        Ok(())
    }

    fn piecewise_blocks<'a>(&'a self, out: &mut Vec<&'a [Case]>) {
        self.visit(&mut |e| {
            if let Expr::Piecewise(cases) = e {
                out.push(cases.as_slice());
            }
        });
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "{}", VAR_NAMES[*i]),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_child(f, 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let (op, p) = match self {
                    Expr::Add(..) => ("+", 1),
                    Expr::Sub(..) => ("-", 1),
                    Expr::Mul(..) => ("*", 2),
                    _ => ("/", 2),
                };
                a.write_child(f, p)?;
                write!(f, " {op} ")?;
                b.write_child(f, p + 1)
            }
            Expr::Pow(a, k) => {
                a.write_child(f, 5)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Piecewise(cases) => {
                write!(f, "piecewise {{ ")?;
                for (i, c) in cases.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    for (j, b) in c.bounds.iter().enumerate() {
                        if j > 0 {
                            write!(f, " and ")?;
                        }
                        write_bound(f, b)?;
                    }
                    write!(f, " : {}", c.value)?;
                }
                write!(f, " }}")
            }
        }
    }
}

fn write_bound(f: &mut fmt::Formatter<'_>, b: &Bound) -> fmt::Result {
    let name = VAR_NAMES[b.var];
    match (b.lower, b.upper) {
        (Some((lo, li)), Some((hi, hi_inc))) => write!(
            f,
            "{lo:?} {} {name} {} {hi:?}",
            if li { "<=" } else { "<" },
            if hi_inc { "<=" } else { "<" }
        ),
        (Some((lo, li)), None) => write!(f, "{name} {} {lo:?}", if li { ">=" } else { ">" }),
        (None, Some((hi, hi_inc))) => write!(f, "{name} {} {hi:?}", if hi_inc { "<=" } else { "<" }),
        (None, None) => write!(f, "{name} > -inf"),
    }
}

fn expr_err(column: usize, message: impl Into<String>) -> Error {
    Error::Expr {
        column,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Sym(&'static str),
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "{v}"),
            TokKind::Ident(s) => write!(f, "{s}"),
            TokKind::Sym(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| expr_err(col, format!("malformed number '{text}'")))?;
            out.push(Token {
                kind: TokKind::Num(v),
                col,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(chars[start..i].iter().collect()),
                col,
            });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = match two.as_str() {
            "<=" => Some("<="),
            ">=" => Some(">="),
            "&&" => Some("and"),
            _ => None,
        };
        if let Some(s) = sym {
            out.push(Token {
                kind: if s == "and" {
                    TokKind::Ident("and".into())
                } else {
                    TokKind::Sym(s)
                },
                col,
            });
            i += 2;
            continue;
        }
        let s = match c {
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '/' => "/",
            '^' => "^",
            '(' => "(",
            ')' => ")",
            '{' => "{",
            '}' => "}",
            ':' => ":",
            ';' => ";",
            '<' => "<",
            '>' => ">",
            _ => return Err(expr_err(col, format!("unexpected character '{c}'"))),
        };
        out.push(Token {
            kind: TokKind::Sym(s),
            col,
        });
        i += 1;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

fn var_index(name: &str) -> Option<usize> {
    Some(match name {
        "t" => 0,
        "x" | "x1" => 1,
        "y" | "x2" => 2,
        "z" | "x3" => 3,
        _ => return None,
    })
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn end_col(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.col + 1)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Token { kind: TokKind::Sym(x), .. }) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            return Ok(());
        }
        match self.peek() {
            Some(t) => Err(expr_err(t.col, format!("expected '{s}', found '{}'", t.kind))),
            None => Err(expr_err(self.end_col(), format!("expected '{s}' at end of input"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_sym("+") {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_sym("-") {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_sym("*") {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_sym("/") {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_sym("-") {
            return Ok(match self.unary()? {
                Expr::Num(v) if !v.is_sign_negative() => Expr::Num(-v),
                e => Expr::Neg(Box::new(e)),
            });
        }
        if self.eat_sym("+") {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_sym("^") {
            let tok = self
                .next()
                .ok_or_else(|| expr_err(self.end_col(), "missing exponent"))?;
            match tok.kind {
                TokKind::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= 64.0 => {
                    return Ok(Expr::Pow(Box::new(base), v as u32));
                }
                _ => return Err(expr_err(tok.col, "exponent must be a non-negative integer literal")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .next()
            .ok_or_else(|| expr_err(self.end_col(), "unexpected end of expression"))?;
        match tok.kind {
            TokKind::Num(v) => Ok(Expr::Num(v)),
            TokKind::Sym("(") => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            TokKind::Ident(name) => {
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                if name == "piecewise" {
                    return self.piecewise(tok.col);
                }
                if let Some(v) = var_index(&name) {
                    return Ok(Expr::Var(v));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.expect_sym("(")?;
                    let arg = self.expr()?;
                    self.expect_sym(")")?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Err(expr_err(tok.col, format!("unknown identifier '{name}'")))
            }
            other => Err(expr_err(tok.col, format!("unexpected '{other}'"))),
        }
    }

    fn piecewise(&mut self, col: usize) -> Result<Expr> {
        self.expect_sym("{")?;
        let mut cases = Vec::new();
        loop {
            if self.eat_sym("}") {
                break;
            }
            let bounds = self.condition()?;
            self.expect_sym(":")?;
            let value = self.expr()?;
            cases.push(Case { bounds, value });
            if self.eat_sym(";") {
                continue;
            }
            self.expect_sym("}")?;
            break;
        }
        if cases.is_empty() {
            return Err(expr_err(col, "empty piecewise block"));
        }
        Ok(Expr::Piecewise(cases))
    }

    fn condition(&mut self) -> Result<Vec<Bound>> {
        let mut bounds: Vec<Bound> = Vec::new();
        loop {
            let b = self.chain()?;
            match bounds.iter_mut().find(|x| x.var == b.var) {
                Some(existing) => {
                    if b.lower.is_some() {
                        existing.lower = b.lower;
                    }
                    if b.upper.is_some() {
                        existing.upper = b.upper;
                    }
                }
                None => bounds.push(b),
            }
            if matches!(self.peek(), Some(Token { kind: TokKind::Ident(s), .. }) if s == "and") {
                self.pos += 1;
                continue;
            }
            return Ok(bounds);
        }
    }

    fn operand(&mut self) -> Result<Operand> {
        let neg = self.eat_sym("-");
        let tok = self
            .next()
            .ok_or_else(|| expr_err(self.end_col(), "incomplete condition"))?;
        match tok.kind {
            TokKind::Num(v) => Ok(Operand::Num(if neg { -v } else { v })),
            TokKind::Ident(ref s) if s == "pi" => Ok(Operand::Num(if neg {
                -std::f64::consts::PI
            } else {
                std::f64::consts::PI
            })),
            TokKind::Ident(ref s) if !neg => var_index(s)
                .map(|v| Operand::Var(v, tok.col))
                .ok_or_else(|| expr_err(tok.col, format!("unknown variable '{s}'"))),
            _ => Err(expr_err(tok.col, "condition operands must be numbers or variables")),
        }
    }

    fn cmp(&mut self) -> Option<(bool, bool)> {
        // (is_less, inclusive)
        let r = match self.peek() {
            Some(Token { kind: TokKind::Sym("<"), .. }) => (true, false),
            Some(Token { kind: TokKind::Sym("<="), .. }) => (true, true),
            Some(Token { kind: TokKind::Sym(">"), .. }) => (false, false),
            Some(Token { kind: TokKind::Sym(">="), .. }) => (false, true),
            _ => return None,
        };
        self.pos += 1;
        Some(r)
    }

    fn chain(&mut self) -> Result<Bound> {
        let start_col = self.peek().map_or(self.end_col(), |t| t.col);
        let first = self.operand()?;
        let (less, inc) = self
            .cmp()
            .ok_or_else(|| expr_err(start_col, "expected a comparison"))?;
        let second = self.operand()?;
        let third = match self.cmp() {
            Some(c) => Some((c, self.operand()?)),
            None => None,
        };
        let mut bound = Bound {
            var: 0,
            lower: None,
            upper: None,
        };
        let mut set = |var: usize, value: f64, var_is_left: bool, less: bool, inc: bool| {
            bound.var = var;
            // var < value  or  value < var
            if var_is_left == less {
                bound.upper = Some((value, inc));
            } else {
                bound.lower = Some((value, inc));
            }
        };
        match (first, second, third) {
            (Operand::Var(v, _), Operand::Num(n), None) => set(v, n, true, less, inc),
            (Operand::Num(n), Operand::Var(v, _), None) => set(v, n, false, less, inc),
            (Operand::Num(a), Operand::Var(v, _), Some(((less2, inc2), Operand::Num(b)))) => {
                if less != less2 {
                    return Err(expr_err(start_col, "mixed comparison directions in a chain"));
                }
                set(v, a, false, less, inc);
                set(v, b, true, less2, inc2);
            }
            _ => return Err(expr_err(start_col, "conditions compare one variable against numbers")),
        }
        Ok(bound)
    }
}

enum Operand {
    Num(f64),
    Var(usize, #[allow(dead_code)] usize),
}

// ---------------------------------------------------------------------------
// Polynomials

/// Multivariate polynomial in `[t, x, y, z]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<[u8; MAX_VARS], f64>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert([0; MAX_VARS], c);
        }
        Poly { terms }
    }

    pub fn var(i: usize) -> Self {
        let mut e = [0; MAX_VARS];
        e[i] = 1;
        Poly {
            terms: BTreeMap::from([(e, 1.0)]),
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&k| k as u32).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&[0; MAX_VARS]).copied(),
            _ => None,
        }
    }

    pub fn depends_on(&self, var: usize) -> bool {
        self.terms.keys().any(|e| e[var] > 0)
    }

    pub fn eval(&self, p: &[f64; MAX_VARS]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut v = *c;
                for (k, &ek) in e.iter().enumerate() {
                    if ek > 0 {
                        v *= p[k].powi(ek as i32);
                    }
                }
                v
            })
            .sum()
    }

    pub fn scale(mut self, s: f64) -> Self {
        for c in self.terms.values_mut() {
            *c *= s;
        }
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    pub fn add(mut self, other: &Poly) -> Self {
        for (e, c) in &other.terms {
            *self.terms.entry(*e).or_insert(0.0) += c;
        }
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    pub fn mul(&self, other: &Poly) -> Self {
        let mut out = Poly::default();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let mut e = [0u8; MAX_VARS];
                for k in 0..MAX_VARS {
                    e[k] = ea[k].saturating_add(eb[k]);
                }
                *out.terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Poly::constant(1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Root `(var, value)` of an affine polynomial in a single variable.
    fn affine_root(&self) -> Option<(usize, f64)> {
        if self.degree() != 1 {
            return None;
        }
        let mut var = None;
        let mut slope = 0.0;
        for (e, c) in &self.terms {
            if let Some(k) = e.iter().position(|&x| x == 1) {
                if var.is_some() {
                    return None;
                }
                var = Some(k);
                slope = *c;
            }
        }
        let offset = self.terms.get(&[0; MAX_VARS]).copied().unwrap_or(0.0);
        var.map(|v| (v, -offset / slope))
    }
}

// ---------------------------------------------------------------------------
// Piecewise polynomial fields

/// Axis-aligned box over the variable slots `[t, x, y, z]`; unused spatial
/// slots are collapsed to `[0, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeBox {
    pub lower: [f64; MAX_VARS],
    pub upper: [f64; MAX_VARS],
}

impl SpaceTimeBox {
    pub fn new(horizon: f64, lower: &[f64], upper: &[f64]) -> Self {
        let mut lo = [0.0; MAX_VARS];
        let mut hi = [0.0; MAX_VARS];
        hi[0] = horizon;
        for (k, (&l, &u)) in lower.iter().zip(upper).enumerate() {
            lo[k + 1] = l;
            hi[k + 1] = u;
        }
        SpaceTimeBox { lower: lo, upper: hi }
    }

    fn clamp(&self, p: &[f64; MAX_VARS]) -> [f64; MAX_VARS] {
        let mut q = *p;
        for k in 0..MAX_VARS {
            q[k] = q[k].clamp(self.lower[k], self.upper[k]);
        }
        q
    }
}

/// A region given by its box and the polynomial valid on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lower: [f64; MAX_VARS],
    pub upper: [f64; MAX_VARS],
    pub poly: Poly,
}

/// Piecewise-polynomial field on a space-time box, constant-extended
/// beyond its faces.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExpr {
    dim: usize,
    domain: SpaceTimeBox,
    /// Cell edges per slot, including the box faces.
    edges: Vec<Vec<f64>>,
    /// Cell polynomials in row-major order over the slots.
    cells: Vec<Poly>,
}

impl PiecewiseExpr {
    /// Lowers an expression onto `domain`. Explicit piecewise blocks must
    /// partition the box.
    pub fn from_expr(expr: &Expr, dim: usize, domain: SpaceTimeBox) -> Result<Self> {
        check_dim(expr, dim)?;
        let mut blocks = Vec::new();
        expr.piecewise_blocks(&mut blocks);
        for cases in blocks {
            let boxes: Vec<Vec<Bound>> = cases.iter().map(|c| c.bounds.clone()).collect();
            check_partition(&boxes, &domain)?;
        }
        let mut pts = Vec::new();
        expr.breakpoints(&mut pts)
            .map_err(|m| expr_err(1, m))?;
        let edges = build_edges(&domain, pts.into_iter());
        let mut cells = Vec::new();
        for mid in cell_midpoints(&edges) {
            let poly = expr.to_poly(Some(&mid)).map_err(|m| expr_err(1, m))?;
            if poly.degree() > MAX_DEGREE {
                return Err(expr_err(
                    1,
                    format!("polynomial degree {} exceeds {MAX_DEGREE}", poly.degree()),
                ));
            }
            cells.push(poly);
        }
        Ok(PiecewiseExpr {
            dim,
            domain,
            edges,
            cells,
        })
    }

    /// Builds from explicit regions, which must partition `domain`.
    pub fn from_regions(dim: usize, domain: SpaceTimeBox, regions: Vec<Region>) -> Result<Self> {
        let boxes: Vec<Vec<Bound>> = regions
            .iter()
            .map(|r| {
                (0..MAX_VARS)
                    .filter(|&k| r.lower[k].is_finite() || r.upper[k].is_finite())
                    .filter(|&k| domain.upper[k] > domain.lower[k])
                    .map(|k| Bound {
                        var: k,
                        lower: r.lower[k].is_finite().then_some((r.lower[k], true)),
                        upper: r.upper[k].is_finite().then_some((r.upper[k], false)),
                    })
                    .collect()
            })
            .collect();
        check_partition(&boxes, &domain)?;
        let pts = regions.iter().flat_map(|r| {
            (0..MAX_VARS).flat_map(move |k| [(k, r.lower[k]), (k, r.upper[k])])
        });
        let edges = build_edges(&domain, pts.filter(|(_, v)| v.is_finite()));
        let mut cells = Vec::new();
        for mid in cell_midpoints(&edges) {
            let region = regions
                .iter()
                .find(|r| (0..MAX_VARS).all(|k| {
                    domain.upper[k] <= domain.lower[k] || (mid[k] > r.lower[k] && mid[k] < r.upper[k])
                }))
                .ok_or_else(|| Error::Gap(mid.to_vec()))?;
            if region.poly.degree() > MAX_DEGREE {
                return Err(expr_err(1, "polynomial degree exceeds 6"));
            }
            cells.push(region.poly.clone());
        }
        Ok(PiecewiseExpr {
            dim,
            domain,
            edges,
            cells,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &SpaceTimeBox {
        &self.domain
    }

    pub fn num_regions(&self) -> usize {
        self.cells.len()
    }

    /// Cell edges along slot `k` (0 = t), box faces included.
    pub fn breakpoints(&self, k: usize) -> &[f64] {
        &self.edges[k]
    }

    pub fn is_time_dependent(&self) -> bool {
        self.edges[0].len() > 2 || self.cells.iter().any(|p| p.depends_on(0))
    }

    pub fn max_degree(&self) -> u32 {
        self.cells.iter().map(Poly::degree).max().unwrap_or(0)
    }

    fn cell_index(&self, q: &[f64; MAX_VARS]) -> usize {
        let mut idx = 0;
        for k in 0..MAX_VARS {
            let e = &self.edges[k];
            let ncell = e.len().saturating_sub(1).max(1);
            let i = if e.len() < 2 {
                0
            } else {
                // half-open cells [e_i, e_{i+1}), last one closed
                let pos = e.partition_point(|&b| b <= q[k]);
                pos.saturating_sub(1).min(ncell - 1)
            };
            idx = idx * ncell + i;
        }
        idx
    }

    /// Polynomial of the cell containing `p` (after clamping to the box).
    pub fn poly_at(&self, p: &[f64; MAX_VARS]) -> &Poly {
        &self.cells[self.cell_index(&self.domain.clamp(p))]
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let p = pack(t, x);
        let q = self.domain.clamp(&p);
        self.cells[self.cell_index(&q)].eval(&q)
    }

    pub fn eval_packed(&self, p: &[f64; MAX_VARS]) -> f64 {
        let q = self.domain.clamp(p);
        self.cells[self.cell_index(&q)].eval(&q)
    }

    pub fn clamp(&self, p: &[f64; MAX_VARS]) -> [f64; MAX_VARS] {
        self.domain.clamp(p)
    }
}

pub fn pack(t: f64, x: &[f64]) -> [f64; MAX_VARS] {
    let mut p = [0.0; MAX_VARS];
    p[0] = t;
    for (k, v) in x.iter().take(MAX_VARS - 1).enumerate() {
        p[k + 1] = *v;
    }
    p
}

fn check_dim(expr: &Expr, dim: usize) -> Result<()> {
    if let Some(v) = expr.max_var() {
        if v > dim {
            return Err(expr_err(
                1,
                format!("variable '{}' used in a {dim}-dimensional problem", VAR_NAMES[v]),
            ));
        }
    }
    Ok(())
}

fn build_edges(domain: &SpaceTimeBox, pts: impl Iterator<Item = (usize, f64)>) -> Vec<Vec<f64>> {
    let mut edges: Vec<Vec<f64>> = (0..MAX_VARS)
        .map(|k| {
            if domain.upper[k] > domain.lower[k] {
                vec![domain.lower[k], domain.upper[k]]
            } else {
                vec![domain.lower[k]]
            }
        })
        .collect();
    for (k, v) in pts {
        if v > domain.lower[k] && v < domain.upper[k] {
            edges[k].push(v);
        }
    }
    for e in &mut edges {
        e.sort_by(f64::total_cmp);
        e.dedup();
    }
    edges
}

fn cell_midpoints(edges: &[Vec<f64>]) -> Vec<[f64; MAX_VARS]> {
    let mids: Vec<Vec<f64>> = edges
        .iter()
        .map(|e| {
            if e.len() < 2 {
                vec![e[0]]
            } else {
                e.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            }
        })
        .collect();
    let mut out = vec![[0.0; MAX_VARS]];
    for (k, m) in mids.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * m.len());
        for p in &out {
            for &v in m {
                let mut q = *p;
                q[k] = v;
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Checks that the boxes described by `cases` cover `domain` without gaps
/// and overlap only on faces. Region ids in errors are 1-based.
pub fn check_partition(cases: &[Vec<Bound>], domain: &SpaceTimeBox) -> Result<()> {
    let pts = cases.iter().flatten().flat_map(|b| {
        b.lower
            .map(|(v, _)| (b.var, v))
            .into_iter()
            .chain(b.upper.map(|(v, _)| (b.var, v)))
    });
    let edges = build_edges(domain, pts);
    for mid in cell_midpoints(&edges) {
        let hits: Vec<usize> = cases
            .iter()
            .enumerate()
            .filter(|(_, bounds)| bounds.iter().all(|b| b.contains_interior(mid[b.var])))
            .map(|(i, _)| i + 1)
            .collect();
        match hits.as_slice() {
            [] => return Err(Error::Gap(mid.to_vec())),
            [_] => {}
            [a, b, ..] => {
                return Err(Error::Overlap {
                    first: *a,
                    second: *b,
                })
            }
        }
    }
    Ok(())
}
