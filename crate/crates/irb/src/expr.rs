//! Expression mini-language in the variables `t` and `x`.
//!
//! Grammar (standard precedence: `^` binds tightest and is right-associative,
//! then unary minus, then `*` `/`, then `+` `-`):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-" factor | power
//! power  := atom ("^" factor)?
//! atom   := number | "t" | "x" | "pi" | ident "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Numbers are decimal with optional fraction and exponent. Evaluation is
//! total: every failure (square root of a negative, log of a non-positive,
//! division by zero, negative base to a non-integer power, overflow to a
//! non-finite value) is reported as a [`DomainError`], never a trap or a NaN.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Built-in functions. Comparison builtins return exactly 0.0 or 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Floor,
    Abs,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Min,
    Max,
    Ge,
    Gt,
    Le,
    Lt,
    Clamp,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Floor => "floor",
            Builtin::Abs => "abs",
            Builtin::Sqrt => "sqrt",
            Builtin::Exp => "exp",
            Builtin::Ln => "ln",
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Ge => "ge",
            Builtin::Gt => "gt",
            Builtin::Le => "le",
            Builtin::Lt => "lt",
            Builtin::Clamp => "clamp",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Floor
            | Builtin::Abs
            | Builtin::Sqrt
            | Builtin::Exp
            | Builtin::Ln
            | Builtin::Sin
            | Builtin::Cos => 1,
            Builtin::Min | Builtin::Max | Builtin::Ge | Builtin::Gt | Builtin::Le | Builtin::Lt => 2,
            Builtin::Clamp => 3,
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "floor" => Builtin::Floor,
            "abs" => Builtin::Abs,
            "sqrt" => Builtin::Sqrt,
            "exp" => Builtin::Exp,
            "ln" => Builtin::Ln,
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            "ge" => Builtin::Ge,
            "gt" => Builtin::Gt,
            "le" => Builtin::Le,
            "lt" => Builtin::Lt,
            "clamp" => Builtin::Clamp,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Number(f64),
    Ident(String),
    Var(Var),
    Op(char),
    LParen,
    RParen,
    Comma,
}

/// One lexeme with its byte offset in the source. Concatenating the lexemes
/// of a token stream (ignoring whitespace) reproduces the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("lex error at offset {offset}: unexpected character {ch:?}")]
pub struct LexError {
    pub offset: usize,
    pub ch: char,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at offset {offset}: expected {expected}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in `{node}`: {detail}")]
pub struct DomainError {
    /// Pretty-printed offending subexpression.
    pub node: String,
    pub detail: String,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_digit() || c == '.' {
            i += 1;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            if c != '.' && i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
            }
            // exponent only if followed by digits (maximal munch with lookahead)
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j + 1;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lexeme = &src[start..i];
            match lexeme.parse::<f64>() {
                Ok(v) if v.is_finite() => TokenKind::Number(v),
                _ => return Err(LexError { offset: start, ch: c }),
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            i += 1;
            while i < bytes.len() {
                let d = bytes[i] as char;
                if d.is_ascii_alphanumeric() || d == '_' {
                    i += 1;
                } else {
                    break;
                }
            }
            match &src[start..i] {
                "t" => TokenKind::Var(Var::T),
                "x" => TokenKind::Var(Var::X),
                name => TokenKind::Ident(name.to_string()),
            }
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                ',' => TokenKind::Comma,
                _ => return Err(LexError { offset: start, ch: c }),
            }
        };
        tokens.push(Token {
            kind,
            lexeme: src[start..i].to_string(),
            pos: start,
        });
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map(|t| t.pos).unwrap_or(self.src_len)
    }

    fn err(&self, expected: &str) -> ParseError {
        ParseError {
            offset: self.offset(),
            expected: expected.to_string(),
        }
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        if let Some(Token { kind: TokenKind::Op(c), .. }) = self.peek() {
            if ops.contains(c) {
                let c = *c;
                self.pos += 1;
                return Some(c);
            }
        }
        None
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let bin = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(bin, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.factor()?;
            let bin = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(bin, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // unary minus sits below `^`: -x^2 parses as -(x^2)
    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exp = self.factor()?; // right-associative, exponent may be signed
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.err("an operand")),
        };
        match tok.kind {
            TokenKind::Number(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            TokenKind::Var(v) => {
                self.pos += 1;
                Ok(Expr::Var(v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Token { kind: TokenKind::RParen, .. }) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(self.err("`)`")),
                }
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                let builtin = Builtin::from_name(&name).ok_or_else(|| ParseError {
                    offset: tok.pos,
                    expected: format!("a known function or constant, got `{name}`"),
                })?;
                match self.peek() {
                    Some(Token { kind: TokenKind::LParen, .. }) => self.pos += 1,
                    _ => return Err(self.err("`(` after function name")),
                }
                let mut args = vec![self.expr()?];
                while let Some(Token { kind: TokenKind::Comma, .. }) = self.peek() {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                match self.peek() {
                    Some(Token { kind: TokenKind::RParen, .. }) => self.pos += 1,
                    _ => return Err(self.err("`)` or `,`")),
                }
                if args.len() != builtin.arity() {
                    return Err(ParseError {
                        offset: tok.pos,
                        expected: format!(
                            "{} argument(s) for {}, got {}",
                            builtin.arity(),
                            builtin.name(),
                            args.len()
                        ),
                    });
                }
                Ok(Expr::Call(builtin, args))
            }
            _ => Err(self.err("an operand")),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src).map_err(|e| ParseError {
        offset: e.offset,
        expected: format!("a valid token, got {:?}", e.ch),
    })?;
    let mut p = Parser {
        tokens,
        pos: 0,
        src_len: src.len(),
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("end of input"));
    }
    Ok(e)
}

fn domain_err(node: &Expr, detail: String) -> DomainError {
    DomainError {
        node: pretty(node),
        detail,
    }
}

/// Evaluate at (t, x). Bitwise deterministic for identical inputs.
pub fn eval(e: &Expr, t: f64, x: f64) -> Result<f64, DomainError> {
    let v = match e {
        Expr::Const(c) => *c,
        Expr::Var(Var::T) => t,
        Expr::Var(Var::X) => x,
        Expr::Neg(a) => -eval(a, t, x)?,
        Expr::Bin(op, a, b) => {
            let av = eval(a, t, x)?;
            let bv = eval(b, t, x)?;
            match op {
                BinOp::Add => av + bv,
                BinOp::Sub => av - bv,
                BinOp::Mul => av * bv,
                BinOp::Div => {
                    if bv == 0.0 {
                        return Err(domain_err(e, format!("division of {av} by zero")));
                    }
                    av / bv
                }
                BinOp::Pow => {
                    if av < 0.0 && bv.fract() != 0.0 {
                        return Err(domain_err(
                            e,
                            format!("negative base {av} with non-integer exponent {bv}"),
                        ));
                    }
                    if av == 0.0 && bv < 0.0 {
                        return Err(domain_err(e, format!("zero base with negative exponent {bv}")));
                    }
                    av.powf(bv)
                }
            }
        }
        Expr::Call(f, args) => {
            let mut vals = [0.0f64; 3];
            for (i, a) in args.iter().enumerate() {
                vals[i] = eval(a, t, x)?;
            }
            match f {
                Builtin::Floor => vals[0].floor(),
                Builtin::Abs => vals[0].abs(),
                Builtin::Sqrt => {
                    if vals[0] < 0.0 {
                        return Err(domain_err(e, format!("square root of negative {}", vals[0])));
                    }
                    vals[0].sqrt()
                }
                Builtin::Exp => vals[0].exp(),
                Builtin::Ln => {
                    if vals[0] <= 0.0 {
                        return Err(domain_err(e, format!("log of non-positive {}", vals[0])));
                    }
                    vals[0].ln()
                }
                Builtin::Sin => vals[0].sin(),
                Builtin::Cos => vals[0].cos(),
                Builtin::Min => vals[0].min(vals[1]),
                Builtin::Max => vals[0].max(vals[1]),
                Builtin::Ge => {
                    if vals[0] >= vals[1] {
                        1.0
                    } else {
                        0.0
                    }
                }
                Builtin::Gt => {
                    if vals[0] > vals[1] {
                        1.0
                    } else {
                        0.0
                    }
                }
                Builtin::Le => {
                    if vals[0] <= vals[1] {
                        1.0
                    } else {
                        0.0
                    }
                }
                Builtin::Lt => {
                    if vals[0] < vals[1] {
                        1.0
                    } else {
                        0.0
                    }
                }
                Builtin::Clamp => vals[0].max(vals[1]).min(vals[2]),
            }
        }
    };
    if !v.is_finite() {
        return Err(domain_err(e, format!("non-finite result {v}")));
    }
    Ok(v)
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn fmt_prec(e: &Expr, min: u8, out: &mut String) {
    let p = prec(e);
    if p < min {
        out.push('(');
        fmt_inner(e, out);
        out.push(')');
    } else {
        fmt_inner(e, out);
    }
}

fn fmt_inner(e: &Expr, out: &mut String) {
    match e {
        Expr::Const(v) => {
            use fmt::Write;
            write!(out, "{v}").unwrap();
        }
        Expr::Var(Var::T) => out.push('t'),
        Expr::Var(Var::X) => out.push('x'),
        Expr::Neg(a) => {
            out.push('-');
            fmt_prec(a, 3, out);
        }
        Expr::Bin(op, a, b) => match op {
            BinOp::Add | BinOp::Sub => {
                fmt_prec(a, 1, out);
                out.push_str(if *op == BinOp::Add { " + " } else { " - " });
                fmt_prec(b, 2, out); // right operand tighter: a - (b - c) keeps parens
            }
            BinOp::Mul | BinOp::Div => {
                fmt_prec(a, 2, out);
                out.push(if *op == BinOp::Mul { '*' } else { '/' });
                fmt_prec(b, 3, out);
            }
            BinOp::Pow => {
                fmt_prec(a, 5, out);
                out.push('^');
                fmt_prec(b, 3, out); // exponent may be a signed factor
            }
        },
        Expr::Call(f, args) => {
            out.push_str(f.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                fmt_inner(a, out);
            }
            out.push(')');
        }
    }
}

/// Minimal-parenthesis rendering; `parse(pretty(e)) == e` for any `e`
/// produced by [`parse`].
pub fn pretty(e: &Expr) -> String {
    let mut s = String::new();
    fmt_inner(e, &mut s);
    s
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}

pub fn contains_var(e: &Expr, var: Var) -> bool {
    match e {
        Expr::Const(_) => false,
        Expr::Var(v) => *v == var,
        Expr::Neg(a) => contains_var(a, var),
        Expr::Bin(_, a, b) => contains_var(a, var) || contains_var(b, var),
        Expr::Call(_, args) => args.iter().any(|a| contains_var(a, var)),
    }
}

// --- polynomial-form extraction -------------------------------------------
//
// Recognizes expressions that are polynomials of low degree in one variable,
// with coefficients that may still mention the other variable. This is what
// makes affine/quadratic map classification and corner-exact suprema possible.

fn c0() -> Expr {
    Expr::Const(0.0)
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(v) if *v == 0.0)
}

fn add_e(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return b;
    }
    if is_zero(&b) {
        return a;
    }
    if let (Expr::Const(u), Expr::Const(v)) = (&a, &b) {
        return Expr::Const(u + v);
    }
    Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
}

fn mul_e(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        return c0();
    }
    if matches!(&a, Expr::Const(v) if *v == 1.0) {
        return b;
    }
    if matches!(&b, Expr::Const(v) if *v == 1.0) {
        return a;
    }
    if let (Expr::Const(u), Expr::Const(v)) = (&a, &b) {
        return Expr::Const(u * v);
    }
    Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
}

fn neg_e(a: Expr) -> Expr {
    if is_zero(&a) {
        return a;
    }
    if let Expr::Const(v) = &a {
        return Expr::Const(-v);
    }
    Expr::Neg(Box::new(a))
}

/// Coefficients `[c_0, ..., c_d]` of `e` as a polynomial in `var`, each an
/// expression free of `var`, or `None` when `e` is not a polynomial of
/// degree <= `max_deg` in `var`.
pub fn poly_coeffs(e: &Expr, var: Var, max_deg: usize) -> Option<Vec<Expr>> {
    if !contains_var(e, var) {
        return Some(vec![e.clone()]);
    }
    match e {
        Expr::Var(v) if *v == var => Some(vec![c0(), Expr::Const(1.0)]),
        Expr::Neg(a) => {
            let ca = poly_coeffs(a, var, max_deg)?;
            Some(ca.into_iter().map(neg_e).collect())
        }
        Expr::Bin(BinOp::Add, a, b) | Expr::Bin(BinOp::Sub, a, b) => {
            let sub = matches!(e, Expr::Bin(BinOp::Sub, ..));
            let ca = poly_coeffs(a, var, max_deg)?;
            let cb = poly_coeffs(b, var, max_deg)?;
            let n = ca.len().max(cb.len());
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let av = ca.get(i).cloned().unwrap_or_else(c0);
                let bv = cb.get(i).cloned().unwrap_or_else(c0);
                out.push(add_e(av, if sub { neg_e(bv) } else { bv }));
            }
            Some(out)
        }
        Expr::Bin(BinOp::Mul, a, b) => {
            let ca = poly_coeffs(a, var, max_deg)?;
            let cb = poly_coeffs(b, var, max_deg)?;
            if ca.len() + cb.len() - 2 > max_deg {
                return None;
            }
            let mut out = vec![c0(); ca.len() + cb.len() - 1];
            for (i, ai) in ca.iter().enumerate() {
                for (j, bj) in cb.iter().enumerate() {
                    let term = mul_e(ai.clone(), bj.clone());
                    let cur = std::mem::replace(&mut out[i + j], c0());
                    out[i + j] = add_e(cur, term);
                }
            }
            Some(out)
        }
        Expr::Bin(BinOp::Div, a, b) => {
            if contains_var(b, var) {
                return None;
            }
            let ca = poly_coeffs(a, var, max_deg)?;
            Some(
                ca.into_iter()
                    .map(|c| {
                        if is_zero(&c) {
                            c
                        } else {
                            Expr::Bin(BinOp::Div, Box::new(c), Box::new((**b).clone()))
                        }
                    })
                    .collect(),
            )
        }
        Expr::Bin(BinOp::Pow, a, b) => {
            let k = match b.as_ref() {
                Expr::Const(v) if *v >= 0.0 && v.fract() == 0.0 => *v as usize,
                _ => return None,
            };
            let ca = poly_coeffs(a, var, max_deg)?;
            if (ca.len() - 1) * k > max_deg {
                return None;
            }
            let mut acc = vec![Expr::Const(1.0)];
            for _ in 0..k {
                let mut next = vec![c0(); acc.len() + ca.len() - 1];
                for (i, ai) in acc.iter().enumerate() {
                    for (j, bj) in ca.iter().enumerate() {
                        let term = mul_e(ai.clone(), bj.clone());
                        let cur = std::mem::replace(&mut next[i + j], c0());
                        next[i + j] = add_e(cur, term);
                    }
                }
                acc = next;
            }
            Some(acc)
        }
        _ => None,
    }
}

/// Fold an expression with no variables to a number.
pub fn as_const(e: &Expr) -> Option<f64> {
    if contains_var(e, Var::T) || contains_var(e, Var::X) {
        return None;
    }
    eval(e, 0.0, 0.0).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Expr {
        parse(src).unwrap()
    }

    #[test]
    fn tokenize_reproduces_source() {
        let src = "2*x + min(t, 1.5e-3) - .5^2";
        let toks = tokenize(src).unwrap();
        let joined: String = toks.iter().map(|t| t.lexeme.as_str()).collect();
        let stripped: String = src.chars().filter(|c| !c.is_whitespace()).collect();
        assert_eq!(joined, stripped);
        assert_eq!(toks[0].kind, TokenKind::Number(2.0));
        assert_eq!(toks[2].kind, TokenKind::Var(Var::X));
    }

    #[test]
    fn tokenize_rejects_unknown_chars() {
        let err = tokenize("2 % 3").unwrap_err();
        assert_eq!(err.offset, 2);
        assert_eq!(err.ch, '%');
    }

    #[test]
    fn precedence_unary_minus_below_power() {
        // -x^2 == -(x^2)
        assert_eq!(
            p("-x^2"),
            Expr::Neg(Box::new(Expr::Bin(
                BinOp::Pow,
                Box::new(Expr::Var(Var::X)),
                Box::new(Expr::Const(2.0)),
            )))
        );
    }

    #[test]
    fn power_right_associative() {
        // 2^3^2 == 2^(3^2) == 512
        assert_eq!(eval(&p("2^3^2"), 0.0, 0.0).unwrap(), 512.0);
        assert_eq!(eval(&p("(2^3)^2"), 0.0, 0.0).unwrap(), 64.0);
        assert_eq!(eval(&p("2^-1"), 0.0, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn parse_error_positions() {
        let err = parse("x + ").unwrap_err();
        assert_eq!(err.offset, 4);
        let err = parse("min(x)").unwrap_err();
        assert!(err.expected.contains("2 argument"));
        let err = parse("y + 1").unwrap_err();
        assert!(err.expected.contains("`y`"));
        assert!(parse("(x").is_err());
        assert!(parse("x 1").is_err());
    }

    #[test]
    fn eval_basics() {
        assert_eq!(eval(&p("2*x + t"), 3.0, 5.0).unwrap(), 13.0);
        assert_eq!(eval(&p("pi"), 0.0, 0.0).unwrap(), std::f64::consts::PI);
        assert_eq!(eval(&p("floor(2.7)"), 0.0, 0.0).unwrap(), 2.0);
        assert_eq!(eval(&p("clamp(x, 0, 1)"), 0.0, 4.0).unwrap(), 1.0);
        assert_eq!(eval(&p("min(t, x)"), 2.0, -1.0).unwrap(), -1.0);
    }

    #[test]
    fn comparison_builtins_are_exact_indicators() {
        for (src, t, x, want) in [
            ("ge(x, 2 - t)", 1.5, 0.5, 1.0),
            ("ge(x, 2 - t)", 1.5, 0.4999, 0.0),
            ("gt(x, x)", 0.0, 3.0, 0.0),
            ("le(x, 0)", 0.0, 0.0, 1.0),
            ("lt(x, 0)", 0.0, 0.0, 0.0),
        ] {
            let got = eval(&p(src), t, x).unwrap();
            assert!(got == want, "{src} at t={t} x={x}: got {got}");
        }
    }

    #[test]
    fn domain_errors_are_reported_not_trapped() {
        assert!(eval(&p("sqrt(x)"), 0.0, -1.0).is_err());
        assert!(eval(&p("ln(x)"), 0.0, 0.0).is_err());
        assert!(eval(&p("1/x"), 0.0, 0.0).is_err());
        assert!(eval(&p("(-2)^0.5"), 0.0, 0.0).is_err());
        assert!(eval(&p("0^-1"), 0.0, 0.0).is_err());
        assert!(eval(&p("exp(x)"), 0.0, 1e9).is_err()); // overflow is a domain error
        let err = eval(&p("2 + sqrt(x - 1)"), 0.0, 0.0).unwrap_err();
        assert_eq!(err.node, "sqrt(x - 1)");
    }

    #[test]
    fn eval_is_bitwise_repeatable() {
        let e = p("sin(t)*exp(x) - t/3 + x^3");
        let a = eval(&e, 1.234, 0.567).unwrap();
        let b = eval(&e, 1.234, 0.567).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn pretty_round_trips() {
        for src in [
            "2*x + 1",
            "-x^2",
            "x^-2",
            "(x + 1)*(x - 1)",
            "ge(x, 2 - t)",
            "1/2*x*(t - 1)",
            "clamp(2*t - 1, 0, 1)",
            "x - (t - 1)",
            "2^3^2",
            "(2^3)^2",
            "-(x + t)",
            "x/(t*2)",
            "min(max(t, x), 1.25e-2)",
        ] {
            let ast = p(src);
            let printed = pretty(&ast);
            assert_eq!(p(&printed), ast, "round trip failed for {src} -> {printed}");
        }
    }

    #[test]
    fn poly_extraction() {
        // 1 - x^2/2 -> [1, 0, -1/2]
        let coeffs = poly_coeffs(&p("1 - x^2/2"), Var::X, 2).unwrap();
        assert_eq!(coeffs.len(), 3);
        let vals: Vec<f64> = coeffs.iter().map(|c| as_const(c).unwrap()).collect();
        assert_eq!(vals, vec![1.0, 0.0, -0.5]);

        // (1/2)*x*(t-1): linear in x with t-dependent slope
        let coeffs = poly_coeffs(&p("1/2*x*(t - 1)"), Var::X, 2).unwrap();
        assert_eq!(coeffs.len(), 2);
        assert_eq!(eval(&coeffs[1], 3.0, 0.0).unwrap(), 1.0);

        assert!(poly_coeffs(&p("sqrt(x)"), Var::X, 2).is_none());
        assert!(poly_coeffs(&p("x^3"), Var::X, 2).is_none());
        // x-free expressions are degree-0 polynomials in x
        assert_eq!(poly_coeffs(&p("sin(t)"), Var::X, 2).unwrap().len(), 1);
    }
}
