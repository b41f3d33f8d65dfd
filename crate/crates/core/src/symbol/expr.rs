//! Coefficient expressions in the time variable.
//!
//! A [`CoeffExpr`] is a small expression tree over `t` with constants, `|t|^p`,
//! sums, products, integer powers, `sin` and `cos`. Values and time derivatives
//! are computed by truncated Taylor arithmetic, so every derivative is exact up
//! to rounding wherever the tree is classically differentiable.
//!
//! Canonical text grammar:
//!
//! ```text
//! expr   := ['-'] term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('^' number)?
//! base   := number | 't' | 'abs(t)' | 'sin(' expr ')' | 'cos(' expr ')' | '(' expr ')'
//! ```
//!
//! `abs(t)^p` requires `p > 0`; any other base takes a non-negative integer
//! exponent. Subtraction `a - b` is stored as `Sum[a, Product[-1, b]]`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum CoeffExpr {
    Const(f64),
    T,
    /// `|t|^p`, `p > 0`.
    AbsPow(f64),
    Sum(Vec<CoeffExpr>),
    Product(Vec<CoeffExpr>),
    Pow(Box<CoeffExpr>, u32),
    Sin(Box<CoeffExpr>),
    Cos(Box<CoeffExpr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("non-positive exponent {exponent} in abs(t)^p at byte {pos}")]
    NonPositiveAbsExponent { pos: usize, exponent: f64 },
    #[error("derivative of order {order} of |t|^{exponent} is undefined at t = {t}")]
    Singular { t: f64, order: usize, exponent: f64 },
}

/// Which one-sided limit to take at a kink of `|t|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Side {
    /// Two-sided derivative; kinks with `p <= k` are an error.
    #[default]
    Both,
    /// Right derivative (`t -> 0+`); only infinite limits are an error.
    Right,
}

impl CoeffExpr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0, last_base_parenthesized: false };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn constant(c: f64) -> Self {
        CoeffExpr::Const(c)
    }

    pub fn negated(e: CoeffExpr) -> Self {
        CoeffExpr::Product(vec![CoeffExpr::Const(-1.0), e])
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, CoeffExpr::Const(c) if *c == 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            CoeffExpr::Const(c) => *c,
            CoeffExpr::T => t,
            CoeffExpr::AbsPow(p) => t.abs().powf(*p),
            CoeffExpr::Sum(xs) => xs.iter().map(|x| x.eval(t)).sum(),
            CoeffExpr::Product(xs) => xs.iter().map(|x| x.eval(t)).product(),
            CoeffExpr::Pow(b, n) => b.eval(t).powi(*n as i32),
            CoeffExpr::Sin(x) => x.eval(t).sin(),
            CoeffExpr::Cos(x) => x.eval(t).cos(),
        }
    }

    /// Derivatives `[f(t), f'(t), ..., f^(order)(t)]`.
    pub fn derivatives(&self, t: f64, order: usize, side: Side) -> Result<Vec<f64>, ExprError> {
        let taylor = self.taylor(t, order, side)?;
        let mut fact = 1.0;
        Ok(taylor
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c * fact
            })
            .collect())
    }

    /// k-th derivative at `t`.
    pub fn derivative(&self, t: f64, order: usize, side: Side) -> Result<f64, ExprError> {
        Ok(self.derivatives(t, order, side)?[order])
    }

    /// Smallest exponent of a non-smooth `|t|^p` node, if any. Derivatives of
    /// order `>= p` are undefined at `t = 0`.
    pub fn kink_exponent(&self) -> Option<f64> {
        match self {
            CoeffExpr::AbsPow(p) if !is_even_integer(*p) => Some(*p),
            CoeffExpr::Const(_) | CoeffExpr::T | CoeffExpr::AbsPow(_) => None,
            CoeffExpr::Sum(xs) | CoeffExpr::Product(xs) => xs
                .iter()
                .filter_map(|x| x.kink_exponent())
                .reduce(f64::min),
            CoeffExpr::Pow(b, _) | CoeffExpr::Sin(b) | CoeffExpr::Cos(b) => b.kink_exponent(),
        }
    }

    /// Normalized Taylor coefficients `f^(k)(t) / k!` for `k = 0..=order`.
    fn taylor(&self, t: f64, order: usize, side: Side) -> Result<Vec<f64>, ExprError> {
        let n = order + 1;
        Ok(match self {
            CoeffExpr::Const(c) => {
                let mut v = vec![0.0; n];
                v[0] = *c;
                v
            }
            CoeffExpr::T => {
                let mut v = vec![0.0; n];
                v[0] = t;
                if n > 1 {
                    v[1] = 1.0;
                }
                v
            }
            CoeffExpr::AbsPow(p) => abs_pow_taylor(*p, t, order, side)?,
            CoeffExpr::Sum(xs) => {
                let mut acc = vec![0.0; n];
                for x in xs {
                    for (a, b) in acc.iter_mut().zip(x.taylor(t, order, side)?) {
                        *a += b;
                    }
                }
                acc
            }
            CoeffExpr::Product(xs) => {
                let mut acc = vec![0.0; n];
                acc[0] = 1.0;
                for x in xs {
                    acc = mul_series(&acc, &x.taylor(t, order, side)?);
                }
                acc
            }
            CoeffExpr::Pow(b, e) => {
                let base = b.taylor(t, order, side)?;
                let mut acc = vec![0.0; n];
                acc[0] = 1.0;
                let mut sq = base;
                let mut e = *e;
                while e > 0 {
                    if e & 1 == 1 {
                        acc = mul_series(&acc, &sq);
                    }
                    e >>= 1;
                    if e > 0 {
                        sq = mul_series(&sq, &sq);
                    }
                }
                acc
            }
            CoeffExpr::Sin(x) => sin_cos_series(&x.taylor(t, order, side)?).0,
            CoeffExpr::Cos(x) => sin_cos_series(&x.taylor(t, order, side)?).1,
        })
    }
}

fn is_even_integer(p: f64) -> bool {
    p.fract() == 0.0 && (p as i64) % 2 == 0
}

fn mul_series(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum())
        .collect()
}

fn sin_cos_series(u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let mut s = vec![0.0; n];
    let mut c = vec![0.0; n];
    s[0] = u[0].sin();
    c[0] = u[0].cos();
    for k in 1..n {
        let mut ds = 0.0;
        let mut dc = 0.0;
        for j in 1..=k {
            ds += j as f64 * u[j] * c[k - j];
            dc -= j as f64 * u[j] * s[k - j];
        }
        s[k] = ds / k as f64;
        c[k] = dc / k as f64;
    }
    (s, c)
}

/// Generalized binomial coefficient `C(p, k)`.
fn binom(p: f64, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b *= (p - i as f64) / (i + 1) as f64;
    }
    b
}

fn abs_pow_taylor(p: f64, t: f64, order: usize, side: Side) -> Result<Vec<f64>, ExprError> {
    let n = order + 1;
    if is_even_integer(p) {
        // |t|^p == t^p
        return Ok((0..n)
            .map(|k| {
                if (k as f64) <= p {
                    binom(p, k) * t.powi((p as i32) - k as i32)
                } else {
                    0.0
                }
            })
            .collect());
    }
    if t != 0.0 {
        let a = t.abs();
        let sg = t.signum();
        return Ok((0..n)
            .map(|k| binom(p, k) * a.powf(p - k as f64) * sg.powi(k as i32))
            .collect());
    }
    let singular = ExprError::Singular { t, order, exponent: p };
    match side {
        Side::Both => {
            if order >= 1 && (order as f64) >= p {
                return Err(singular);
            }
            Ok(vec![0.0; n])
        }
        Side::Right => {
            let is_int = p.fract() == 0.0;
            if !is_int && (order as f64) > p {
                return Err(singular);
            }
            let mut v = vec![0.0; n];
            if is_int && (p as usize) < n {
                v[p as usize] = 1.0;
            }
            Ok(v)
        }
    }
}

// ---------------------------------------------------------------------------
// printing

fn is_neg(e: &CoeffExpr) -> Option<&CoeffExpr> {
    match e {
        CoeffExpr::Product(xs) if xs.len() == 2 && xs[0] == CoeffExpr::Const(-1.0) => Some(&xs[1]),
        _ => None,
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

impl CoeffExpr {
    // expression context: leading minus allowed
    fn write_expr(&self, out: &mut String) {
        match self {
            CoeffExpr::Sum(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    match (i, is_neg(x)) {
                        (0, Some(inner)) => {
                            out.push('-');
                            inner.write_term(out);
                        }
                        (0, None) => x.write_term(out),
                        (_, Some(inner)) => {
                            out.push_str(" - ");
                            inner.write_term(out);
                        }
                        (_, None) => {
                            out.push_str(" + ");
                            x.write_term(out);
                        }
                    }
                }
            }
            _ => {
                if let Some(inner) = is_neg(self) {
                    out.push('-');
                    inner.write_term(out);
                } else {
                    self.write_term(out);
                }
            }
        }
    }

    fn write_term(&self, out: &mut String) {
        match self {
            CoeffExpr::Sum(_) => self.write_paren(out),
            _ if is_neg(self).is_some() => self.write_paren(out),
            CoeffExpr::Product(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" * ");
                    }
                    x.write_factor(out);
                }
            }
            _ => self.write_factor(out),
        }
    }

    fn write_factor(&self, out: &mut String) {
        match self {
            CoeffExpr::Sum(_) | CoeffExpr::Product(_) => self.write_paren(out),
            CoeffExpr::Pow(b, n) => {
                match **b {
                    CoeffExpr::T | CoeffExpr::Sin(_) | CoeffExpr::Cos(_) => b.write_factor(out),
                    CoeffExpr::Const(c) if c >= 0.0 => b.write_factor(out),
                    _ => b.write_paren(out),
                }
                out.push('^');
                out.push_str(&n.to_string());
            }
            _ => self.write_atom(out),
        }
    }

    fn write_atom(&self, out: &mut String) {
        match self {
            CoeffExpr::Const(c) if *c >= 0.0 => out.push_str(&fmt_num(*c)),
            CoeffExpr::Const(c) => {
                out.push_str("(-");
                out.push_str(&fmt_num(-c));
                out.push(')');
            }
            CoeffExpr::T => out.push('t'),
            CoeffExpr::AbsPow(p) => {
                out.push_str("abs(t)");
                if *p != 1.0 {
                    out.push('^');
                    out.push_str(&fmt_num(*p));
                }
            }
            CoeffExpr::Sin(x) => {
                out.push_str("sin(");
                x.write_expr(out);
                out.push(')');
            }
            CoeffExpr::Cos(x) => {
                out.push_str("cos(");
                x.write_expr(out);
                out.push(')');
            }
            _ => self.write_paren(out),
        }
    }

    fn write_paren(&self, out: &mut String) {
        out.push('(');
        self.write_expr(out);
        out.push(')');
    }
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_expr(&mut s);
        f.write_str(&s)
    }
}

impl std::str::FromStr for CoeffExpr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CoeffExpr::parse(s)
    }
}

// ---------------------------------------------------------------------------
// parsing

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    last_base_parenthesized: bool,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Syntax { pos: self.pos, msg: msg.to_string() }
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

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(kw.as_bytes()) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<CoeffExpr, ExprError> {
        let mut terms = Vec::new();
        if self.eat(b'-') {
            terms.push(CoeffExpr::negated(self.term()?));
        } else {
            terms.push(self.term()?);
        }
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(CoeffExpr::negated(self.term()?));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { CoeffExpr::Sum(terms) })
    }

    fn term(&mut self) -> Result<CoeffExpr, ExprError> {
        let mut factors = vec![self.factor()?];
        while self.eat(b'*') {
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { CoeffExpr::Product(factors) })
    }

    fn factor(&mut self) -> Result<CoeffExpr, ExprError> {
        let base = self.base()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let at = self.pos;
        let e = self.number()?;
        match base {
            CoeffExpr::AbsPow(p) if p == 1.0 && !self.last_base_parenthesized => {
                if e <= 0.0 {
                    return Err(ExprError::NonPositiveAbsExponent { pos: at, exponent: e });
                }
                Ok(CoeffExpr::AbsPow(e))
            }
            b => {
                if e < 0.0 || e.fract() != 0.0 || e > u32::MAX as f64 {
                    return Err(ExprError::Syntax {
                        pos: at,
                        msg: format!("exponent {e} must be a non-negative integer"),
                    });
                }
                Ok(CoeffExpr::Pow(Box::new(b), e as u32))
            }
        }
    }

    fn base(&mut self) -> Result<CoeffExpr, ExprError> {
        self.last_base_parenthesized = false;
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                self.last_base_parenthesized = true;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(CoeffExpr::Const(self.number()?)),
            Some(b't') => {
                self.pos += 1;
                Ok(CoeffExpr::T)
            }
            Some(b'a') => {
                if !self.keyword("abs") {
                    return Err(self.err("unknown identifier"));
                }
                self.expect(b'(')?;
                self.expect(b't')?;
                self.expect(b')')?;
                Ok(CoeffExpr::AbsPow(1.0))
            }
            Some(b's') | Some(b'c') => {
                let is_sin = if self.keyword("sin") {
                    true
                } else if self.keyword("cos") {
                    false
                } else {
                    return Err(self.err("unknown identifier"));
                };
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(if is_sin { CoeffExpr::Sin(Box::new(e)) } else { CoeffExpr::Cos(Box::new(e)) })
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if !text.is_empty() && v.is_finite() => {
                self.pos = i;
                Ok(v)
            }
            _ => Err(self.err("expected a number")),
        }
    }
}
