//! The `(m, n, T, alpha)` problem with its matrix symbols.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::{CoeffExpr, ExprError, Side};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("{field}: {source}")]
    Expr {
        field: String,
        #[source]
        source: ExprError,
    },
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("t = {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
    #[error("xi has dimension {got}, system expects {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("derivative of order {order} requested, coefficients are only C^{max}")]
    OrderTooHigh { order: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    A,
    B,
}

/// `D_t u - A(t, D_x) u - B(t) u = 0` with `A(t, xi) = sum_k A_k(t) xi_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub m: usize,
    pub n: usize,
    pub horizon: f64,
    pub alpha: f64,
    /// `a[i][j][k]` is the coefficient of `xi_k` in `A_ij`.
    pub a: Vec<Vec<Vec<CoeffExpr>>>,
    pub b: Vec<Vec<CoeffExpr>>,
}

/// Serialized form: every coefficient is a canonical expression string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub alpha: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<String>>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<String>>,
}

impl SystemDoc {
    pub fn to_spec(&self) -> Result<SystemSpec, SystemError> {
        let parse = |s: &str, field: String| {
            CoeffExpr::parse(s).map_err(|source| SystemError::Expr { field, source })
        };
        let mut a = Vec::with_capacity(self.a.len());
        for (i, row) in self.a.iter().enumerate() {
            let mut r = Vec::with_capacity(row.len());
            for (j, ks) in row.iter().enumerate() {
                let mut cell = Vec::with_capacity(ks.len());
                for (k, s) in ks.iter().enumerate() {
                    cell.push(parse(s, format!("A[{i}][{j}][{k}]"))?);
                }
                r.push(cell);
            }
            a.push(r);
        }
        let mut b = Vec::with_capacity(self.b.len());
        for (i, row) in self.b.iter().enumerate() {
            let mut r = Vec::with_capacity(row.len());
            for (j, s) in row.iter().enumerate() {
                r.push(parse(s, format!("B[{i}][{j}]"))?);
            }
            b.push(r);
        }
        SystemSpec::new(self.m, self.n, self.horizon, self.alpha, a, b)
    }
}

impl From<&SystemSpec> for SystemDoc {
    fn from(s: &SystemSpec) -> Self {
        SystemDoc {
            m: s.m,
            n: s.n,
            horizon: s.horizon,
            alpha: s.alpha,
            a: s
                .a
                .iter()
                .map(|row| row.iter().map(|ks| ks.iter().map(|e| e.to_string()).collect()).collect())
                .collect(),
            b: s.b.iter().map(|row| row.iter().map(|e| e.to_string()).collect()).collect(),
        }
    }
}

impl SystemSpec {
    pub fn new(
        m: usize,
        n: usize,
        horizon: f64,
        alpha: f64,
        a: Vec<Vec<Vec<CoeffExpr>>>,
        b: Vec<Vec<CoeffExpr>>,
    ) -> Result<Self, SystemError> {
        if m == 0 || n == 0 {
            return Err(SystemError::Invalid("m and n must be at least 1".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(SystemError::Invalid(format!("T = {horizon} must be positive")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(SystemError::Invalid(format!("alpha = {alpha} must lie in (0, 1]")));
        }
        if a.len() != m || a.iter().any(|r| r.len() != m || r.iter().any(|c| c.len() != n)) {
            return Err(SystemError::Invalid(format!("A must be {m}x{m}x{n}")));
        }
        if b.len() != m || b.iter().any(|r| r.len() != m) {
            return Err(SystemError::Invalid(format!("B must be {m}x{m}")));
        }
        Ok(SystemSpec { m, n, horizon, alpha, a, b })
    }

    /// Build from string tables, mostly for tests and builtins.
    pub fn from_strs(
        horizon: f64,
        alpha: f64,
        a: &[&[&[&str]]],
        b: &[&[&str]],
    ) -> Result<Self, SystemError> {
        let m = a.len();
        let n = a.first().and_then(|r| r.first()).map_or(0, |c| c.len());
        SystemDoc {
            m,
            n,
            horizon,
            alpha,
            a: a.iter()
                .map(|r| r.iter().map(|c| c.iter().map(|s| s.to_string()).collect()).collect())
                .collect(),
            b: b.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        }
        .to_spec()
    }

    pub fn b_is_zero(&self) -> bool {
        self.b.iter().flatten().all(CoeffExpr::is_zero_literal)
    }

    fn check(&self, t: f64, xi: &[f64]) -> Result<(), SystemError> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(SystemError::OutOfRange { t, horizon: self.horizon });
        }
        if xi.len() != self.n {
            return Err(SystemError::Dimension { got: xi.len(), expected: self.n });
        }
        Ok(())
    }

    /// `(A(t, xi), B(t))`.
    pub fn eval(&self, t: f64, xi: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), SystemError> {
        self.check(t, xi)?;
        let m = self.m;
        let a = DMatrix::from_fn(m, m, |i, j| {
            self.a[i][j].iter().zip(xi).map(|(e, x)| e.eval(t) * x).sum()
        });
        let b = DMatrix::from_fn(m, m, |i, j| self.b[i][j].eval(t));
        Ok((a, b))
    }

    /// Entrywise `d^k/dt^k` of `A(t, xi)` or `B(t)`, `k <= m - 1`.
    pub fn dt_derivative(
        &self,
        which: Which,
        order: usize,
        t: f64,
        xi: &[f64],
        side: Side,
    ) -> Result<DMatrix<f64>, SystemError> {
        if order >= self.m {
            return Err(SystemError::OrderTooHigh { order, max: self.m - 1 });
        }
        Ok(self.all_derivatives(which, order, t, xi, side)?.pop().unwrap())
    }

    /// `[M, M', ..., M^(order)]` for `M = A(t, xi)` or `B(t)`.
    pub fn all_derivatives(
        &self,
        which: Which,
        order: usize,
        t: f64,
        xi: &[f64],
        side: Side,
    ) -> Result<Vec<DMatrix<f64>>, SystemError> {
        self.check(t, xi)?;
        let m = self.m;
        let mut out = vec![DMatrix::zeros(m, m); order + 1];
        for i in 0..m {
            for j in 0..m {
                let field = |source| SystemError::Expr {
                    field: match which {
                        Which::A => format!("A[{i}][{j}]"),
                        Which::B => format!("B[{i}][{j}]"),
                    },
                    source,
                };
                match which {
                    Which::A => {
                        for (e, x) in self.a[i][j].iter().zip(xi) {
                            if e.is_zero_literal() || *x == 0.0 {
                                continue;
                            }
                            let d = e.derivatives(t, order, side).map_err(field)?;
                            for (k, dk) in d.into_iter().enumerate() {
                                out[k][(i, j)] += dk * x;
                            }
                        }
                    }
                    Which::B => {
                        let e = &self.b[i][j];
                        if e.is_zero_literal() {
                            continue;
                        }
                        let d = e.derivatives(t, order, side).map_err(field)?;
                        for (k, dk) in d.into_iter().enumerate() {
                            out[k][(i, j)] = dk;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
