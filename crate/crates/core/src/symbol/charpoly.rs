//! Characteristic polynomial, adjugate and the lower-order matrix `C`.
//!
//! Everything here works at a fixed `(t, xi)`: a [`TauPolyMatrix`] is an
//! `m x m` matrix whose entries are polynomials in `tau` with complex
//! coefficients.

use nalgebra::{Complex, DMatrix};

use super::expr::Side;
use super::system::{SystemError, SystemSpec, Which};

pub type C64 = Complex<f64>;

/// `sum_r coeffs[r] * tau^r`, each coefficient an `m x m` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TauPolyMatrix {
    pub coeffs: Vec<DMatrix<C64>>,
}

impl TauPolyMatrix {
    pub fn zeros(m: usize, degree: usize) -> Self {
        TauPolyMatrix { coeffs: vec![DMatrix::zeros(m, m); degree + 1] }
    }

    pub fn size(&self) -> usize {
        self.coeffs.first().map_or(0, |c| c.nrows())
    }

    /// Highest power with a nonzero coefficient (0 for the zero matrix).
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| c.iter().any(|z| *z != C64::new(0.0, 0.0)))
            .unwrap_or(0)
    }

    pub fn eval(&self, tau: C64) -> DMatrix<C64> {
        let m = self.size();
        self.coeffs
            .iter()
            .rev()
            .fold(DMatrix::zeros(m, m), |acc, c| acc * tau + c)
    }

    /// k-th derivative in `tau`.
    pub fn d_tau(&self, k: usize) -> TauPolyMatrix {
        let m = self.size();
        if k >= self.coeffs.len() {
            return TauPolyMatrix::zeros(m, 0);
        }
        let coeffs = (k..self.coeffs.len())
            .map(|r| {
                let falling: f64 = ((r - k + 1)..=r).map(|x| x as f64).product();
                &self.coeffs[r] * C64::new(falling, 0.0)
            })
            .collect();
        TauPolyMatrix { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|z| z.norm() == 0.0))
    }
}

/// Faddeev–LeVerrier for `det(tau I - A) = tau^m + b_1 tau^{m-1} + ... + b_m`.
///
/// Returns `(b, adj)` with `b = [b_1, ..., b_m]` and `adj[k]` the matrix
/// coefficient of `tau^{m-1-k}` in `adj(tau I - A)`.
pub fn faddeev_leverrier(a: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let m = a.nrows();
    let mut b = Vec::with_capacity(m);
    let mut adj = Vec::with_capacity(m);
    let mut bk = DMatrix::<f64>::identity(m, m);
    for k in 1..=m {
        let ab = a * &bk;
        let ck = -ab.trace() / k as f64;
        b.push(ck);
        adj.push(bk);
        bk = ab + DMatrix::identity(m, m) * ck;
    }
    (b, adj)
}

/// Coefficients `(b_1, ..., b_m)` of `det(tau I - A)`.
pub fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    faddeev_leverrier(a).0
}

/// `L(tau) = adj(tau I - A)` as a tau-polynomial matrix (degree `m - 1`).
pub fn adjugate_poly(a: &DMatrix<f64>) -> TauPolyMatrix {
    let m = a.nrows();
    let (_, adj) = faddeev_leverrier(a);
    let mut coeffs = vec![DMatrix::zeros(m, m); m];
    for (k, bk) in adj.into_iter().enumerate() {
        coeffs[m - 1 - k] = bk.map(|x| C64::new(x, 0.0));
    }
    TauPolyMatrix { coeffs }
}

/// Evaluate `delta(tau) = tau^m + sum b_k tau^{m-k}`.
pub fn eval_char_poly(b: &[f64], tau: C64) -> C64 {
    b.iter().fold(C64::new(1.0, 0.0), |acc, bk| acc * tau + bk)
}

pub fn adjugate_symbol(spec: &SystemSpec, t: f64, xi: &[f64]) -> Result<TauPolyMatrix, SystemError> {
    let (a, _) = spec.eval(t, xi)?;
    Ok(adjugate_poly(&a))
}

/// Symbol data needed by the reduction at one `(t, xi)`.
#[derive(Debug, Clone)]
pub struct SymbolAt {
    pub b: Vec<f64>,
    pub adjugate: TauPolyMatrix,
    pub lower: TauPolyMatrix,
}

/// `C(t, tau, xi) = L B + sum_{k=1}^{m-1} (1/k!) d_tau^k L * D_t^k (A + B)`
/// with `D_t = -i d/dt`.
pub fn lower_order_matrix(spec: &SystemSpec, t: f64, xi: &[f64]) -> Result<TauPolyMatrix, SystemError> {
    Ok(symbol_at(spec, t, xi, Side::Both)?.lower)
}

pub fn symbol_at(spec: &SystemSpec, t: f64, xi: &[f64], side: Side) -> Result<SymbolAt, SystemError> {
    let m = spec.m;
    let order = m - 1;
    let da = spec.all_derivatives(Which::A, order, t, xi, side)?;
    let db = spec.all_derivatives(Which::B, order, t, xi, side)?;
    let (b, _) = faddeev_leverrier(&da[0]);
    let adjugate = adjugate_poly(&da[0]);
    let to_c = |x: &DMatrix<f64>| x.map(|v| C64::new(v, 0.0));

    let mut lower = TauPolyMatrix::zeros(m, m - 1);
    let bc = to_c(&db[0]);
    for (r, lr) in adjugate.coeffs.iter().enumerate() {
        lower.coeffs[r] += lr * &bc;
    }
    let mut fact = 1.0;
    // (-i)^k
    let mut phase = C64::new(1.0, 0.0);
    for k in 1..=order {
        fact *= k as f64;
        phase *= C64::new(0.0, -1.0);
        let dk = to_c(&(&da[k] + &db[k])) * (phase / fact);
        let dl = adjugate.d_tau(k);
        for (r, lr) in dl.coeffs.iter().enumerate() {
            lower.coeffs[r] += lr * &dk;
        }
    }
    Ok(SymbolAt { b, adjugate, lower })
}
