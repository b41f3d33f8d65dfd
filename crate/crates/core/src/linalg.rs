//! Small dense helpers shared by the energy and solver modules.

use nalgebra::{DMatrix, DVector};

use crate::symbol::C64;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|z| z.norm() == 0.0) {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn spectral_norm_real(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() || m.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `‖X - X^*‖₂`.
pub fn skew_norm(x: &DMatrix<C64>) -> f64 {
    spectral_norm(&(x - x.adjoint()))
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

pub fn block_diag(block: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let m = block.nrows();
    let mut out = DMatrix::zeros(m * copies, m * copies);
    for b in 0..copies {
        out.view_mut((b * m, b * m), (m, m)).copy_from(block);
    }
    out
}

pub fn cnorm(v: &DVector<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Ordinary least squares `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// `sqrt(sum r^2 / sum (y - ybar)^2)`, i.e. `sqrt(1 - R^2)`.
    pub rel_residual: f64,
    pub rms_residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let xm = x.iter().sum::<f64>() / nf;
    let ym = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - ym).powi(2)).sum();
    let rel_residual = if ss_tot > 0.0 { (ss_res / ss_tot).sqrt() } else { 0.0 };
    Some(LineFit { slope, intercept, rel_residual, rms_residual: (ss_res / nf).sqrt() })
}
