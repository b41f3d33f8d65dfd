//! Mollified, separated eigenvalues
//! `lambda_{j,eps}(t) = (lambda_j * phi_eps)(t) + j eps^alpha <xi>`.
//!
//! Convolution is discrete on the time grid, with `lambda_j` extended by
//! constants outside `[0, T]`. The kernel taps are `phi(k h / eps)`,
//! renormalized to unit discrete mass; the time derivative uses the exact
//! `phi'` on the same taps.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::field::{EigenError, EigenField, EigenTrack, TimeGrid};
use crate::par::Execution;
use crate::symbol::japanese;

/// Unnormalized bump `exp(-1 / (1 - x^2))` on `(-1, 1)`.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

pub fn bump_derivative(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - x * x;
        bump(x) * (-2.0 * x / (d * d))
    }
}

/// `∫ bump` over `(-1, 1)`, by the trapezoid rule (spectrally accurate for a
/// smooth compactly supported integrand).
pub fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let n = 1 << 16;
        let h = 2.0 / n as f64;
        (1..n).map(|i| bump(-1.0 + i as f64 * h)).sum::<f64>() * h
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub eps: f64,
}

impl MollifierSpec {
    pub fn new(eps: f64) -> Self {
        MollifierSpec { eps }
    }

    /// Normalized profile `phi` with `∫ phi = 1`.
    pub fn phi(x: f64) -> f64 {
        bump(x) / bump_mass()
    }

    /// `phi_eps(t) = phi(t / eps) / eps`.
    pub fn phi_eps(&self, t: f64) -> f64 {
        Self::phi(t / self.eps) / self.eps
    }

    /// Discrete taps for grid spacing `h`: `(w, dw)` with `w[k]`, `dw[k]` the
    /// weights of offset `k` (index `k + K`), `K = floor(eps / h)`.
    pub fn taps(&self, h: f64) -> Result<(Vec<f64>, Vec<f64>), EigenError> {
        if self.eps < 4.0 * h {
            return Err(EigenError::UnderResolved { eps: self.eps, h });
        }
        let k_max = (self.eps / h).floor() as i64;
        let xs: Vec<f64> = (-k_max..=k_max).map(|k| k as f64 * h / self.eps).collect();
        let raw: Vec<f64> = xs.iter().map(|&x| bump(x)).collect();
        let mass: f64 = raw.iter().sum();
        let w = raw.iter().map(|v| v / mass).collect();
        let dw = xs.iter().map(|&x| bump_derivative(x) / (mass * self.eps)).collect();
        Ok((w, dw))
    }
}

/// Mollified eigenvalues of one frequency. `lam_eps[j][i]`, `dlam_eps[j][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegTrack {
    pub xi: Vec<f64>,
    pub radius: f64,
    pub dir_index: usize,
    pub eps: f64,
    pub alpha: f64,
    pub lam_eps: Vec<Vec<f64>>,
    pub dlam_eps: Vec<Vec<f64>>,
}

impl RegTrack {
    pub fn m(&self) -> usize {
        self.lam_eps.len()
    }

    pub fn japanese(&self) -> f64 {
        japanese(&self.xi)
    }

    /// `eps^alpha <xi>`.
    pub fn separation(&self) -> f64 {
        self.eps.powf(self.alpha) * self.japanese()
    }

    pub fn at(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        (
            self.lam_eps.iter().map(|l| l[i]).collect(),
            self.dlam_eps.iter().map(|l| l[i]).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedEigenField {
    pub grid: TimeGrid,
    pub alpha: f64,
    pub tracks: Vec<RegTrack>,
}

/// Discrete convolution with constant extension. Returns `(smoothed, derivative)`.
pub fn convolve(values: &[f64], w: &[f64], dw: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let k = w.len() / 2;
    // padded[i + k + d] = f(t_i + d h) under constant extension
    let mut padded = Vec::with_capacity(n + 2 * k);
    padded.extend(std::iter::repeat_n(values[0], k));
    padded.extend_from_slice(values);
    padded.extend(std::iter::repeat_n(values[n - 1], k));
    // taps indexed by window position: the weight of f(t - d h) sits at k - d
    let w_rev: Vec<f64> = w.iter().rev().copied().collect();
    let dw_pos = &dw[k + 1..];
    let mut smooth = Vec::with_capacity(n);
    let mut deriv = Vec::with_capacity(n);
    for i in 0..n {
        let win = &padded[i..i + 2 * k + 1];
        let center = win[k];
        // sum_d w_d (f(t - d h) - f(t)), exact for constants
        let s: f64 = w_rev.iter().zip(win).map(|(a, b)| a * (b - center)).sum();
        smooth.push(center + s);
        // dw is odd: pair +d with -d
        let (left, right) = (&win[..k], &win[k + 1..]);
        let d: f64 = dw_pos.iter().zip(left.iter().rev()).zip(right).map(|((c, l), r)| c * (l - r)).sum();
        deriv.push(d);
    }
    (smooth, deriv)
}

pub fn mollify_track(
    track: &EigenTrack,
    grid: &TimeGrid,
    mol: &MollifierSpec,
    alpha: f64,
) -> Result<RegTrack, EigenError> {
    let (w, dw) = mol.taps(grid.step())?;
    let shift = mol.eps.powf(alpha) * track.japanese();
    let mut lam_eps = Vec::with_capacity(track.m());
    let mut dlam_eps = Vec::with_capacity(track.m());
    for (j, lam) in track.lambdas.iter().enumerate() {
        let (s, d) = convolve(lam, &w, &dw);
        let jshift = (j + 1) as f64 * shift;
        lam_eps.push(s.into_iter().map(|v| v + jshift).collect());
        dlam_eps.push(d);
    }
    Ok(RegTrack {
        xi: track.xi.clone(),
        radius: track.radius,
        dir_index: track.dir_index,
        eps: mol.eps,
        alpha,
        lam_eps,
        dlam_eps,
    })
}

pub fn mollify(
    field: &EigenField,
    mol: &MollifierSpec,
    alpha: f64,
    exec: Execution,
) -> Result<RegularizedEigenField, EigenError> {
    let tracks = exec.map(&field.tracks, |tr| mollify_track(tr, &field.grid, mol, alpha));
    Ok(RegularizedEigenField {
        grid: field.grid,
        alpha,
        tracks: tracks.into_iter().collect::<Result<_, _>>()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropRootsReport {
    pub eps: f64,
    /// `sup |d_t lambda_{j,eps}| / (eps^{alpha-1} <xi>)`.
    pub c_i: f64,
    /// `sup |lambda_{j,eps} - lambda_j| / (eps^alpha <xi>)`.
    pub c_ii: f64,
    /// `lambda_{j,eps} - lambda_{i,eps} >= eps^alpha <xi>` for `j > i` at every sample.
    pub separation_holds: bool,
    /// `min (lambda_{j+1,eps} - lambda_{j,eps}) / (eps^alpha <xi>)`.
    pub min_separation_ratio: f64,
}

/// Empirical constants of the regularized-root estimates on `t <= t_prime`
/// (default `T - eps`).
pub fn verify_prop_roots(reg: &RegularizedEigenField, field: &EigenField, t_prime: Option<f64>) -> PropRootsReport {
    let mut c_i: f64 = 0.0;
    let mut c_ii: f64 = 0.0;
    let mut min_sep = f64::INFINITY;
    let mut eps_seen = f64::NAN;
    for (rt, tr) in reg.tracks.iter().zip(&field.tracks) {
        let eps = rt.eps;
        eps_seen = eps;
        let jxi = rt.japanese();
        let tp = t_prime.unwrap_or(reg.grid.horizon - eps);
        let last = reg.grid.index_at_or_before(tp);
        let d_scale = eps.powf(rt.alpha - 1.0) * jxi;
        let sep = eps.powf(rt.alpha) * jxi;
        for i in 0..=last {
            for j in 0..rt.m() {
                c_i = c_i.max(rt.dlam_eps[j][i].abs() / d_scale);
                c_ii = c_ii.max((rt.lam_eps[j][i] - tr.lambdas[j][i]).abs() / sep);
                if j + 1 < rt.m() {
                    min_sep = min_sep.min((rt.lam_eps[j + 1][i] - rt.lam_eps[j][i]) / sep);
                }
            }
        }
    }
    PropRootsReport {
        eps: eps_seen,
        c_i,
        c_ii,
        separation_holds: min_sep >= 1.0 - 1e-9,
        min_separation_ratio: min_sep,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(f: impl Fn(f64) -> Vec<f64>, grid: &TimeGrid, xi: f64) -> EigenTrack {
        let m = f(0.0).len();
        let mut lambdas = vec![Vec::new(); m];
        for i in 0..grid.points {
            for (j, v) in f(grid.t(i)).into_iter().enumerate() {
                lambdas[j].push(v);
            }
        }
        EigenTrack { xi: vec![xi], radius: xi.abs(), dir_index: 0, lambdas }
    }

    #[test]
    fn bump_mass_reference() {
        // ∫_{-1}^{1} exp(-1/(1-x^2)) dx
        assert!((bump_mass() - 0.443_993_816_168_079_4).abs() < 1e-12);
    }

    #[test]
    fn discrete_mass_is_one() {
        for eps in [0.5, 0.1, 0.013] {
            let (w, dw) = MollifierSpec::new(eps).taps(1e-3).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|v| *v >= 0.0));
            assert!(dw.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn under_resolved_is_an_error() {
        let e = MollifierSpec::new(0.003).taps(1e-3).unwrap_err();
        assert!(matches!(e, EigenError::UnderResolved { .. }));
    }

    #[test]
    fn constant_eigenvalues_shift_exactly() {
        let grid = TimeGrid::new(1.0, 201);
        let tr = track(|_| vec![-1.5, 2.0], &grid, 3.0);
        let mol = MollifierSpec::new(0.1);
        let r = mollify_track(&tr, &grid, &mol, 0.5).unwrap();
        let s = 0.1f64.sqrt() * japanese(&[3.0]);
        for i in 0..grid.points {
            assert_eq!(r.lam_eps[0][i], -1.5 + s);
            assert_eq!(r.lam_eps[1][i], 2.0 + 2.0 * s);
            assert_eq!(r.dlam_eps[0][i], 0.0);
        }
    }

    #[test]
    fn identical_eigenvalues_separate_by_shift() {
        let grid = TimeGrid::new(1.0, 401);
        let tr = track(|t| vec![t.sin(), t.sin(), t.sin()], &grid, 2.0);
        let r = mollify_track(&tr, &grid, &MollifierSpec::new(0.05), 1.0).unwrap();
        let s = r.separation();
        for i in 0..grid.points {
            assert!((r.lam_eps[2][i] - r.lam_eps[0][i] - 2.0 * s).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_reproduced_in_interior() {
        let grid = TimeGrid::new(1.0, 1001);
        let xi = 4.0;
        let tr = track(|t| vec![t * xi], &grid, xi);
        let eps = 0.1;
        let r = mollify_track(&tr, &grid, &MollifierSpec::new(eps), 1.0).unwrap();
        let shift = r.separation();
        for i in 0..grid.points {
            let t = grid.t(i);
            if t >= eps && t <= 1.0 - eps {
                assert!((r.lam_eps[0][i] - shift - t * xi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shift_commutes() {
        let grid = TimeGrid::new(1.0, 301);
        let mol = MollifierSpec::new(0.07);
        let a = mollify_track(&track(|t| vec![t.sqrt()], &grid, 1.0), &grid, &mol, 0.5).unwrap();
        let b = mollify_track(&track(|t| vec![t.sqrt() + 7.0], &grid, 1.0), &grid, &mol, 0.5).unwrap();
        for i in 0..grid.points {
            assert!((b.lam_eps[0][i] - a.lam_eps[0][i] - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_report() {
        let grid = TimeGrid::new(1.0, 201);
        let field = EigenField { grid, tol: 1e-8, tracks: vec![track(|_| vec![0.0, 1.0, 5.0], &grid, 2.0)] };
        let reg = mollify(&field, &MollifierSpec::new(0.1), 1.0, Execution::Sequential).unwrap();
        let rep = verify_prop_roots(&reg, &field, None);
        assert_eq!(rep.c_i, 0.0);
        assert!((rep.c_ii - 3.0).abs() < 1e-12);
        assert!(rep.separation_holds);
    }

    #[test]
    fn coinciding_roots_hold_with_equality() {
        let grid = TimeGrid::new(1.0, 201);
        let field = EigenField { grid, tol: 1e-8, tracks: vec![track(|t| vec![t, t], &grid, 2.0)] };
        let reg = mollify(&field, &MollifierSpec::new(0.1), 1.0, Execution::Sequential).unwrap();
        let rep = verify_prop_roots(&reg, &field, None);
        assert!(rep.separation_holds);
        assert!((rep.min_separation_ratio - 1.0).abs() < 1e-9);
    }
}
