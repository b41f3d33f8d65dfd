//! Ordered real eigenvalues on a time grid, Hölder and uniformity checks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::Execution;
use crate::symbol::{char_poly, japanese, SystemError, SystemSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("not hyperbolic at t = {t}, xi = {xi:?}: root {re} + {im}i exceeds tolerance {tol}")]
    NotHyperbolic { t: f64, xi: Vec<f64>, re: f64, im: f64, tol: f64 },
    #[error("mollifier under-resolved: eps = {eps} is below 4 grid spacings ({h})")]
    UnderResolved { eps: f64, h: f64 },
    #[error("time grid needs at least {min} points, got {got}")]
    GridTooSmall { min: usize, got: usize },
}

/// Uniform grid `t_i = i T / (N - 1)`, `i = 0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, points: usize) -> Self {
        assert!(points >= 2, "time grid needs two points");
        TimeGrid { horizon, points }
    }

    pub fn step(&self) -> f64 {
        self.horizon / (self.points - 1) as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.horizon
        } else {
            i as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.t(i)).collect()
    }

    /// Index of the last grid point not beyond `t`.
    pub fn index_at_or_before(&self, t: f64) -> usize {
        ((t / self.step() + 1e-9).floor() as usize).min(self.points - 1)
    }
}

/// Eigenvalues of one frequency along the grid; `lambdas[j][i]` is
/// `lambda_{j+1}(t_i, xi)`, ascending in `j` at every `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTrack {
    pub xi: Vec<f64>,
    pub radius: f64,
    pub dir_index: usize,
    pub lambdas: Vec<Vec<f64>>,
}

impl EigenTrack {
    pub fn m(&self) -> usize {
        self.lambdas.len()
    }

    pub fn japanese(&self) -> f64 {
        japanese(&self.xi)
    }

    pub fn at(&self, i: usize) -> Vec<f64> {
        self.lambdas.iter().map(|l| l[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenField {
    pub grid: TimeGrid,
    pub tol: f64,
    pub tracks: Vec<EigenTrack>,
}

pub const DEFAULT_HYPERBOLICITY_TOL: f64 = 1e-8;

/// Real roots of `tau^m + b_1 tau^{m-1} + ... + b_m`, ascending, via the
/// eigenvalues of a rescaled companion matrix. `Err((re, im))` carries the
/// worst non-real root when its imaginary part exceeds `im_tol`.
pub fn real_roots(b: &[f64], im_tol: f64) -> Result<Vec<f64>, (f64, f64)> {
    let m = b.len();
    let scale = b
        .iter()
        .enumerate()
        .map(|(k, bk)| bk.abs().powf(1.0 / (k + 1) as f64))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(vec![0.0; m]);
    }
    if m == 1 {
        return Ok(vec![-b[0]]);
    }
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for r in 0..m - 1 {
        comp[(r, r + 1)] = 1.0;
    }
    for k in 1..=m {
        comp[(m - 1, m - k)] = -b[k - 1] / scale.powi(k as i32);
    }
    let eig = comp.complex_eigenvalues();
    let mut roots = Vec::with_capacity(m);
    let mut worst: Option<(f64, f64)> = None;
    for z in eig.iter() {
        let (re, im) = (z.re * scale, z.im * scale);
        if im.abs() > im_tol && worst.is_none_or(|w| im.abs() > w.1.abs()) {
            worst = Some((re, im));
        }
        roots.push(polish(b, re));
    }
    if let Some(w) = worst {
        return Err(w);
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

/// Newton steps on the unscaled polynomial, kept only while `|delta|` drops.
fn polish(b: &[f64], mut x: f64) -> f64 {
    let eval = |x: f64| {
        b.iter().fold((1.0, 0.0), |(p, dp), bk| (p * x + bk, dp * x + p))
    };
    let (mut p, mut dp) = eval(x);
    for _ in 0..3 {
        if p == 0.0 || dp == 0.0 {
            break;
        }
        let next = x - p / dp;
        let (pn, dpn) = eval(next);
        if pn.abs() >= p.abs() {
            break;
        }
        (x, p, dp) = (next, pn, dpn);
    }
    x
}

/// Ordered eigenvalues of `A(t, xi)` at one point.
pub fn eigenvalues_at(spec: &SystemSpec, t: f64, xi: &[f64], tol: f64) -> Result<Vec<f64>, EigenError> {
    let (a, _) = spec.eval(t, xi)?;
    let b = char_poly(&a);
    let radius = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol_abs = tol * (1.0 + radius);
    real_roots(&b, tol_abs).map_err(|(re, im)| EigenError::NotHyperbolic {
        t,
        xi: xi.to_vec(),
        re,
        im,
        tol: tol_abs,
    })
}

pub fn compute_track(
    spec: &SystemSpec,
    grid: &TimeGrid,
    xi: &[f64],
    dir_index: usize,
    tol: f64,
) -> Result<EigenTrack, EigenError> {
    let m = spec.m;
    let mut lambdas = vec![Vec::with_capacity(grid.points); m];
    for i in 0..grid.points {
        let roots = eigenvalues_at(spec, grid.t(i), xi, tol)?;
        for (j, r) in roots.into_iter().enumerate() {
            lambdas[j].push(r);
        }
    }
    let radius = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(EigenTrack { xi: xi.to_vec(), radius, dir_index, lambdas })
}

/// Eigenvalues for every `(xi, dir_index)` in `freqs`, in input order.
pub fn compute_eigenvalues(
    spec: &SystemSpec,
    grid: TimeGrid,
    freqs: &[(Vec<f64>, usize)],
    tol: f64,
    exec: Execution,
) -> Result<EigenField, EigenError> {
    let tracks = exec.map(freqs, |(xi, d)| compute_track(spec, &grid, xi, *d, tol));
    Ok(EigenField { grid, tol, tracks: tracks.into_iter().collect::<Result<_, _>>()? })
}

/// `max |f(t) - f(s)| / |t - s|^alpha` over all grid pairs.
pub fn holder_seminorm(values: &[f64], grid: &TimeGrid, alpha: f64, exec: Execution) -> f64 {
    let h = grid.step();
    let n = values.len();
    let inv_lag: Vec<f64> = (0..n).map(|d| ((d as f64) * h).powf(-alpha)).collect();
    exec.map_range(n, |i| {
        let v = values[i];
        let mut best: f64 = 0.0;
        for (x, c) in values[i + 1..].iter().zip(&inv_lag[1..]) {
            let r = (x - v).abs() * c;
            if r > best {
                best = r;
            }
        }
        best
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Hölder seminorm estimate per eigenvalue index, max over tracks.
pub fn estimate_holder(field: &EigenField, alpha: f64, exec: Execution) -> Result<Vec<f64>, EigenError> {
    if field.grid.points < 3 {
        return Err(EigenError::GridTooSmall { min: 3, got: field.grid.points });
    }
    let m = field.tracks.first().map_or(0, EigenTrack::m);
    Ok((0..m)
        .map(|j| {
            field
                .tracks
                .iter()
                .map(|tr| holder_seminorm(&tr.lambdas[j], &field.grid, alpha, exec))
                .fold(0.0, f64::max)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformWitness {
    /// 1-based indices as in `|lambda_i - lambda_j| <= c |lambda_k - lambda_{k-1}|`.
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub t: f64,
    pub xi: Vec<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub c: f64,
    pub witness: Option<UniformWitness>,
    /// Set when some pair is separated while a consecutive gap vanishes.
    pub failure: Option<UniformWitness>,
    pub cap: f64,
    pub pass: bool,
}

/// Differences below `zero_tol * (1 + |xi|)` count as coincidences.
pub const DEFAULT_COINCIDENCE_TOL: f64 = 1e-12;

/// Best uniform constant on one sample of ordered eigenvalues. Returns
/// `(c, argmax (i, j, k), failure (i, j, k))`.
#[allow(clippy::type_complexity)]
pub fn uniform_ratio(
    lams: &[f64],
    zero: f64,
) -> (f64, Option<(usize, usize, usize, f64)>, Option<(usize, usize, usize)>) {
    let m = lams.len();
    let mut best = 0.0;
    let mut arg = None;
    for k in 2..=m {
        let gap = (lams[k - 1] - lams[k - 2]).abs();
        for i in 1..=m {
            for j in 1..=m {
                let num = (lams[i - 1] - lams[j - 1]).abs();
                let (num_zero, gap_zero) = (num <= zero, gap <= zero);
                match (num_zero, gap_zero) {
                    (true, true) => continue,
                    (false, true) => return (f64::INFINITY, None, Some((i, j, k))),
                    (true, false) => {}
                    (false, false) => {
                        let r = num / gap;
                        if r > best {
                            best = r;
                            arg = Some((i, j, k, r));
                        }
                    }
                }
            }
        }
    }
    (best, arg, None)
}

pub fn check_uniform_property(field: &EigenField, cap: f64, zero_tol: f64) -> UniformityReport {
    let mut c: f64 = 0.0;
    let mut witness = None;
    for tr in &field.tracks {
        if tr.m() < 2 {
            continue;
        }
        let zero = zero_tol * (1.0 + tr.radius);
        for i in 0..field.grid.points {
            let lams = tr.at(i);
            let (r, arg, fail) = uniform_ratio(&lams, zero);
            if let Some((a, b, k)) = fail {
                let w = UniformWitness { i: a, j: b, k, t: field.grid.t(i), xi: tr.xi.clone(), ratio: f64::INFINITY };
                return UniformityReport { c: f64::INFINITY, witness: Some(w.clone()), failure: Some(w), cap, pass: false };
            }
            if r > c {
                c = r;
                witness = arg.map(|(a, b, k, ratio)| UniformWitness {
                    i: a,
                    j: b,
                    k,
                    t: field.grid.t(i),
                    xi: tr.xi.clone(),
                    ratio,
                });
            }
        }
    }
    UniformityReport { c, witness, failure: None, cap, pass: c <= cap }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_from(f: impl Fn(f64) -> Vec<f64>, n: usize) -> EigenField {
        let grid = TimeGrid::new(1.0, n);
        let m = f(0.0).len();
        let mut lambdas = vec![Vec::new(); m];
        for i in 0..n {
            for (j, v) in f(grid.t(i)).into_iter().enumerate() {
                lambdas[j].push(v);
            }
        }
        EigenField { grid, tol: 1e-8, tracks: vec![EigenTrack { xi: vec![1.0], radius: 1.0, dir_index: 0, lambdas }] }
    }

    #[test]
    fn wave_roots() {
        // tau^2 - t^2 xi^2 at t = 1, xi = 2
        assert_eq!(real_roots(&[0.0, -4.0], 1e-8).unwrap(), vec![-2.0, 2.0]);
    }

    #[test]
    fn triple_root_at_zero() {
        assert_eq!(real_roots(&[0.0, 0.0, 0.0], 1e-8).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn complex_roots_rejected() {
        // tau^2 + 1
        let (_, im) = real_roots(&[0.0, 1.0], 1e-8).unwrap_err();
        assert!((im.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holder_of_sqrt_is_one() {
        let f = field_from(|t| vec![t.sqrt()], 2000);
        let s = estimate_holder(&f, 0.5, Execution::Parallel).unwrap();
        assert!((s[0] - 1.0).abs() < 0.05, "{}", s[0]);
    }

    #[test]
    fn holder_of_constant_and_linear() {
        assert_eq!(estimate_holder(&field_from(|_| vec![3.0], 50), 0.5, Execution::Sequential).unwrap()[0], 0.0);
        let s = estimate_holder(&field_from(|t| vec![t], 50), 1.0, Execution::Sequential).unwrap()[0];
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_pair() {
        let f = field_from(|t| vec![-t, t], 11);
        let r = check_uniform_property(&f, 10.0, DEFAULT_COINCIDENCE_TOL);
        assert_eq!(r.c, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn uniform_triple_linear() {
        let f = field_from(|t| vec![0.0, t, 2.0 * t], 11);
        let r = check_uniform_property(&f, 10.0, DEFAULT_COINCIDENCE_TOL);
        assert!((r.c - 2.0).abs() < 1e-12);
        let w = r.witness.unwrap();
        assert_eq!((w.i.max(w.j), w.i.min(w.j)), (3, 1));
    }

    #[test]
    fn uniform_failure_near_zero() {
        let f = field_from(|t| vec![0.0, t, 1.0], 101);
        let r = check_uniform_property(&f, 1e6, DEFAULT_COINCIDENCE_TOL);
        assert!(!r.pass);
        let w = r.failure.unwrap();
        assert_eq!(w.t, 0.0);
        assert_eq!(w.k, 2);
    }

    #[test]
    fn scalar_field_is_trivially_uniform() {
        let r = check_uniform_property(&field_from(|t| vec![t], 5), 1.0, DEFAULT_COINCIDENCE_TOL);
        assert_eq!(r.c, 0.0);
        assert!(r.pass);
    }
}
