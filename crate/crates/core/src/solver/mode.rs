//! Per-frequency integration of the original and reduced systems, the
//! initial lift, and the weighted symmetrizer transform `V -> W`.

use std::cell::RefCell;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::gevrey::GevreySample;
use super::grid::Frequency;
use super::ode::{integrate, OdeError, OdeOptions, OdeStats};
use crate::eigen::RegTrack;
use crate::energy::{build_block, EnergyError, WeightPlan};
use crate::linalg::{cnorm, to_complex};
use crate::symbol::{japanese, ReducedAt, ReducedSystem, Side, SystemError, SystemSpec, Which, C64};

pub type CVec = DVector<C64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("trajectory has {got} samples, regularized track has {expected}")]
    GridMismatch { got: usize, expected: usize },
}

/// Integrator settings; the step cap is `max_step_factor / <xi>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step_factor: f64,
    #[serde(skip)]
    pub side: Side,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { rtol: 1e-9, atol: 1e-12, max_step_factor: 0.1, side: Side::Right }
    }
}

impl SolveOptions {
    pub fn ode(&self, jxi: f64) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, max_step: self.max_step_factor / jxi, ..OdeOptions::default() }
    }
}

/// Run `integrate` with a fallible right-hand side matrix `M(t)`; the
/// system is `y' = i M(t) y`.
fn integrate_linear<M, E>(matrix: M, y0: &CVec, t_out: &[f64], opts: &OdeOptions) -> Result<(Vec<CVec>, OdeStats), SolveError>
where
    M: Fn(f64) -> Result<nalgebra::DMatrix<C64>, E>,
    SolveError: From<E>,
{
    let failure: RefCell<Option<E>> = RefCell::new(None);
    let i = C64::new(0.0, 1.0);
    let sol = integrate(
        |t, y| match matrix(t) {
            Ok(mat) => (mat * y) * i,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                CVec::zeros(y.len())
            }
        },
        y0,
        t_out,
        opts,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e.into());
    }
    let sol = sol?;
    Ok((sol.y, sol.stats))
}

/// `d/dt u = i (A(t, xi) + B(t)) u`.
pub fn solve_original(
    spec: &SystemSpec,
    xi: &[f64],
    g0: &CVec,
    t_out: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<CVec>, OdeStats), SolveError> {
    integrate_linear(
        |t| {
            let (a, b) = spec.eval(t, xi)?;
            Ok::<_, SystemError>(to_complex(&(a + b)))
        },
        g0,
        t_out,
        opts,
    )
}

/// `d/dt V = i (𝒜 + ℒ)(t, xi) V`.
pub fn solve_reduced(
    reduced: &ReducedSystem,
    xi: &[f64],
    u0: &CVec,
    t_out: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<CVec>, OdeStats), SolveError> {
    integrate_linear(|t| reduced.at(t, xi).map(|at| at.total()), u0, t_out, opts)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `D_t^k u(0)` for `k = 0..m`, from `D_t u = M u` with `M = A + B`:
/// `D_t^k u = sum_l C(k-1, l) (D_t^l M) D_t^{k-1-l} u`.
pub fn time_derivatives_at_zero(spec: &SystemSpec, xi: &[f64], g0: &CVec, side: Side) -> Result<Vec<CVec>, SolveError> {
    let m = spec.m;
    let order = m.saturating_sub(2);
    let da = spec.all_derivatives(Which::A, order, 0.0, xi, side)?;
    let db = spec.all_derivatives(Which::B, order, 0.0, xi, side)?;
    let mut phase = C64::new(1.0, 0.0);
    let mut dm = Vec::with_capacity(order + 1);
    for (a, b) in da.iter().zip(&db) {
        dm.push(to_complex(&(a + b)) * phase);
        phase *= C64::new(0.0, -1.0);
    }
    let mut d = vec![g0.clone()];
    for k in 1..m {
        let mut acc = CVec::zeros(m);
        for l in 0..k {
            acc += (&dm[l] * &d[k - 1 - l]) * C64::new(binomial(k - 1, l), 0.0);
        }
        d.push(acc);
    }
    Ok(d)
}

/// Component `i m + j` (0-based) is `<xi>^{m-1-j} (D_t^j u)_i (0)`.
pub fn lift_initial(spec: &SystemSpec, xi: &[f64], g0: &CVec, side: Side) -> Result<CVec, SolveError> {
    let m = spec.m;
    let jxi = japanese(xi);
    let d = time_derivatives_at_zero(spec, xi, g0, side)?;
    let mut u0 = CVec::zeros(m * m);
    for i in 0..m {
        for (j, dj) in d.iter().enumerate() {
            u0[i * m + j] = dj[i] * C64::new(jxi.powi((m - 1 - j) as i32), 0.0);
        }
    }
    Ok(u0)
}

/// Both formulations at one frequency, on normalized data: the true states
/// are `exp(log_scale)` times the stored ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrajectory {
    pub xi: Vec<f64>,
    pub radius: f64,
    pub dir_index: usize,
    pub japanese: f64,
    pub t: Vec<f64>,
    pub log_scale: f64,
    pub u: Vec<CVec>,
    pub v: Vec<CVec>,
    pub stats_original: OdeStats,
    pub stats_reduced: OdeStats,
}

impl ModeTrajectory {
    pub fn m(&self) -> usize {
        self.u[0].len()
    }

    /// `max_t |<xi>^{m-1} u(t) - (V_{im})_i(t)| / |<xi>^{m-1} u(t)|`.
    pub fn consistency_error(&self) -> f64 {
        let m = self.m();
        let scale = C64::new(self.japanese.powi(m as i32 - 1), 0.0);
        self.u
            .iter()
            .zip(&self.v)
            .map(|(u, v)| {
                let lhs = u * scale;
                let rhs = CVec::from_iterator(m, (0..m).map(|i| v[i * m]));
                let denom = cnorm(&lhs);
                if denom == 0.0 {
                    cnorm(&rhs)
                } else {
                    cnorm(&(lhs - rhs)) / denom
                }
            })
            .fold(0.0, f64::max)
    }

    /// `log |V(T, xi)|` including the data scale.
    pub fn log_abs_v_final(&self) -> f64 {
        self.log_scale + cnorm(self.v.last().expect("nonempty trajectory")).ln()
    }
}

pub fn solve_mode(
    spec: &SystemSpec,
    reduced: &ReducedSystem,
    freq: &Frequency,
    data: &GevreySample,
    t_out: &[f64],
    opts: &SolveOptions,
) -> Result<ModeTrajectory, SolveError> {
    let jxi = freq.japanese();
    let ode = opts.ode(jxi);
    let (u, stats_original) = solve_original(spec, &freq.xi, &data.unit, t_out, &ode)?;
    let u0 = lift_initial(spec, &freq.xi, &data.unit, opts.side)?;
    let (v, stats_reduced) = solve_reduced(reduced, &freq.xi, &u0, t_out, &ode)?;
    Ok(ModeTrajectory {
        xi: freq.xi.clone(),
        radius: freq.radius,
        dir_index: freq.dir_index,
        japanese: jxi,
        t: t_out.to_vec(),
        log_scale: data.log_amplitude,
        u,
        v,
        stats_original,
        stats_reduced,
    })
}

/// A vector stored as `exp(log_scale) * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledVec {
    pub log_scale: f64,
    pub v: CVec,
}

impl ScaledVec {
    /// Divides by the largest entry first so squaring cannot overflow.
    pub fn log_norm(&self) -> f64 {
        let big = self.v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if big == 0.0 || !big.is_finite() {
            return self.log_scale + big.ln();
        }
        self.log_scale + big.ln() + cnorm(&self.v.map(|z| z / big)).ln()
    }

    pub fn to_plain(&self) -> CVec {
        &self.v * C64::new(self.log_scale.exp(), 0.0)
    }
}

/// Exponents beyond this are kept in `log_scale` instead of multiplied in.
pub const LOG_MAGNITUDE_THRESHOLD: f64 = 600.0;

fn apply_scale(log_scale: f64, extra: f64, v: CVec) -> ScaledVec {
    if extra.abs() > LOG_MAGNITUDE_THRESHOLD {
        ScaledVec { log_scale: log_scale + extra, v }
    } else {
        ScaledVec { log_scale, v: v * C64::new(extra.exp(), 0.0) }
    }
}

/// `W = exp(rho <xi>^{1/s}) det H H^{-1} V`, applied block by block.
pub fn w_transform(v: &ScaledVec, lam_eps: &[f64], jxi: f64, rho: f64, s: f64) -> Result<ScaledVec, EnergyError> {
    let block = build_block(lam_eps, jxi)?;
    let m = block.m();
    let inv = to_complex(&block.inv) * C64::new(block.det, 0.0);
    let mut w = CVec::zeros(m * m);
    for b in 0..m {
        let part = &inv * v.v.rows(b * m, m);
        w.rows_mut(b * m, m).copy_from(&part);
    }
    Ok(apply_scale(v.log_scale, rho * jxi.powf(1.0 / s), w))
}

/// `V = exp(-rho <xi>^{1/s}) (det H)^{-1} H W`.
pub fn inverse_w_transform(w: &ScaledVec, lam_eps: &[f64], jxi: f64, rho: f64, s: f64) -> Result<ScaledVec, EnergyError> {
    let block = build_block(lam_eps, jxi)?;
    let m = block.m();
    let h = to_complex(&block.h) * C64::new(1.0 / block.det, 0.0);
    let mut v = CVec::zeros(m * m);
    for b in 0..m {
        let part = &h * w.v.rows(b * m, m);
        v.rows_mut(b * m, m).copy_from(&part);
    }
    Ok(apply_scale(w.log_scale, -rho * jxi.powf(1.0 / s), v))
}

/// `log |W(t_i)|` along a trajectory, with `eps` fixed by the regularized track.
pub fn w_log_norms(traj: &ModeTrajectory, reg: &RegTrack, plan: &WeightPlan) -> Result<Vec<f64>, SolveError> {
    if reg.lam_eps[0].len() != traj.t.len() {
        return Err(SolveError::GridMismatch { got: traj.t.len(), expected: reg.lam_eps[0].len() });
    }
    traj.v
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (lam, _) = reg.at(i);
            let sv = ScaledVec { log_scale: traj.log_scale, v: v.clone() };
            Ok(w_transform(&sv, &lam, traj.japanese, plan.rho(traj.t[i]), plan.s)?.log_norm())
        })
        .collect()
}

/// `d/dt |W|^2 / |W|^2 = 2 Re (G W, W) / |W|^2` with
/// `G = rho' <xi>^{1/s} + (det H)'/det H - H^{-1} H' + i H^{-1} (𝒜 + ℒ) H`.
#[allow(clippy::too_many_arguments)]
pub fn w_growth_rate(
    w: &CVec,
    lam_eps: &[f64],
    dlam_eps: &[f64],
    jxi: f64,
    rho_prime: f64,
    s: f64,
    reduced: &ReducedAt,
) -> Result<f64, EnergyError> {
    let block = build_block(lam_eps, jxi)?;
    let m = block.m();
    let dnodes: Vec<f64> = dlam_eps.iter().map(|d| d / jxi).collect();
    let signed_q1: f64 = {
        let mut acc = 0.0;
        for j in 0..m {
            for i in 0..j {
                acc += (dlam_eps[j] - dlam_eps[i]) / (lam_eps[j] - lam_eps[i]);
            }
        }
        acc
    };
    let inv = to_complex(&block.inv);
    let h = to_complex(&block.h);
    let hdh = to_complex(&(&block.inv * block.dt(&dnodes)));
    let total = reduced.total();
    let i = C64::new(0.0, 1.0);
    let mut gw = w * C64::new(rho_prime * jxi.powf(1.0 / s) + signed_q1, 0.0);
    for b in 0..m {
        let part = &hdh * w.rows(b * m, m);
        let mut rows = gw.rows_mut(b * m, m);
        rows -= part;
    }
    for bi in 0..m {
        let mut acc = CVec::zeros(m);
        for bj in 0..m {
            let sub = total.view((bi * m, bj * m), (m, m));
            acc += &inv * (sub * (&h * w.rows(bj * m, m)));
        }
        let mut rows = gw.rows_mut(bi * m, m);
        rows += acc * i;
    }
    let num = 2.0 * w.dotc(&gw).re;
    Ok(num / w.norm_squared())
}

/// Largest `|W(t)| / |W(0)|` along one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub radius: f64,
    pub dir_index: usize,
    pub max_ratio: f64,
    /// Whether the radius is at or above the cutoff and so counts for pass/fail.
    pub included: bool,
    pub pass: bool,
}

pub fn check_energy(log_w: &[f64], radius: f64, dir_index: usize, xi0: f64, tol: f64) -> EnergyCheck {
    let first = log_w[0];
    let max_log = log_w.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let max_ratio = (max_log - first).exp();
    let included = radius >= xi0;
    EnergyCheck { radius, dir_index, max_ratio, included, pass: !included || max_ratio <= 1.0 + tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(xs: &[(f64, f64)]) -> CVec {
        CVec::from_iterator(xs.len(), xs.iter().map(|(a, b)| C64::new(*a, *b)))
    }

    #[test]
    fn log_norm_of_huge_entries() {
        let v = ScaledVec { log_scale: -10.0, v: cv(&[(3e200, 0.0), (0.0, 4e200)]) };
        let expect = -10.0 + 5e200f64.ln();
        assert!((v.log_norm() - expect).abs() < 1e-12, "{} vs {expect}", v.log_norm());
        let z = ScaledVec { log_scale: 0.0, v: cv(&[(0.0, 0.0)]) };
        assert_eq!(z.log_norm(), f64::NEG_INFINITY);
    }

    #[test]
    fn scalar_flow_is_unitary() {
        let spec = SystemSpec::from_strs(1.0, 1.0, &[&[&["3"]]], &[&["0"]]).unwrap();
        let xi = 5.0;
        let ts: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let opts = SolveOptions::default().ode(japanese(&[xi]));
        let (u, _) = solve_original(&spec, &[xi], &cv(&[(0.6, 0.8)]), &ts, &opts).unwrap();
        for (t, y) in ts.iter().zip(&u) {
            let exact = C64::new(0.6, 0.8) * C64::new(0.0, 3.0 * xi * t).exp();
            assert!((y[0] - exact).norm() < 1e-8);
        }
    }

    #[test]
    fn real_b_rotates() {
        let spec = SystemSpec::from_strs(1.0, 1.0, &[&[&["0"]]], &[&["2"]]).unwrap();
        let (u, _) =
            solve_original(&spec, &[1.0], &cv(&[(1.0, 0.0)]), &[0.0, 1.0], &SolveOptions::default().ode(1.0)).unwrap();
        assert!((u[1][0] - C64::new(0.0, 2.0).exp()).norm() < 1e-9);
    }

    #[test]
    fn scalar_lift_is_identity() {
        let spec = SystemSpec::from_strs(1.0, 1.0, &[&[&["t"]]], &[&["1"]]).unwrap();
        let g = cv(&[(0.3, -0.1)]);
        assert_eq!(lift_initial(&spec, &[4.0], &g, Side::Both).unwrap(), g);
    }

    #[test]
    fn constant_lift_applies_equation_once() {
        let spec =
            SystemSpec::from_strs(1.0, 1.0, &[&[&["1"], &["2"]], &[&["3"], &["4"]]], &[&["0", "0"], &["0", "0"]])
                .unwrap();
        let xi = 2.0;
        let g = cv(&[(1.0, 0.0), (0.0, 1.0)]);
        let u0 = lift_initial(&spec, &[xi], &g, Side::Both).unwrap();
        let j = japanese(&[xi]);
        let ag = [C64::new(2.0, 4.0), C64::new(6.0, 8.0)];
        assert!((u0[0] - g[0] * j).norm() < 1e-14);
        assert!((u0[1] - ag[0]).norm() < 1e-14);
        assert!((u0[2] - g[1] * j).norm() < 1e-14);
        assert!((u0[3] - ag[1]).norm() < 1e-14);
    }

    #[test]
    fn w_round_trip() {
        let v = ScaledVec { log_scale: -3.0, v: cv(&[(1.0, 2.0), (0.5, -1.0), (0.0, 1.0), (2.0, 0.0)]) };
        let lam = [-1.0, 2.5];
        for rho in [0.0, 0.7, 500.0] {
            let w = w_transform(&v, &lam, 10.0, rho, 1.8).unwrap();
            let back = inverse_w_transform(&w, &lam, 10.0, rho, 1.8).unwrap();
            let diff = back.to_plain() - v.to_plain();
            assert!(diff.norm() <= 1e-12 * v.to_plain().norm(), "rho={rho}");
        }
    }

    #[test]
    fn w_equals_v_in_scalar_case() {
        let v = ScaledVec { log_scale: 0.0, v: cv(&[(0.2, 0.4)]) };
        let w = w_transform(&v, &[3.0], 2.0, 0.0, 1.5).unwrap();
        assert_eq!(w.to_plain(), v.v);
    }

    #[test]
    fn log_magnitude_above_threshold() {
        let v = ScaledVec { log_scale: 0.0, v: cv(&[(1.0, 0.0)]) };
        let w = w_transform(&v, &[0.0], 1e6, 1.0, 1.0).unwrap();
        assert!(w.log_scale > 600.0);
        assert!(w.log_norm().is_finite());
    }

    #[test]
    fn energy_check_excludes_low_radii() {
        let c = check_energy(&[0.0, 0.5], 1.0, 0, 4.0, 1e-8);
        assert!(!c.included && c.pass);
        let c = check_energy(&[0.0, 0.5], 8.0, 0, 4.0, 1e-8);
        assert!(c.included && !c.pass);
        let c = check_energy(&[0.0, -0.1, -0.2], 8.0, 0, 4.0, 1e-8);
        assert!(c.pass && c.max_ratio == 1.0);
    }
}
