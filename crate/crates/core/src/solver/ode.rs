//! Dormand–Prince 5(4) with Hairer's continuous extension, for complex
//! linear-in-state systems `y' = f(t, y)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbol::C64;

type CVec = DVector<C64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}: h = {h:e} (last error norm {err:e})")]
    StepUnderflow { t: f64, h: f64, err: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("output times must be ascending and inside [{t0}, {t1}]")]
    BadOutput { t0: f64, t1: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-9, atol: 1e-12, max_step: f64::INFINITY, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
    /// Largest scaled local error estimate among accepted steps (`<= 1`).
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<CVec>,
    pub stats: OdeStats,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy(y: &CVec, terms: &[(f64, &CVec)], h: f64) -> CVec {
    let mut out = y.clone();
    for (c, k) in terms {
        if *c != 0.0 {
            out.axpy(C64::new(c * h, 0.0), *k, C64::new(1.0, 0.0));
        }
    }
    out
}

fn scaled_norm(err: &CVec, y0: &CVec, y1: &CVec, opts: &OdeOptions) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrate from `t_out[0]` to `t_out.last()`, returning the state at every
/// output time (dense output between steps).
pub fn integrate<F>(f: F, y0: &CVec, t_out: &[f64], opts: &OdeOptions) -> Result<OdeSolution, OdeError>
where
    F: Fn(f64, &CVec) -> CVec,
{
    let (t0, t1) = (t_out[0], *t_out.last().expect("at least one output time"));
    if t_out.windows(2).any(|w| w[1] < w[0]) {
        return Err(OdeError::BadOutput { t0, t1 });
    }
    let mut stats = OdeStats::default();
    let mut ys = Vec::with_capacity(t_out.len());
    ys.push(y0.clone());
    let mut next_out = 1;
    if t1 == t0 {
        while ys.len() < t_out.len() {
            ys.push(y0.clone());
        }
        return Ok(OdeSolution { t: t_out.to_vec(), y: ys, stats });
    }

    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = f(t, &y);
    stats.evals += 1;
    let mut h = initial_step(&f, t, &y, &k1, t1 - t0, opts, &mut stats);
    let mut last_err = 0.0;

    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        h = h.min(opts.max_step).min(t1 - t);
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t, h, err: last_err });
        }
        let k2 = f(t + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = f(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(t + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(t + h, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y1 = axpy(&y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
        let k7 = f(t + h, &y1);
        stats.evals += 6;

        let err_vec = axpy(
            &CVec::zeros(y.len()),
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            h,
        );
        let err = scaled_norm(&err_vec, &y, &y1, opts);
        last_err = err;
        if !err.is_finite() {
            return Err(OdeError::NonFinite { t });
        }
        if err <= 1.0 {
            stats.accepted += 1;
            stats.max_error = stats.max_error.max(err);
            let t_new = if t + h >= t1 { t1 } else { t + h };
            if next_out < t_out.len() && t_out[next_out] <= t_new {
                let ydiff = &y1 - &y;
                let bspl = &k1 * C64::new(h, 0.0) - &ydiff;
                let rc4 = &ydiff - &k7 * C64::new(h, 0.0) - &bspl;
                let rc5 = axpy(
                    &CVec::zeros(y.len()),
                    &[(D1, &k1), (D3, &k3), (D4, &k4), (D5, &k5), (D6, &k6), (D7, &k7)],
                    h,
                );
                while next_out < t_out.len() && t_out[next_out] <= t_new {
                    let th = (t_out[next_out] - t) / h;
                    let th1 = 1.0 - th;
                    let inner = &rc4 + &rc5 * C64::new(th1, 0.0);
                    let inner = &bspl + inner * C64::new(th, 0.0);
                    let inner = &ydiff + inner * C64::new(th1, 0.0);
                    let yo = &y + inner * C64::new(th, 0.0);
                    if yo.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                        return Err(OdeError::NonFinite { t: t_out[next_out] });
                    }
                    ys.push(if t_out[next_out] == t_new { y1.clone() } else { yo });
                    next_out += 1;
                }
            }
            t = t_new;
            y = y1;
            k1 = k7;
        } else {
            stats.rejected += 1;
        }
        let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
        h *= if err > 1.0 { fac.min(1.0) } else { fac };
    }
    while ys.len() < t_out.len() {
        ys.push(y.clone());
    }
    Ok(OdeSolution { t: t_out.to_vec(), y: ys, stats })
}

fn initial_step<F>(f: &F, t: f64, y: &CVec, k1: &CVec, span: f64, opts: &OdeOptions, stats: &mut OdeStats) -> f64
where
    F: Fn(f64, &CVec) -> CVec,
{
    let sc = |v: &C64, y: &C64| v.norm() / (opts.atol + opts.rtol * y.norm());
    let n = y.len().max(1) as f64;
    let d0 = (y.iter().zip(y.iter()).map(|(a, b)| sc(a, b).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (k1.iter().zip(y.iter()).map(|(a, b)| sc(a, b).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(opts.max_step).min(span);
    let y1 = y + k1 * C64::new(h0, 0.0);
    let k2 = f(t + h0, &y1);
    stats.evals += 1;
    let d2 = ((&k2 - k1).iter().zip(y.iter()).map(|(a, b)| sc(a, b).powi(2)).sum::<f64>() / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(opts.max_step).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn scalar_rotation() {
        // y' = i a y
        let a = 7.0;
        let ts: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let sol = integrate(|_, y| y * c(0.0, a), &CVec::from_element(1, c(1.0, 0.0)), &ts, &OdeOptions::default())
            .unwrap();
        for (t, y) in ts.iter().zip(&sol.y) {
            let exact = c(0.0, a * t).exp();
            assert!((y[0] - exact).norm() < 1e-8, "t={t}");
        }
        assert!(sol.stats.max_error <= 1.0);
    }

    #[test]
    fn decaying_exponential() {
        let ts = [0.0, 0.5, 2.0];
        let sol =
            integrate(|_, y| y * c(-1.0, 0.0), &CVec::from_element(1, c(2.0, 0.0)), &ts, &OdeOptions::default())
                .unwrap();
        assert!((sol.y[2][0].re - 2.0 * (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_between_steps() {
        // y' = 2t, cubic-exact in the interpolant
        let ts: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let opts = OdeOptions { max_step: 0.5, ..OdeOptions::default() };
        let sol = integrate(|t, _| CVec::from_element(1, c(2.0 * t, 0.0)), &CVec::zeros(1), &ts, &opts).unwrap();
        for (t, y) in ts.iter().zip(&sol.y) {
            assert!((y[0].re - t * t).abs() < 1e-12);
        }
    }

    #[test]
    fn max_step_respected() {
        let opts = OdeOptions { max_step: 0.01, ..OdeOptions::default() };
        let sol = integrate(|_, y| y * c(0.0, 1.0), &CVec::from_element(1, c(1.0, 0.0)), &[0.0, 1.0], &opts).unwrap();
        assert!(sol.stats.accepted >= 100);
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y^2-like growth through a time-dependent rate 1/(1.0001 - t)^3
        let r = integrate(
            |t, y| y * c(1.0 / (1.0001 - t).powi(3), 0.0),
            &CVec::from_element(1, c(1.0, 0.0)),
            &[0.0, 1.0],
            &OdeOptions::default(),
        );
        assert!(r.is_err());
    }
}
