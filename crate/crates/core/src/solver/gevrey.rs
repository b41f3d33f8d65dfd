//! Gevrey initial data on the Fourier side and decay fitting of solutions.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::Frequency;
use crate::linalg::fit_line;
use crate::symbol::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("Gevrey data needs s0 > 1 and delta0 > 0 (got s0 = {s0}, delta0 = {delta0})")]
    BadData { s0: f64, delta0: f64 },
    #[error("decay fit needs at least {min} radii at or above Xi0, got {got}")]
    TooFewRadii { min: usize, got: usize },
    #[error("all {n} samples are below the 1e-300 floor")]
    FullyDecayed { n: usize },
    #[error("component mask has length {got}, system size is {m}")]
    Mask { got: usize, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seed")]
pub enum PhaseRule {
    #[default]
    Zero,
    Seeded(u64),
}

/// `|g0(xi)| = exp(-delta0 <xi>^{1/s0})` spread over the masked components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevreyData {
    pub s0: f64,
    pub delta0: f64,
    pub phase: PhaseRule,
    pub mask: Vec<bool>,
}

/// Data at one frequency: `g0 = exp(log_amplitude) * unit`, `|unit| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GevreySample {
    pub log_amplitude: f64,
    pub unit: DVector<C64>,
}

impl GevreySample {
    pub fn value(&self) -> DVector<C64> {
        &self.unit * C64::new(self.log_amplitude.exp(), 0.0)
    }
}

impl GevreyData {
    pub fn new(s0: f64, delta0: f64, phase: PhaseRule, mask: Vec<bool>) -> Result<Self, FitError> {
        if !(s0 > 1.0 && s0.is_finite() && delta0 > 0.0) {
            return Err(FitError::BadData { s0, delta0 });
        }
        Ok(GevreyData { s0, delta0, phase, mask })
    }

    pub fn log_amplitude(&self, jxi: f64) -> f64 {
        -self.delta0 * jxi.powf(1.0 / self.s0)
    }

    pub fn amplitude(&self, jxi: f64) -> f64 {
        self.log_amplitude(jxi).exp()
    }
}

/// Samples for every frequency in order. Phases are drawn sequentially from
/// one seeded stream, so the result depends only on the seed and the grid.
pub fn synthesize_gevrey(data: &GevreyData, freqs: &[Frequency]) -> Result<Vec<GevreySample>, FitError> {
    let m = data.mask.len();
    let active = data.mask.iter().filter(|b| **b).count();
    if active == 0 {
        return Err(FitError::Mask { got: 0, m });
    }
    let mut rng = match data.phase {
        PhaseRule::Zero => None,
        PhaseRule::Seeded(seed) => Some(ChaCha20Rng::seed_from_u64(seed)),
    };
    let w = 1.0 / (active as f64).sqrt();
    Ok(freqs
        .iter()
        .map(|f| {
            let unit = DVector::from_iterator(
                m,
                data.mask.iter().map(|on| {
                    let phase = rng.as_mut().map_or(0.0, |r| r.random::<f64>() * std::f64::consts::TAU);
                    if *on {
                        C64::from_polar(w, phase)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }),
            );
            GevreySample { log_amplitude: data.log_amplitude(f.japanese()), unit }
        })
        .collect())
}

pub const DECAY_FLOOR: f64 = 1e-300;
pub const MIN_DECAY_RADII: usize = 6;
pub const DECAY_RESIDUAL_CAP: f64 = 0.05;

/// `log |V(T, xi)|` at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub radius: f64,
    pub japanese: f64,
    pub log_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub delta: f64,
    pub s: f64,
    pub intercept: f64,
    /// `sqrt(1 - R^2)` of the regression.
    pub residual: f64,
    #[serde(rename = "Xi0")]
    pub xi0: f64,
    pub n_points: usize,
    /// Exponent `p` of the polynomial factor `<xi>^p` moved to the left-hand side.
    pub log_exponent: f64,
    pub corrected_delta: f64,
    pub corrected_residual: f64,
}

impl DecayFit {
    pub fn pass(&self) -> bool {
        self.delta > 0.0 && self.residual <= DECAY_RESIDUAL_CAP
    }
}

/// Regress `-log|V|` on `<xi>^{1/s}` over the points with `radius >= xi0`, and
/// a second time after removing a `<xi>^{log_exponent}` factor.
pub fn fit_decay(points: &[DecayPoint], s: f64, xi0: f64, log_exponent: f64) -> Result<DecayFit, FitError> {
    let used: Vec<&DecayPoint> = points.iter().filter(|p| p.radius >= xi0).collect();
    let mut radii: Vec<f64> = used.iter().map(|p| p.radius).collect();
    radii.dedup();
    if radii.len() < MIN_DECAY_RADII {
        return Err(FitError::TooFewRadii { min: MIN_DECAY_RADII, got: radii.len() });
    }
    let floor = DECAY_FLOOR.ln();
    let live: Vec<&&DecayPoint> = used.iter().filter(|p| p.log_abs >= floor).collect();
    if live.len() < 2 {
        return Err(FitError::FullyDecayed { n: used.len() });
    }
    let x: Vec<f64> = live.iter().map(|p| p.japanese.powf(1.0 / s)).collect();
    let y: Vec<f64> = live.iter().map(|p| -p.log_abs).collect();
    let yc: Vec<f64> = live.iter().map(|p| -p.log_abs + log_exponent * p.japanese.ln()).collect();
    let plain = fit_line(&x, &y).ok_or(FitError::TooFewRadii { min: MIN_DECAY_RADII, got: 1 })?;
    let corrected = fit_line(&x, &yc).ok_or(FitError::TooFewRadii { min: MIN_DECAY_RADII, got: 1 })?;
    Ok(DecayFit {
        delta: plain.slope,
        s,
        intercept: plain.intercept,
        residual: plain.rel_residual,
        xi0,
        n_points: live.len(),
        log_exponent,
        corrected_delta: corrected.slope,
        corrected_residual: corrected.rel_residual,
    })
}
