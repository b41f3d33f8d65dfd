//! Log-log fits of the t-supremum of each quantity against `eps`.

use serde::{Deserialize, Serialize};

use super::quantities::EnergyQuantities;
use super::symmetrizer::EnergyError;
use crate::linalg::fit_line;

pub const SCALING_MARGIN: f64 = 0.15;
pub const MIN_SCALING_SAMPLES: usize = 5;
pub const MIN_SCALING_DECADES: f64 = 2.0;

pub const QUANTITY_NAMES: [&str; 4] = ["q1", "q2", "q3", "q4"];

/// Exponents of `eps` in the upper bounds for `q1, q2, q3 / <xi>, q4`.
pub fn scaling_targets(alpha: f64, m: usize) -> [f64; 4] {
    [-1.0, -1.0, alpha, alpha * (1.0 - m as f64)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityFit {
    pub name: String,
    /// `None` when every sample is zero.
    pub slope: Option<f64>,
    /// `exp(intercept)`: the empirical constant in `q <= c eps^slope`.
    pub constant: Option<f64>,
    pub rel_residual: Option<f64>,
    pub target: f64,
    pub margin: f64,
    pub identically_better: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub japanese: f64,
    pub eps: Vec<f64>,
    pub fits: Vec<QuantityFit>,
}

impl ScalingReport {
    pub fn pass(&self) -> bool {
        self.fits.iter().all(|f| f.pass)
    }

    pub fn fit(&self, name: &str) -> Option<&QuantityFit> {
        self.fits.iter().find(|f| f.name == name)
    }
}

/// `sups[k]` is the t-supremum of the quantities at `eps[k]`, all at one
/// frequency with Japanese bracket `jxi`. `q3` is divided by `jxi` before
/// fitting so its constant is the one multiplying `eps^alpha <xi>`.
pub fn fit_scaling(
    eps: &[f64],
    sups: &[EnergyQuantities],
    jxi: f64,
    alpha: f64,
    m: usize,
) -> Result<ScalingReport, EnergyError> {
    if eps.len() < MIN_SCALING_SAMPLES || sups.len() != eps.len() {
        return Err(EnergyError::TooFewSamples { min: MIN_SCALING_SAMPLES, got: eps.len().min(sups.len()) });
    }
    let (lo, hi) = eps.iter().fold((f64::INFINITY, 0.0f64), |(a, b), e| (a.min(*e), b.max(*e)));
    let decades = (hi / lo).log10();
    if decades < MIN_SCALING_DECADES - 1e-9 {
        return Err(EnergyError::NarrowSweep { decades, min: MIN_SCALING_DECADES });
    }
    let targets = scaling_targets(alpha, m);
    let mut fits = Vec::with_capacity(4);
    for (k, name) in QUANTITY_NAMES.iter().enumerate() {
        let (x, y): (Vec<f64>, Vec<f64>) = eps
            .iter()
            .zip(sups)
            .map(|(e, q)| {
                let v = q.as_array()[k] / if k == 2 { jxi } else { 1.0 };
                (e.ln(), v)
            })
            .filter(|(_, v)| *v > 0.0)
            .map(|(x, v)| (x, v.ln()))
            .unzip();
        let fit = if x.len() >= 2 { fit_line(&x, &y) } else { None };
        let identically_better = fit.is_none();
        let pass = match fit {
            Some(f) => f.slope >= targets[k] - SCALING_MARGIN,
            None => true,
        };
        fits.push(QuantityFit {
            name: name.to_string(),
            slope: fit.map(|f| f.slope),
            constant: fit.map(|f| f.intercept.exp()),
            rel_residual: fit.map(|f| f.rel_residual),
            target: targets[k],
            margin: SCALING_MARGIN,
            identically_better,
            pass,
        });
    }
    Ok(ScalingReport { japanese: jxi, eps: eps.to_vec(), fits })
}
