//! Gevrey thresholds and the linear weight `rho(t) = rho(0) - kappa t`.

use serde::{Deserialize, Serialize};

use super::symmetrizer::EnergyError;

/// `gamma = min{1/(1+alpha), 1/(alpha m)}`.
pub fn gamma(alpha: f64, m: usize) -> f64 {
    (1.0 / (1.0 + alpha)).min(1.0 / (alpha * m as f64))
}

/// `1 - gamma alpha`; `s` is admissible iff `1/s` exceeds it.
pub fn admissibility_bound(alpha: f64, m: usize) -> f64 {
    1.0 - gamma(alpha, m) * alpha
}

/// `1 + min{alpha, 1/(m-1)}`, with `1/0 = +inf` for `m = 1`.
pub fn s_star(alpha: f64, m: usize) -> f64 {
    let inv = if m <= 1 { f64::INFINITY } else { 1.0 / (m - 1) as f64 };
    1.0 + alpha.min(inv)
}

/// The earlier index `1 + alpha / m`.
pub fn s_yuzawa(alpha: f64, m: usize) -> f64 {
    1.0 + alpha / m as f64
}

pub fn is_admissible(s: f64, alpha: f64, m: usize) -> bool {
    s >= 1.0 && 1.0 / s > admissibility_bound(alpha, m)
}

/// `eps(xi) = <xi>^{-gamma}`.
pub fn eps_for(jxi: f64, gamma: f64) -> f64 {
    jxi.powf(-gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub alpha: f64,
    pub m: usize,
    pub s_star: f64,
    pub s_yuzawa: f64,
    pub improvement: f64,
}

pub fn threshold_table(alphas: &[f64], ms: &[usize]) -> Vec<ThresholdRow> {
    let mut rows = Vec::with_capacity(alphas.len() * ms.len());
    for &alpha in alphas {
        for &m in ms {
            let (s, y) = (s_star(alpha, m), s_yuzawa(alpha, m));
            rows.push(ThresholdRow { alpha, m, s_star: s, s_yuzawa: y, improvement: s - y });
        }
    }
    rows
}

/// Supremum over `t` of the energy growth rate at one radius, taken over all
/// directions, with `eps = <xi>^{-gamma}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEnvelope {
    pub radius: f64,
    pub japanese: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPlan {
    pub gamma: f64,
    pub s: f64,
    pub rho0: f64,
    pub kappa: f64,
    /// Radius from which on `2 kappa <xi>^{1/s}` dominates the growth rate.
    #[serde(rename = "Xi0")]
    pub xi0: f64,
    /// `max_{r >= Xi0} rate(r) / <r>^{1 - gamma alpha}`.
    #[serde(rename = "C")]
    pub c: f64,
}

impl WeightPlan {
    pub fn rho(&self, t: f64) -> f64 {
        self.rho0 - self.kappa * t
    }
}

/// Smallest `kappa` with `2 kappa <r>^{1/s} >= rate(r)` on the radii from the
/// maximizer of `rate(r) / <r>^{1/s}` on. Radii must be ascending.
pub fn plan_weight(
    s: f64,
    alpha: f64,
    m: usize,
    envelope: &[RadiusEnvelope],
    rho0: f64,
    horizon: f64,
) -> Result<WeightPlan, EnergyError> {
    let bound = admissibility_bound(alpha, m);
    if !is_admissible(s, alpha, m) {
        return Err(EnergyError::InadmissibleS { s, bound });
    }
    if envelope.is_empty() {
        return Err(EnergyError::TooFewSamples { min: 1, got: 0 });
    }
    let g = gamma(alpha, m);
    let ratio: Vec<f64> = envelope.iter().map(|e| e.rate / e.japanese.powf(1.0 / s)).collect();
    // first index attaining the maximum; every later radius has a smaller ratio
    let mut start = 0;
    for (k, r) in ratio.iter().enumerate() {
        if *r > ratio[start] {
            start = k;
        }
    }
    let kappa = ratio[start] / 2.0;
    let c = envelope[start..]
        .iter()
        .map(|e| e.rate / e.japanese.powf(1.0 - g * alpha))
        .fold(0.0, f64::max);
    let plan = WeightPlan { gamma: g, s, rho0, kappa, xi0: envelope[start].radius, c };
    if kappa * horizon >= rho0 {
        return Err(EnergyError::Unattainable { kappa_t: kappa * horizon, rho0, plan: Box::new(plan) });
    }
    Ok(plan)
}
