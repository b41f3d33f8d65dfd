//! Sweeps of the energy quantities over frequencies and mollifier widths.
//!
//! Everything that does not depend on `eps` (eigenvalues and the reduced
//! system along the time grid) is computed once per frequency and kept in a
//! [`FrequencyFrame`].

use serde::{Deserialize, Serialize};

use super::quantities::{quantities_along, sup, EnergyQuantities};
use super::symmetrizer::EnergyError;
use super::weight::{eps_for, gamma, RadiusEnvelope};
use crate::eigen::{compute_track, mollify_track, EigenTrack, MollifierSpec, RegTrack, TimeGrid};
use crate::par::Execution;
use crate::symbol::{japanese, ReducedAt, ReducedSystem};

#[derive(Debug, Clone)]
pub struct FrequencyFrame {
    pub xi: Vec<f64>,
    pub radius: f64,
    pub dir_index: usize,
    pub eig: EigenTrack,
    pub reduced: Vec<ReducedAt>,
}

impl FrequencyFrame {
    pub fn prepare(
        system: &ReducedSystem,
        grid: &TimeGrid,
        xi: &[f64],
        dir_index: usize,
        tol: f64,
    ) -> Result<Self, EnergyError> {
        let eig = compute_track(&system.spec, grid, xi, dir_index, tol)?;
        let reduced = (0..grid.points).map(|i| system.at(grid.t(i), xi)).collect::<Result<Vec<_>, _>>()?;
        Ok(FrequencyFrame { xi: xi.to_vec(), radius: eig.radius, dir_index, eig, reduced })
    }

    pub fn japanese(&self) -> f64 {
        japanese(&self.xi)
    }

    pub fn regularize(&self, grid: &TimeGrid, eps: f64, alpha: f64) -> Result<RegTrack, EnergyError> {
        Ok(mollify_track(&self.eig, grid, &MollifierSpec::new(eps), alpha)?)
    }

    pub fn quantities(&self, grid: &TimeGrid, eps: f64, alpha: f64) -> Result<Vec<EnergyQuantities>, EnergyError> {
        quantities_along(&self.regularize(grid, eps, alpha)?, &self.reduced)
    }
}

pub fn prepare_frames(
    system: &ReducedSystem,
    grid: &TimeGrid,
    freqs: &[(Vec<f64>, usize)],
    tol: f64,
    exec: Execution,
) -> Result<Vec<FrequencyFrame>, EnergyError> {
    exec.map(freqs, |(xi, d)| FrequencyFrame::prepare(system, grid, xi, *d, tol)).into_iter().collect()
}

/// Quantities along the grid for one frequency and one `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSeries {
    pub radius: f64,
    pub dir_index: usize,
    pub japanese: f64,
    pub eps: f64,
    pub quantities: Vec<EnergyQuantities>,
}

impl ScanSeries {
    pub fn sup(&self) -> EnergyQuantities {
        sup(&self.quantities)
    }
}

/// Every `(frame, eps)` combination, frame-major.
pub fn scan(
    frames: &[FrequencyFrame],
    grid: &TimeGrid,
    eps_list: &[f64],
    alpha: f64,
    exec: Execution,
) -> Result<Vec<ScanSeries>, EnergyError> {
    let jobs: Vec<(usize, f64)> =
        (0..frames.len()).flat_map(|f| eps_list.iter().map(move |e| (f, *e))).collect();
    exec.map(&jobs, |&(f, eps)| {
        let fr = &frames[f];
        Ok(ScanSeries {
            radius: fr.radius,
            dir_index: fr.dir_index,
            japanese: fr.japanese(),
            eps,
            quantities: fr.quantities(grid, eps, alpha)?,
        })
    })
    .into_iter()
    .collect()
}

/// Growth-rate envelope per radius with `eps = <xi>^{-gamma}`; the maximum is
/// taken over time and over every direction at that radius.
pub fn radius_envelopes(
    frames: &[FrequencyFrame],
    grid: &TimeGrid,
    alpha: f64,
    m: usize,
    exec: Execution,
) -> Result<Vec<RadiusEnvelope>, EnergyError> {
    let g = gamma(alpha, m);
    let rates = exec.map(frames, |fr| {
        let eps = eps_for(fr.japanese(), g);
        let qs = fr.quantities(grid, eps, alpha)?;
        Ok::<_, EnergyError>(qs.iter().map(|q| q.growth_rate()).fold(0.0, f64::max))
    });
    let mut out: Vec<RadiusEnvelope> = Vec::new();
    for (fr, rate) in frames.iter().zip(rates) {
        let rate = rate?;
        match out.iter_mut().find(|e| e.radius == fr.radius) {
            Some(e) => e.rate = e.rate.max(rate),
            None => out.push(RadiusEnvelope { radius: fr.radius, japanese: fr.japanese(), rate }),
        }
    }
    out.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    Ok(out)
}
