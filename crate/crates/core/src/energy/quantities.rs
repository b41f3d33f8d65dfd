//! The four terms of the energy identity at one `(t, xi, eps)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::symmetrizer::{build_block, EnergyError, SymmetrizerBlock};
use crate::eigen::{RegTrack, TimeGrid};
use crate::linalg::{skew_norm, spectral_norm_real, to_complex};
use crate::symbol::{ReducedAt, C64};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyQuantities {
    /// `|d_t det H / det H|`
    pub q1: f64,
    /// `‖H^{-1} d_t H‖`
    pub q2: f64,
    /// `‖H^{-1} 𝒜 H - (H^{-1} 𝒜 H)^*‖`
    pub q3: f64,
    /// `‖H^{-1} ℒ H - (H^{-1} ℒ H)^*‖`
    pub q4: f64,
}

impl EnergyQuantities {
    pub fn as_array(&self) -> [f64; 4] {
        [self.q1, self.q2, self.q3, self.q4]
    }

    /// Coefficient bounding `d_t |W|^2 / |W|^2` apart from the weight term.
    pub fn growth_rate(&self) -> f64 {
        2.0 * self.q1 + 2.0 * self.q2 + self.q3 + self.q4
    }

    pub fn max(self, other: Self) -> Self {
        EnergyQuantities {
            q1: self.q1.max(other.q1),
            q2: self.q2.max(other.q2),
            q3: self.q3.max(other.q3),
            q4: self.q4.max(other.q4),
        }
    }
}

/// `|sum_{i<j} (d lambda_j - d lambda_i) / (lambda_j - lambda_i)|`.
///
/// Scaling all nodes by `<xi>^{-1}` leaves the ratio unchanged, so this is
/// the log-derivative of the block determinant directly.
#[allow(non_snake_case)]
pub fn detH_log_derivative(lam: &[f64], dlam: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..lam.len() {
        for i in 0..j {
            s += (dlam[j] - dlam[i]) / (lam[j] - lam[i]);
        }
    }
    s.abs()
}

/// Fourth-order centered difference of `log det H` on the grid samples of
/// one track (interior indices `2 <= i < N - 2`).
pub fn log_det_finite_difference(track: &RegTrack, grid: &TimeGrid, i: usize) -> f64 {
    let log_det = |k: usize| {
        let (lam, _) = track.at(k);
        let mut s = 0.0;
        for j in 0..lam.len() {
            for l in 0..j {
                s += (lam[j] - lam[l]).ln();
            }
        }
        s
    };
    let h = grid.step();
    (-log_det(i + 2) + 8.0 * log_det(i + 1) - 8.0 * log_det(i - 1) + log_det(i - 2)) / (12.0 * h)
}

/// `H^{-1} M H` for a block-diagonal `H` with identical blocks, `M` of size `m^2`.
pub fn conjugate_full(block: &SymmetrizerBlock, mat: &DMatrix<C64>) -> DMatrix<C64> {
    let m = block.m();
    let h = to_complex(&block.h);
    let inv = to_complex(&block.inv);
    let mut out = DMatrix::zeros(m * m, m * m);
    for bi in 0..m {
        for bj in 0..m {
            let sub = mat.view((bi * m, bj * m), (m, m));
            if sub.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            let prod = &inv * sub * &h;
            out.view_mut((bi * m, bj * m), (m, m)).copy_from(&prod);
        }
    }
    out
}

/// All four quantities from the regularized eigenvalues at one sample and
/// the reduced system at the same `(t, xi)`.
pub fn energy_quantities(
    lam_eps: &[f64],
    dlam_eps: &[f64],
    jxi: f64,
    reduced: &ReducedAt,
) -> Result<EnergyQuantities, EnergyError> {
    let block = build_block(lam_eps, jxi)?;
    let dnodes: Vec<f64> = dlam_eps.iter().map(|d| d / jxi).collect();
    let q1 = detH_log_derivative(lam_eps, dlam_eps);
    let q2 = spectral_norm_real(&(&block.inv * block.dt(&dnodes)));
    let x = &block.inv * &reduced.principal_block * &block.h;
    let q3 = spectral_norm_real(&(&x - x.transpose()));
    let q4 = skew_norm(&conjugate_full(&block, &reduced.lower));
    Ok(EnergyQuantities { q1, q2, q3, q4 })
}

/// Quantities at every grid sample of one regularized track; `reduced[i]`
/// must be the reduced system at `grid.t(i)` and the track's frequency.
pub fn quantities_along(track: &RegTrack, reduced: &[ReducedAt]) -> Result<Vec<EnergyQuantities>, EnergyError> {
    let jxi = track.japanese();
    reduced
        .iter()
        .enumerate()
        .map(|(i, at)| {
            let (lam, dlam) = track.at(i);
            energy_quantities(&lam, &dlam, jxi, at)
        })
        .collect()
}

/// Componentwise supremum over a slice (zero for an empty slice).
pub fn sup(qs: &[EnergyQuantities]) -> EnergyQuantities {
    qs.iter().fold(EnergyQuantities::default(), |a, q| a.max(*q))
}
