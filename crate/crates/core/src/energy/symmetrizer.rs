//! One block of the quasi-Vandermonde symmetrizer.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::eigen::EigenError;
use crate::symbol::SystemError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("symmetrizer nodes {i} and {j} collide ({mu_i} vs {mu_j})")]
    NodeCollision { i: usize, j: usize, mu_i: f64, mu_j: f64 },
    #[error("scaling fit needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("scaling fit samples span {decades:.3} decades, need at least {min}")]
    NarrowSweep { decades: f64, min: f64 },
    #[error("s = {s} is inadmissible: need 1/s > {bound}")]
    InadmissibleS { s: f64, bound: f64 },
    #[error("weight unattainable: kappa*T = {kappa_t} >= rho0 = {rho0}")]
    Unattainable { kappa_t: f64, rho0: f64, plan: Box<super::weight::WeightPlan> },
}

pub const NODE_COLLISION_TOL: f64 = 1e-14;

/// `H[k][j] = mu_j^k` with `mu_j = lambda_{j,eps} / <xi>`, plus its
/// closed-form determinant and Lagrange-basis inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizerBlock {
    pub nodes: Vec<f64>,
    pub h: DMatrix<f64>,
    pub det: f64,
    pub inv: DMatrix<f64>,
}

/// `[H]_{kj} = x_j^k`.
pub fn vandermonde(nodes: &[f64]) -> DMatrix<f64> {
    let m = nodes.len();
    DMatrix::from_fn(m, m, |k, j| nodes[j].powi(k as i32))
}

/// Coefficients (ascending powers) of the Lagrange basis polynomial for node `r`.
fn lagrange_coeffs(nodes: &[f64], r: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut denom = 1.0;
    for (j, &x) in nodes.iter().enumerate() {
        if j == r {
            continue;
        }
        let mut next = vec![0.0; poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * x;
        }
        poly = next;
        denom *= nodes[r] - x;
    }
    poly.iter().map(|c| c / denom).collect()
}

impl SymmetrizerBlock {
    pub fn from_nodes(nodes: &[f64]) -> Result<Self, EnergyError> {
        let m = nodes.len();
        let scale = nodes.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let mut det = 1.0;
        for j in 0..m {
            for i in 0..j {
                let d = nodes[j] - nodes[i];
                if d.abs() < NODE_COLLISION_TOL * scale {
                    return Err(EnergyError::NodeCollision { i, j, mu_i: nodes[i], mu_j: nodes[j] });
                }
                det *= d;
            }
        }
        let mut inv = DMatrix::zeros(m, m);
        for r in 0..m {
            for (k, c) in lagrange_coeffs(nodes, r).into_iter().enumerate() {
                inv[(r, k)] = c;
            }
        }
        Ok(SymmetrizerBlock { nodes: nodes.to_vec(), h: vandermonde(nodes), det, inv })
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    /// `d/dt H` given `d/dt mu_j`.
    pub fn dt(&self, dnodes: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |k, j| {
            if k == 0 {
                0.0
            } else {
                k as f64 * self.nodes[j].powi(k as i32 - 1) * dnodes[j]
            }
        })
    }
}

/// Block built from regularized eigenvalues at one `(t, xi)`.
pub fn build_block(lam_eps: &[f64], jxi: f64) -> Result<SymmetrizerBlock, EnergyError> {
    let nodes: Vec<f64> = lam_eps.iter().map(|l| l / jxi).collect();
    SymmetrizerBlock::from_nodes(&nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_closed_forms() {
        let b = SymmetrizerBlock::from_nodes(&[0.3, 1.1]).unwrap();
        assert!((b.det - 0.8).abs() < 1e-15);
        let expect = DMatrix::from_row_slice(2, 2, &[1.1, -1.0, -0.3, 1.0]) / 0.8;
        assert!((&b.inv - expect).norm() < 1e-14);
    }

    #[test]
    fn separated_pair_det_is_eps_alpha() {
        let (eps, jxi): (f64, f64) = (0.125, 17.0);
        let b = build_block(&[0.0, eps * jxi], jxi).unwrap();
        assert!((b.det - eps).abs() < 1e-15);
    }

    #[test]
    fn inverse_of_four_nodes() {
        let b = SymmetrizerBlock::from_nodes(&[-0.9, -0.2, 0.35, 0.8]).unwrap();
        let res = &b.h * &b.inv - DMatrix::identity(4, 4);
        assert!(res.norm() < 1e-12);
    }

    #[test]
    fn collision_is_reported() {
        assert!(matches!(
            SymmetrizerBlock::from_nodes(&[0.5, 0.5]),
            Err(EnergyError::NodeCollision { i: 0, j: 1, .. })
        ));
    }

    #[test]
    fn scalar_block_is_identity() {
        let b = SymmetrizerBlock::from_nodes(&[4.0]).unwrap();
        assert_eq!(b.h[(0, 0)], 1.0);
        assert_eq!(b.inv[(0, 0)], 1.0);
        assert_eq!(b.det, 1.0);
    }
}
