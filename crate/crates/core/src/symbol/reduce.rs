//! Block Sylvester form of the reduced `m^2 x m^2` system.
//!
//! Unknown layout: component `(i - 1) m + j` (1-based) carries
//! `D_t^{j-1} <xi>^{m-j} u_i`. The principal part is block diagonal with `m`
//! copies of the `<xi>`-normalized companion matrix of `det(tau I - A)`; the
//! lower-order part only touches the last row of each block.

use nalgebra::DMatrix;

use super::charpoly::{symbol_at, SymbolAt, C64};
use super::expr::Side;
use super::system::{SystemError, SystemSpec};

/// `<xi> = (1 + |xi|^2)^{1/2}`.
pub fn japanese(xi: &[f64]) -> f64 {
    (1.0 + xi.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Evaluators for `(𝒜(t, xi), ℒ(t, xi))`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub spec: SystemSpec,
    /// Which one-sided derivative to take at coefficient kinks.
    pub side: Side,
}

/// `𝒜` and `ℒ` at one point, plus the symbol data they came from.
#[derive(Debug, Clone)]
pub struct ReducedAt {
    pub principal_block: DMatrix<f64>,
    pub lower: DMatrix<C64>,
    pub symbol: SymbolAt,
}

impl ReducedAt {
    pub fn principal(&self) -> DMatrix<f64> {
        let m = self.principal_block.nrows();
        let mut out = DMatrix::zeros(m * m, m * m);
        for blk in 0..m {
            out.view_mut((blk * m, blk * m), (m, m)).copy_from(&self.principal_block);
        }
        out
    }

    /// `𝒜 + ℒ` as one complex matrix.
    pub fn total(&self) -> DMatrix<C64> {
        let mut out = self.lower.clone();
        let m = self.principal_block.nrows();
        for blk in 0..m {
            for r in 0..m {
                for c in 0..m {
                    out[(blk * m + r, blk * m + c)] += C64::new(self.principal_block[(r, c)], 0.0);
                }
            }
        }
        out
    }
}

/// One companion block `<xi> * [[0,1,..],[..],[-b_m <xi>^{-m}, ..., -b_1 <xi>^{-1}]]`.
pub fn companion_block(b: &[f64], jxi: f64) -> DMatrix<f64> {
    let m = b.len();
    let mut blk = DMatrix::zeros(m, m);
    for r in 0..m.saturating_sub(1) {
        blk[(r, r + 1)] = jxi;
    }
    // entry (m, r) for r = 1..m is -b_{m-r+1} <xi>^{-(m-r+1)} * <xi>
    for r in 1..=m {
        let k = m - r + 1;
        blk[(m - 1, r - 1)] = -b[k - 1] * jxi.powi(1 - k as i32);
    }
    blk
}

pub fn to_block_sylvester(spec: &SystemSpec) -> ReducedSystem {
    ReducedSystem { spec: spec.clone(), side: Side::Both }
}

impl ReducedSystem {
    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn dim(&self) -> usize {
        self.spec.m * self.spec.m
    }

    pub fn at(&self, t: f64, xi: &[f64]) -> Result<ReducedAt, SystemError> {
        let m = self.spec.m;
        let jxi = japanese(xi);
        let symbol = symbol_at(&self.spec, t, xi, self.side)?;
        let principal_block = companion_block(&symbol.b, jxi);
        let mut lower = DMatrix::zeros(m * m, m * m);
        for i in 0..m {
            for j in 0..m {
                for (r, cr) in symbol.lower.coeffs.iter().enumerate() {
                    let scale = jxi.powi(r as i32 + 1 - m as i32);
                    lower[(i * m + m - 1, j * m + r)] = cr[(i, j)] * scale;
                }
            }
        }
        Ok(ReducedAt { principal_block, lower, symbol })
    }

    pub fn principal(&self, t: f64, xi: &[f64]) -> Result<DMatrix<f64>, SystemError> {
        Ok(self.at(t, xi)?.principal())
    }

    pub fn lower(&self, t: f64, xi: &[f64]) -> Result<DMatrix<C64>, SystemError> {
        Ok(self.at(t, xi)?.lower)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave() -> SystemSpec {
        SystemSpec::from_strs(1.0, 1.0, &[&[&["0"], &["1"]], &[&["t^2"], &["0"]]], &[&["0", "0"], &["0", "0"]])
            .unwrap()
    }

    #[test]
    fn wave_block_matches_hand_expansion() {
        let (t, xi) = (0.7, 3.0);
        let red = to_block_sylvester(&wave());
        let at = red.at(t, &[xi]).unwrap();
        let j = japanese(&[xi]);
        let b2 = -t * t * xi * xi;
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, j, -b2 / j, 0.0]);
        assert!((at.principal_block - expect).norm() < 1e-13);
    }

    #[test]
    fn off_block_entries_are_zero() {
        let red = to_block_sylvester(&wave());
        let p = red.principal(0.5, &[2.0]).unwrap();
        assert_eq!(p[(0, 2)], 0.0);
        assert_eq!(p[(3, 1)], 0.0);
        assert_eq!(p.view((0, 0), (2, 2)), p.view((2, 2), (2, 2)));
    }

    #[test]
    fn lower_only_on_block_last_rows() {
        let red = to_block_sylvester(&wave());
        let l = red.lower(0.5, &[2.0]).unwrap();
        for r in [0usize, 2] {
            assert!(l.row(r).iter().all(|z| z.norm() == 0.0));
        }
        // C_21 = -i * 2 t xi, column r = 0 scaled by <xi>^{-1}
        let expect = C64::new(0.0, -2.0 * 0.5 * 2.0 / japanese(&[2.0]));
        assert!((l[(3, 0)] - expect).norm() < 1e-14);
    }

    #[test]
    fn constant_system_has_zero_lower_part() {
        let s = SystemSpec::from_strs(1.0, 1.0, &[&[&["1"], &["0"]], &[&["0"], &["2"]]], &[&["0", "0"], &["0", "0"]])
            .unwrap();
        let l = to_block_sylvester(&s).lower(0.3, &[5.0]).unwrap();
        assert!(l.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn scalar_case_is_the_original_system() {
        let s = SystemSpec::from_strs(1.0, 1.0, &[&[&["2 + t"]]], &[&["cos(t)"]]).unwrap();
        let at = to_block_sylvester(&s).at(0.25, &[3.0]).unwrap();
        let (a, b) = s.eval(0.25, &[3.0]).unwrap();
        assert_eq!(at.principal_block[(0, 0)], a[(0, 0)]);
        assert_eq!(at.lower[(0, 0)], C64::new(b[(0, 0)], 0.0));
    }
}
