//! Frequency sampling: log-spaced radii times a fixed set of unit directions.

use serde::{Deserialize, Serialize};

use crate::symbol::japanese;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub xi: Vec<f64>,
    pub radius: f64,
    pub dir_index: usize,
}

impl Frequency {
    pub fn japanese(&self) -> f64 {
        japanese(&self.xi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

/// Radical inverse of `index` in `base` (van der Corput).
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// `{+1, -1}` for `n = 1`; otherwise `count` unit vectors from Halton points
/// in `[-1, 1]^n`, keeping those inside the unit ball (away from the origin)
/// so the normalized set is uniform on the sphere.
pub fn default_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    assert!(n <= PRIMES.len(), "direction set supports n <= {}", PRIMES.len());
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    while out.len() < count {
        let p: Vec<f64> = (0..n).map(|d| 2.0 * halton(index, PRIMES[d]) - 1.0).collect();
        index += 1;
        let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (0.1..=1.0).contains(&r) {
            out.push(p.iter().map(|x| x / r).collect());
        }
    }
    out
}

impl FrequencyGrid {
    pub fn new(radii: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self, String> {
        if radii.is_empty() || directions.is_empty() {
            return Err("frequency grid needs at least one radius and one direction".into());
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
            return Err("radii must be positive and strictly increasing".into());
        }
        let n = directions[0].len();
        for (k, d) in directions.iter().enumerate() {
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if d.len() != n || (norm - 1.0).abs() > 1e-14 {
                return Err(format!("direction {k} is not a unit {n}-vector"));
            }
        }
        Ok(FrequencyGrid { radii, directions })
    }

    /// Radii `2^k`, `k = k_min..=k_max`.
    pub fn dyadic(k_min: i32, k_max: i32, n: usize, n_dirs: usize) -> Self {
        let radii = (k_min..=k_max).map(|k| 2f64.powi(k)).collect();
        FrequencyGrid { radii, directions: default_directions(n, n_dirs) }
    }

    pub fn dimension(&self) -> usize {
        self.directions[0].len()
    }

    /// Radius-major list of sample frequencies.
    pub fn frequencies(&self) -> Vec<Frequency> {
        let mut out = Vec::with_capacity(self.radii.len() * self.directions.len());
        for &r in &self.radii {
            for (d, dir) in self.directions.iter().enumerate() {
                out.push(Frequency { xi: dir.iter().map(|x| x * r).collect(), radius: r, dir_index: d });
            }
        }
        out
    }

    pub fn pairs(&self) -> Vec<(Vec<f64>, usize)> {
        self.frequencies().into_iter().map(|f| (f.xi, f.dir_index)).collect()
    }
}
