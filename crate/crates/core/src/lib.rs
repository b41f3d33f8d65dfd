//! Weakly hyperbolic first-order systems with Hölder-in-time eigenvalues:
//! block Sylvester reduction, mollified-eigenvalue symmetrizers, energy
//! scaling checks and frequency-domain Gevrey decay.
//!
//! The pipeline runs in the order of the modules below:
//! [`symbol`] → [`eigen`] → [`energy`] → [`solver`], orchestrated by [`runner`].

pub mod eigen;
pub mod energy;
pub mod linalg;
pub mod par;
pub mod runner;
pub mod solver;
pub mod symbol;
