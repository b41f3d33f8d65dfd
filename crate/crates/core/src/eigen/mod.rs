//! Eigenvalue fields of the principal symbol and their mollified,
//! separated regularization.

mod field;
mod mollify;

pub use field::{
    check_uniform_property, compute_eigenvalues, compute_track, eigenvalues_at, estimate_holder, holder_seminorm,
    real_roots, uniform_ratio, EigenError, EigenField, EigenTrack, TimeGrid, UniformWitness, UniformityReport,
    DEFAULT_COINCIDENCE_TOL, DEFAULT_HYPERBOLICITY_TOL,
};
pub use mollify::{
    bump, bump_derivative, bump_mass, convolve, mollify, mollify_track, verify_prop_roots, MollifierSpec,
    PropRootsReport, RegTrack, RegularizedEigenField,
};
