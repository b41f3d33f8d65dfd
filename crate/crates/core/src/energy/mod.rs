//! Symmetrizer construction, the energy quantities, their `eps`-scaling and
//! the weight plan.

mod quantities;
mod scaling;
mod scan;
mod symmetrizer;
mod weight;

pub use quantities::{
    conjugate_full, detH_log_derivative, energy_quantities, log_det_finite_difference, quantities_along, sup,
    EnergyQuantities,
};
pub use scaling::{
    fit_scaling, scaling_targets, QuantityFit, ScalingReport, MIN_SCALING_DECADES, MIN_SCALING_SAMPLES,
    QUANTITY_NAMES, SCALING_MARGIN,
};
pub use scan::{prepare_frames, radius_envelopes, scan, FrequencyFrame, ScanSeries};
pub use symmetrizer::{build_block, vandermonde, EnergyError, SymmetrizerBlock, NODE_COLLISION_TOL};
pub use weight::{
    admissibility_bound, eps_for, gamma, is_admissible, plan_weight, s_star, s_yuzawa, threshold_table,
    RadiusEnvelope, ThresholdRow, WeightPlan,
};
