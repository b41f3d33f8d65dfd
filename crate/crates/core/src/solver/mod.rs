//! Frequency-domain solutions: both formulations per frequency, the `W`
//! transform with its energy check, Gevrey data and decay fits.

mod gevrey;
mod grid;
mod mode;
mod ode;

pub use gevrey::{
    fit_decay, synthesize_gevrey, DecayFit, DecayPoint, FitError, GevreyData, GevreySample, PhaseRule,
    DECAY_FLOOR, DECAY_RESIDUAL_CAP, MIN_DECAY_RADII,
};
pub use grid::{default_directions, halton, Frequency, FrequencyGrid};
pub use mode::{
    check_energy, inverse_w_transform, lift_initial, solve_mode, solve_original, solve_reduced,
    time_derivatives_at_zero, w_growth_rate, w_log_norms, w_transform, CVec, EnergyCheck, ModeTrajectory, ScaledVec,
    SolveError, SolveOptions, LOG_MAGNITUDE_THRESHOLD,
};
pub use ode::{integrate, OdeError, OdeOptions, OdeSolution, OdeStats};
