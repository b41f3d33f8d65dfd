//! Batch front end: scenarios, stage orchestration and deterministic output.

mod emit;
mod pipeline;
mod scenario;

pub use emit::{fmt_f64, Cell, Doc, Format, Table};
pub use pipeline::{
    run_dir, run_pipeline, run_thresholds, spread, Emitter, FileRecord, PipelineError, RunManifest, RunOptions, Stage,
    StageRecord, ADJUGATE_TOL, CONSISTENCY_MAX_RADIUS, CONSISTENCY_TOL, EXIT_CONFIG, ORDER_ZERO_TOL, PROP_SPREAD_CAP,
    VERSION,
};
pub use scenario::{CheckConfig, ConfigError, DataConfig, EpsConfig, GridConfig, Scenario, BUILTIN_NAMES};
