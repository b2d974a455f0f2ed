//! Experiment orchestration: configuration, canonical experiments,
//! reports and file exports.
//!
//! Every run is driven by an [`ExperimentConfig`] (TOML on disk, or one of
//! the built-in defaults), is deterministic given its seeds, and emits a
//! JSON report plus CSV series into its output directory. Timings go to
//! stderr, never into the artifacts, so reruns are byte-identical.

mod config;
mod experiments;
mod io;
mod report;

pub use config::{
    default_config, load_config, BoundaryKind, DomainConfig, ExperimentConfig,
    ExperimentKind, InitialData, ModelConfig, NoiseConfig, NoiseKind, OutputConfig,
    SolverConfig,
};
pub use experiments::{
    run_bounds_only, run_entropy, run_hole_fill, run_propagation, run_simulate,
    run_validate,
};
pub use io::{config_hash, read_trajectory, write_svg_chart, write_trajectory};
pub use report::{
    BoundCheck, EntropyReport, HoleFillReport, HoleFillSeedReport, PropagationReport,
    PropagationSeedReport, Report, SimulateReport, SuiteResult, ValidateReport, Verdict,
};

/// Exit codes of the command-line front end.
pub mod exit_code {
    pub const PASS: i32 = 0;
    pub const BOUND_VIOLATION: i32 = 2;
    pub const SOLVER_FAILURE: i32 = 3;
    pub const CONFIG_ERROR: i32 = 4;
}
