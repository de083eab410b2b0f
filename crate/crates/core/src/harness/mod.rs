//! Benchmark harness: configuration files, presets, run drivers and on-disk
//! artifacts.

pub mod config;
pub mod experiments;
pub mod output;
pub mod presets;
pub mod simulation;

pub use config::{parse_config, RunConfig};
pub use experiments::{
    check_operators, compare_abc_pml, h_convergence, p_convergence, pml_error, plane_wave_error, run_simulation,
    AbcComparison, OperatorCheck, PmlErrorReport, RunOutput,
};
pub use presets::{preset, PresetOverrides, PRESET_NAMES};
pub use simulation::Simulation;
