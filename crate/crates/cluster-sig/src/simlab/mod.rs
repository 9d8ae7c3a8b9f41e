//! Monte Carlo laboratory: size and power studies for the cluster tests.
//!
//! The lab has three layers. [`dgp`] generates synthetic panels from a
//! declarative process description. [`config`] defines experiment cells
//! (process + test + replication settings) with a JSON round-trip so studies
//! are storable documents. [`runner`] executes cells in parallel and
//! aggregates rejection rates, with deterministic substreams making every
//! number independent of scheduling.

pub mod config;
pub mod dgp;
pub mod runner;

pub use config::{ConfigFile, ExperimentConfig, SplitChoice, Suite, SweepConfig, SweepParameter, TestSpec};
pub use dgp::{gen_panel, gen_panel_attempt, group_sizes, DgpKind, DgpSpec, Residuals};
pub use runner::{
    binomial_band, preset, preset_names, run_cell, run_power_curve, run_suite, write_cells_csv,
    write_curve_csv, write_p_values_csv, CellResult, DEFAULT_MASTER_SEED,
};
