//! Spectral NLS simulation and generator flows.

pub mod experiment;
pub mod generator;
pub mod grid;
pub mod nls;

pub use experiment::{initial_state, read_snapshot, run_trajectory, stability_experiment, write_snapshot, Trajectory};
pub use generator::{generator_flow, generator_flow_with, transform_distance, FlowOptions, FlowStats};
pub use grid::SpectralGrid;
pub use nls::{nls_step, Dealias, Scheme, SimConfig, Stepper};
