//! Experiment presets, configuration, reference solutions, convergence studies and output.

pub mod config;
pub mod kinetic;
pub mod presets;
pub mod run;
pub mod snapshot;
pub mod study;

pub use config::ExperimentConfig;
pub use kinetic::{kinetic_reference_1d, KineticReference};
pub use presets::Preset;
pub use run::{initial_state, run, simulate, RunReport, SimState};
pub use snapshot::FieldSnapshot;
pub use study::{accuracy_study, eoc, restrict, StudyRow};
