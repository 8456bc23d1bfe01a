//! Experiment runner comparing CTI prediction sets with split conformal and
//! CQR intervals on CSV datasets and synthetic scenarios.

pub mod config;
pub mod run;

pub use config::{validate, BaselineModel, ExperimentConfig, Method, Problem, Source};
pub use run::{evaluate, load_dataset, run, RunError, RunOutput};
