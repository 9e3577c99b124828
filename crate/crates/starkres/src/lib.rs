#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command-line driver for resonance computations: configuration, runs,
//! CSV/JSON artifacts and SVG figures.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;
pub mod verify;

pub use config::{Mode, Parameters};
pub use run::{run, Artifacts, RunError};
