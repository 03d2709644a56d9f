//! Command-line pipeline around `reachcert-core`: scenario and artifact
//! files, stage orchestration and parallel batch simulation.

pub mod config;
pub mod io;
pub mod pipeline;
