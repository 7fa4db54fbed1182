//! Configuration, orchestration and report emission for the `nodal` driver.

pub mod config;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::{Mode, RunConfig};
pub use run::{run, RunReport};
