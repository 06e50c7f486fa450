//! Experiment harness over the aquaplan planners: configuration, closed-loop
//! simulation, campaign orchestration and artifact emission.

pub mod campaign;
pub mod config;
pub mod io;
pub mod manifest;
pub mod plots;
pub mod sim;
