pub mod bases;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod grid;
pub mod measurement;
pub mod metrics;
pub mod operator;
pub mod protocols;
pub mod resources;
pub mod wavefunction;

pub use error::{Error, Result};
pub use exec::Execution;
