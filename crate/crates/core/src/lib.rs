pub mod alloc;
pub mod cli;
pub mod control;
pub mod error;
pub mod eval;
pub mod features;
pub mod forecast;
pub mod pipeline;
pub mod sim;
pub mod telemetry;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
