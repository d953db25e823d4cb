pub mod baselines;
pub mod bench;
pub mod engine;
pub mod error;
pub mod generator;
pub mod objectives;

pub use error::{Error, Result};
