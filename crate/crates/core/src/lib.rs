pub mod autoencoder;
pub mod classifiers;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod fairness;
pub mod gan;
pub mod nn;
pub mod theory;

pub use error::{Error, Result};
