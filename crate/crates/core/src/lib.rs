pub mod cli;
pub mod contour;
pub mod engine;
pub mod error;
pub mod models;
pub mod plot;
pub mod rng;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
