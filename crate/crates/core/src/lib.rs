pub mod bench;
pub mod colormap;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod networks;
pub mod relationship;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
