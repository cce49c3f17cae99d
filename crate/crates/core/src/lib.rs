pub mod cli;
pub mod delta;
pub mod dist;
pub mod dtdg;
pub mod error;
pub mod models;
pub mod tensor;
pub mod training;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
