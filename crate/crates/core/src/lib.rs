pub mod abstraction;
pub mod cli;
pub mod error;
pub mod hybrid_model;
pub mod matrix_analysis;
pub mod network;
pub mod storage;

pub use error::{Error, Result};
