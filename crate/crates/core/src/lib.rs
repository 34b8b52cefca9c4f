pub mod data;
pub mod error;

pub use error::{Error, Result};
pub mod cli;
pub mod config;
pub mod experiment;
pub mod model;
pub mod report;
pub mod window;
