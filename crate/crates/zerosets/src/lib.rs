pub mod boundary;
pub mod cli;
pub mod dbar;
pub mod domain;
pub mod error;
pub mod exterior;
pub mod forms;
pub mod geometry;
pub mod homotopy;
pub mod matrix;
pub mod metric;
pub mod num;
pub mod pipeline;
pub mod selftest;

pub use error::{Error, Result};
