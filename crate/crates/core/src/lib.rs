pub mod alignment;
pub mod cli;
pub mod costs;
pub mod data;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod geometry;
pub mod nn;
pub mod seed;
pub mod selftest;

pub use error::{Error, Result};
