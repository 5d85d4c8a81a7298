//! Network state-space models for panel time series.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod evalharness;
pub mod gaussmodel;
pub mod design;
pub mod diagnostics;
pub mod graph;
pub mod lgss;
pub mod linalg;
pub mod poissonmodel;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod tensorcp;

pub use error::{Error, Result};
