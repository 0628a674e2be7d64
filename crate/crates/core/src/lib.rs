//! Core library for remaining-useful-life regression on turbofan telemetry:
//! dataset handling, five model families trained from scratch, local
//! explanation methods, and the experiment pipeline that ties them together.

pub mod data;
pub mod error;
pub mod explain;
pub mod linalg;
pub mod models;
pub mod pipeline;
pub mod seeds;

pub use error::{Error, Result};
