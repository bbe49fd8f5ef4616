//! Scale-guided hypernetwork quality assessment for super-resolved images.
//!
//! An encoder turns an image patch into a pooled feature vector; a small
//! hypernetwork maps the image's SR scale factor to the weights and biases of
//! the quality-regression head that scores that vector. Scale-blind and
//! feature-fusion baselines, rank-correlation metrics and the
//! Alexander-Govern test round out the evaluation tooling.

pub mod cli;
pub mod datakit;
pub mod error;
pub mod evalstats;
pub mod exec;
pub mod nn;
pub mod perception;
pub mod scalehyper;
pub mod training;

pub use error::{Error, Result};
