//! Tree-based learning for spatial and temporal proximity.
//!
//! The crate covers the whole analysis loop: great-circle proximity features
//! ([`spatial`]), table assembly ([`dataset`], [`table`]), learners
//! ([`cart`], [`forest`], [`bart`], [`linear`]), permutation importance
//! ([`importance`]), marginal-effect curves ([`effects`]) and the Monte Carlo
//! comparison harness ([`simulation`]).

pub mod bart;
pub mod cart;
pub mod dataset;
pub mod effects;
pub mod error;
pub mod forest;
pub mod importance;
pub mod linear;
pub mod model;
pub mod seed;
pub mod simulation;
pub mod spatial;
pub mod stats;
pub mod table;

pub use error::{Error, Result};
pub use model::{FittedModel, Predictor};
pub use table::{Column, FeatureTable};
