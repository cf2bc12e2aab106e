//! Predicting the arms a low-regret bandit agent plays from the public costs
//! it faces and the choices it has already made.
//!
//! The predictor keeps the set of value vectors that could explain the
//! agent's past choices within its regret budget, samples it with a
//! hit-and-run walk and names the arm most likely to be optimal.

pub mod agents;
pub mod config;
pub mod consistent_set;
pub mod diagnostics;
pub mod environments;
pub mod error;
pub mod exact_k2;
pub mod experiment;
pub mod io;
pub mod lp;
pub mod metrics;
pub mod predictor;
pub mod rng;
pub mod sampler;
pub mod types;
pub mod validation;

pub use error::{Error, Result};
