//! KATE: a scale-invariant variant of AdaGrad, its baselines, GLM and
//! analytic test objectives, checks of the method's provable properties,
//! and an experiment harness.

pub mod data;
pub mod error;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod vector;
pub mod verify;

pub use error::{Error, Result};
