pub mod baselines;
pub mod distributions;
pub mod ego;
pub mod error;
pub mod gmodel;
pub mod gp;
pub mod harness;
pub mod optim;
pub mod rng;
pub mod simulators;
pub mod wasserstein;

pub use error::{Error, Result};
