//! Input distributions: discrete distributions, Dirichlet-process
//! posteriors and the samplers the optimizer draws input distributions from.

mod base;
mod data;
mod dirichlet;
mod discrete;

use std::sync::Arc;

pub use base::{BaseDistribution, QUADRATURE_POINTS, QUADRATURE_TAIL};
pub use data::{empirical_distribution, RealWorldData};
pub use dirichlet::{nbro_objective_closed_form, DpPosterior, ProductPosterior, DEFAULT_TRUNCATION};
pub use discrete::{DiscreteDistribution, DiscreteSampler};

use crate::rng::StreamRng;

/// One distribution per input dimension, shared between training points
/// and Monte Carlo atoms.
pub type Inputs = Arc<[DiscreteDistribution]>;

/// Anything the optimizer can draw input-distribution tuples from.
pub trait InputPosterior: Send + Sync {
    fn dims(&self) -> usize;
    fn draw(&self, rng: &mut StreamRng) -> Inputs;
}

/// Always returns the same tuple. With an empty tuple the optimizer
/// works on the design alone.
#[derive(Debug, Clone)]
pub struct FixedInputs(pub Inputs);

impl FixedInputs {
    pub fn none() -> Self {
        Self(Arc::from(Vec::new()))
    }
}

impl InputPosterior for FixedInputs {
    fn dims(&self) -> usize {
        self.0.len()
    }

    fn draw(&self, _rng: &mut StreamRng) -> Inputs {
        Arc::clone(&self.0)
    }
}
