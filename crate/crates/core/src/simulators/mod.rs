//! Benchmark simulators with their design spaces, true inputs and
//! ground-truth evaluators.

mod ccf;
mod inventory;
mod truth;

pub use ccf::{
    ccf_run, ccf_simulate, enumerate_ccf_designs, CcfConfig, CcfRun, Route, RoutingMap, Unit, CCF_INPUTS,
};
pub use inventory::{
    exponential_quantiles, inventory_analytic_cost, inventory_grid_truth, inventory_run, inventory_simulate, inventory_space,
    InventoryConfig, InventoryGridTruth, RenewalCostEvaluator,
};
pub use truth::{ccf_true_inputs, inventory_true_demand, TrueInputs, TRUE_DEMAND_RATE};

use rand::Rng;

use crate::distributions::{BaseDistribution, DiscreteSampler};

/// Anything a simulator can draw input variates from.
pub trait Draw {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

impl Draw for DiscreteSampler<'_> {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng)
    }
}

impl Draw for BaseDistribution {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng)
    }
}
