use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{InputPosterior, Inputs};
use crate::ego::Simulator;
use crate::error::{Error, Result};
use crate::rng::{labels, SeedLineage};
use crate::simulators::{InventoryConfig, RenewalCostEvaluator};

/// Brute-force `g` settings. Desk defaults are 10² draws × 10² replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    pub draws: usize,
    pub reps: usize,
    /// Grid spacing for continuous design spaces.
    pub grid_step: f64,
    /// Lattice width of the inventory renewal evaluator.
    pub renewal_step: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            draws: 100,
            reps: 100,
            grid_step: 100.0,
            renewal_step: 5.0,
        }
    }
}

/// A deterministic objective over designs.
pub trait Objective: Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;

    fn values(&self, grid: &[Vec<f64>]) -> Result<Vec<f64>> {
        grid.par_iter().map(|x| self.value(x)).collect()
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for F {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self(x))
    }
}

/// `(1/M) Σ_i (1/R) Σ_j y_j(x, P_i)` with common random numbers across `x`.
pub struct SimulatedG<'a> {
    atoms: Vec<Inputs>,
    sim: &'a dyn Simulator,
    reps: usize,
    lineage: SeedLineage,
}

impl<'a> SimulatedG<'a> {
    pub fn new(atoms: Vec<Inputs>, sim: &'a dyn Simulator, reps: usize, lineage: SeedLineage) -> Result<Self> {
        if atoms.is_empty() || reps == 0 {
            return Err(Error::InvalidParameter("reference needs draws and replications".into()));
        }
        Ok(Self { atoms, sim, reps, lineage })
    }
}

impl Objective for SimulatedG<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (i, p) in self.atoms.iter().enumerate() {
            let child = self.lineage.child(labels::REFERENCE, i as u64);
            for j in 0..self.reps {
                total += self.sim.simulate(x, p, &mut child.stream("rep", j as u64))?;
            }
        }
        Ok(total / (self.atoms.len() * self.reps) as f64)
    }
}

/// Inventory `g` from exact long-run costs of each posterior draw.
pub struct InventoryG {
    evaluators: Vec<RenewalCostEvaluator>,
}

impl InventoryG {
    pub fn new(atoms: &[Inputs], cfg: &InventoryConfig, step: f64, max_gap: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("reference needs draws".into()));
        }
        let evaluators = atoms
            .par_iter()
            .map(|p| RenewalCostEvaluator::new(&p[0], cfg, step, max_gap))
            .collect::<Result<_>>()?;
        Ok(Self { evaluators })
    }

    pub fn grid_values(&self, s_values: &[f64], big_s_values: &[f64]) -> Vec<f64> {
        let per: Vec<Vec<f64>> = self
            .evaluators
            .par_iter()
            .map(|e| e.grid_costs(s_values, big_s_values))
            .collect();
        let m = per.len() as f64;
        (0..s_values.len() * big_s_values.len())
            .map(|k| per.iter().map(|v| v[k]).sum::<f64>() / m)
            .collect()
    }
}

impl Objective for InventoryG {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluators.iter().map(|e| e.cost(x)).sum::<f64>() / self.evaluators.len() as f64)
    }
}

pub fn reference_atoms(posterior: &dyn InputPosterior, draws: usize, lineage: &SeedLineage) -> Vec<Inputs> {
    let mut rng = lineage.stream(labels::REFERENCE, 0);
    (0..draws).map(|_| posterior.draw(&mut rng)).collect()
}

/// Grid minimum of an objective. Ties go to the first grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GReference {
    pub argmin: Vec<f64>,
    pub min: f64,
}

pub fn grid_argmin(grid: &[Vec<f64>], values: &[f64]) -> Result<GReference> {
    let (k, min) = values
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((k, v)),
        })
        .ok_or(Error::EmptyData)?;
    Ok(GReference {
        argmin: grid[k].clone(),
        min,
    })
}

pub fn g_reference(obj: &dyn Objective, grid: &[Vec<f64>]) -> Result<GReference> {
    let values = obj.values(grid)?;
    grid_argmin(grid, &values)
}

/// Axis-aligned grid with spacing `step` covering `[lo, hi]` in every
/// coordinate (the upper end is included when it falls on the lattice).
pub fn box_grid(lo: &[f64], hi: &[f64], step: f64) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = lo.iter().zip(hi).map(|(&a, &b)| axis(a, b, step)).collect();
    let mut out = vec![vec![]];
    for ax in &axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                ax.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// `(GAP, xGAP) = (|f(x*) − f(x̂)|, ‖x* − x̂‖)`.
pub fn gap_metrics(x_hat: &[f64], x_star: &[f64], f_star: f64, f: &dyn Objective) -> Result<(f64, f64)> {
    let gap = (f_star - f.value(x_hat)?).abs();
    let xgap = x_hat.iter().zip(x_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok((gap, xgap))
}
