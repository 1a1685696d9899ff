use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Draw;
use crate::distributions::{BaseDistribution, DiscreteDistribution};
use crate::ego::{fmt_f64, DesignSpace};
use crate::error::{Error, Result};

/// Periodic-review (s, S) inventory with zero lead time and full backorders.
///
/// Every period: demand is subtracted, holding or backorder cost is charged
/// on the resulting level, and if the level is below `s` an order up to `S`
/// is placed and arrives immediately. Outputs are multiplied by
/// `cost_scale` so they are on the scale of [`inventory_analytic_cost`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InventoryConfig {
    pub fixed_order_cost: f64,
    pub unit_cost: f64,
    pub holding_cost: f64,
    pub backorder_cost: f64,
    pub periods: usize,
    pub warmup: usize,
    pub cost_scale: f64,
}

impl Default for InventoryConfig {
    fn default() -> Self {
        Self {
            fixed_order_cost: 100.0,
            unit_cost: 1.0,
            holding_cost: 1.0,
            backorder_cost: 100.0,
            periods: 1000,
            warmup: 100,
            cost_scale: 0.01,
        }
    }
}

impl InventoryConfig {
    pub fn validate(&self) -> Result<()> {
        let costs = [self.fixed_order_cost, self.unit_cost, self.holding_cost, self.backorder_cost];
        if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParameter("inventory costs must be nonnegative".into()));
        }
        if self.warmup >= self.periods {
            return Err(Error::InvalidParameter("warmup must be shorter than the run".into()));
        }
        Ok(())
    }
}

/// `s ∈ [10000, 22500]`, `S ∈ [22600, 35000]`.
pub fn inventory_space() -> DesignSpace {
    DesignSpace::new_box(vec![10000.0, 22600.0], vec![22500.0, 35000.0]).expect("valid box")
}

/// Average scaled cost per period after warmup for one replication.
pub fn inventory_simulate<R: Rng + ?Sized>(x: &[f64], demand: &DiscreteDistribution, cfg: &InventoryConfig, rng: &mut R) -> f64 {
    inventory_run(x, &demand.sampler(), cfg, rng)
}

pub fn inventory_run<D: Draw, R: Rng + ?Sized>(x: &[f64], demand: &D, cfg: &InventoryConfig, rng: &mut R) -> f64 {
    let (s, big_s) = (x[0], x[1]);
    let mut level = big_s;
    let mut total = 0.0;
    for t in 0..cfg.periods {
        level -= demand.draw(rng);
        let mut cost = cfg.holding_cost * level.max(0.0) + cfg.backorder_cost * (-level).max(0.0);
        if level < s {
            cost += cfg.fixed_order_cost + cfg.unit_cost * (big_s - level);
            level = big_s;
        }
        if t >= cfg.warmup {
            total += cost;
        }
    }
    cfg.cost_scale * total / (cfg.periods - cfg.warmup) as f64
}

/// Closed-form expected cost under exponential demand with rate `lambda`:
/// `(1/100)[1/λ + (100 + s − 1/λ + λ(S² − s²)/2 + (101/λ)e^{−λs}) / (1 + λ(S − s))]`.
pub fn inventory_analytic_cost(x: &[f64], lambda: f64) -> f64 {
    let (s, big_s) = (x[0], x[1]);
    let num = 100.0 + s - 1.0 / lambda + 0.5 * lambda * (big_s * big_s - s * s) + 101.0 / lambda * (-lambda * s).exp();
    (1.0 / lambda + num / (1.0 + lambda * (big_s - s))) / 100.0
}

/// Long-run scaled cost for an arbitrary discrete demand distribution by
/// renewal–reward over order cycles.
///
/// A cycle starts at level `S`; with `D_k` the cumulative demand after `k`
/// periods it lasts `N = #{k ≥ 0 : D_k ≤ S − s}` periods, so
/// `cost = (Σ_{k: D_k ≤ S−s} E φ(S − D_k − ξ) + K + c μ E N) / E N` where
/// `φ` is the holding/backorder charge. The renewal measure of `D_k` is
/// computed on a lattice of width `step` (demand atoms are rounded to it);
/// the one-period charge is evaluated exactly.
#[derive(Debug, Clone)]
pub struct RenewalCostEvaluator {
    cfg: InventoryConfig,
    step: f64,
    renewal: Vec<f64>,
    atoms: Vec<f64>,
    cum_w: Vec<f64>,
    cum_m: Vec<f64>,
    mean: f64,
}

impl RenewalCostEvaluator {
    /// `max_gap` bounds `S − s` over the designs to be evaluated.
    pub fn new(demand: &DiscreteDistribution, cfg: &InventoryConfig, step: f64, max_gap: f64) -> Result<Self> {
        if !(step > 0.0 && max_gap >= 0.0) {
            return Err(Error::InvalidParameter("step must be positive".into()));
        }
        if demand.support()[0] < 0.0 {
            return Err(Error::InvalidDistribution("negative demand".into()));
        }
        let n = (max_gap / step).floor() as usize;
        let mut bins: Vec<(usize, f64)> = Vec::new();
        let mut f0 = 0.0;
        for (a, w) in demand.iter() {
            let j = (a / step).round();
            if j == 0.0 {
                f0 += w;
            } else if j <= n as f64 {
                match bins.last_mut() {
                    Some(b) if b.0 == j as usize => b.1 += w,
                    _ => bins.push((j as usize, w)),
                }
            }
        }
        if 1.0 - f0 < 1e-12 {
            return Err(Error::InvalidDistribution("demand is zero almost surely".into()));
        }
        let mut renewal = vec![0.0; n + 1];
        renewal[0] = 1.0 / (1.0 - f0);
        for i in 1..=n {
            let mut acc = 0.0;
            for &(j, w) in &bins {
                if j > i {
                    break;
                }
                acc += w * renewal[i - j];
            }
            renewal[i] = acc / (1.0 - f0);
        }
        let mut cw = 0.0;
        let mut cm = 0.0;
        let (mut cum_w, mut cum_m) = (vec![0.0], vec![0.0]);
        for (a, w) in demand.iter() {
            cw += w;
            cm += w * a;
            cum_w.push(cw);
            cum_m.push(cm);
        }
        Ok(Self {
            cfg: cfg.clone(),
            step,
            renewal,
            atoms: demand.support().to_vec(),
            cum_w,
            cum_m,
            mean: demand.mean(),
        })
    }

    /// Expected one-period charge when the level before demand is `z`.
    fn charge(&self, z: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a <= z);
        let (f, g) = (self.cum_w[k], self.cum_m[k]);
        let below = z * f - g;
        let above = (self.mean - g) - z * (1.0 - f);
        self.cfg.holding_cost * below + self.cfg.backorder_cost * above
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        let (s, big_s) = (x[0], x[1]);
        let gap = (big_s - s).max(0.0);
        let last = ((gap / self.step).floor() as usize).min(self.renewal.len() - 1);
        let mut cycles = 0.0;
        let mut charges = 0.0;
        for (i, u) in self.renewal[..=last].iter().enumerate() {
            cycles += u;
            charges += u * self.charge(big_s - i as f64 * self.step);
        }
        self.finish(charges, cycles)
    }

    fn finish(&self, charges: f64, cycles: f64) -> f64 {
        let per_cycle = charges + self.cfg.fixed_order_cost + self.cfg.unit_cost * self.mean * cycles;
        self.cfg.cost_scale * per_cycle / cycles
    }

    /// Costs on a product grid, row-major over `s_values` × `big_s_values`.
    /// Shares one pass over the renewal measure per `S`.
    pub fn grid_costs(&self, s_values: &[f64], big_s_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; s_values.len() * big_s_values.len()];
        let mut cum_u = Vec::with_capacity(self.renewal.len());
        let mut cum_c = Vec::with_capacity(self.renewal.len());
        for (j, &big_s) in big_s_values.iter().enumerate() {
            cum_u.clear();
            cum_c.clear();
            let (mut u_acc, mut c_acc) = (0.0, 0.0);
            for (i, u) in self.renewal.iter().enumerate() {
                u_acc += u;
                c_acc += u * self.charge(big_s - i as f64 * self.step);
                cum_u.push(u_acc);
                cum_c.push(c_acc);
            }
            for (i, &s) in s_values.iter().enumerate() {
                let gap = (big_s - s).max(0.0);
                let last = ((gap / self.step).floor() as usize).min(self.renewal.len() - 1);
                out[i * big_s_values.len() + j] = self.finish(cum_c[last], cum_u[last]);
            }
        }
        out
    }
}

/// Exponential demand discretized at `m` midpoint quantiles.
pub fn exponential_quantiles(rate: f64, m: usize) -> Result<DiscreteDistribution> {
    BaseDistribution::exponential(rate)?.discretize(m)
}

/// The closed form evaluated on the 126 × 125 grid with step 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryGridTruth {
    pub lambda: f64,
    pub s_values: Vec<f64>,
    pub big_s_values: Vec<f64>,
    /// Row-major over `s_values` × `big_s_values`.
    pub costs: Vec<f64>,
    pub argmin: Vec<f64>,
    pub min: f64,
}

pub fn inventory_grid_truth(lambda: f64) -> InventoryGridTruth {
    let s_values: Vec<f64> = (0..126).map(|i| 10000.0 + 100.0 * i as f64).collect();
    let big_s_values: Vec<f64> = (0..125).map(|j| 22600.0 + 100.0 * j as f64).collect();
    let mut costs = Vec::with_capacity(126 * 125);
    let mut best = (f64::INFINITY, vec![]);
    for &s in &s_values {
        for &bs in &big_s_values {
            let c = inventory_analytic_cost(&[s, bs], lambda);
            if c < best.0 {
                best = (c, vec![s, bs]);
            }
            costs.push(c);
        }
    }
    InventoryGridTruth {
        lambda,
        s_values,
        big_s_values,
        costs,
        argmin: best.1,
        min: best.0,
    }
}

impl InventoryGridTruth {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["s", "S", "cost"])?;
        let mut k = 0;
        for s in &self.s_values {
            for bs in &self.big_s_values {
                w.write_record([fmt_f64(*s), fmt_f64(*bs), fmt_f64(self.costs[k])])?;
                k += 1;
            }
        }
        w.flush()?;
        Ok(())
    }
}
