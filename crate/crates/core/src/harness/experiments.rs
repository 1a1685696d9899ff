use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, ProblemKind};
use super::reference::{axis, box_grid, grid_argmin, reference_atoms, InventoryG, Objective, SimulatedG};
use super::stats::{mann_kendall_decreasing, mean_ci, median, mood_median_test};
use crate::baselines::{pb_optimize, plugin_optimize, Family};
use crate::distributions::{BaseDistribution, DpPosterior, ProductPosterior, RealWorldData};
use crate::optim::pattern_search_max;
use crate::ego::{fmt_f64, run, DesignSpace, EgoConfig, OptOutcome, Problem, Simulator};
use crate::error::{Error, Result};
use crate::rng::{labels, SeedLineage, StreamRng};
use crate::simulators::{
    ccf_run, ccf_simulate, ccf_true_inputs, enumerate_ccf_designs, inventory_analytic_cost, inventory_grid_truth,
    inventory_simulate, inventory_space, inventory_true_demand, CcfConfig, TrueInputs, TRUE_DEMAND_RATE,
};

/// Published optimal staffing and denial rate for the critical-care problem.
pub const CCF_REFERENCE_OPTIMUM: ([f64; 3], f64) = ([12.0, 5.0, 22.0], 0.596);

type BoxedSimulator = Box<dyn Simulator>;

/// Design space, true inputs and simulator of one benchmark.
pub struct Setup {
    pub space: DesignSpace,
    pub truth: TrueInputs,
    pub simulator: BoxedSimulator,
}

pub fn setup(cfg: &ExperimentConfig) -> Setup {
    match cfg.problem {
        ProblemKind::Inventory => {
            let inv = cfg.inventory.clone();
            Setup {
                space: inventory_space(),
                truth: inventory_true_demand(),
                simulator: Box::new(move |x: &[f64], p: &[_], rng: &mut StreamRng| Ok(inventory_simulate(x, &p[0], &inv, rng))),
            }
        }
        ProblemKind::Ccf => {
            let ccf = cfg.ccf.clone();
            Setup {
                space: enumerate_ccf_designs(),
                truth: ccf_true_inputs(),
                simulator: Box::new(move |x: &[f64], p: &[_], rng: &mut StreamRng| ccf_simulate(x, p, &ccf, rng)),
            }
        }
    }
}

/// DP posterior with a `uniform(0, max)` base per input dimension.
pub fn nbro_posterior(cfg: &ExperimentConfig, data: &RealWorldData) -> Result<ProductPosterior> {
    let comps = data
        .columns()
        .iter()
        .map(|col| {
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            DpPosterior::new(cfg.posterior.alpha, BaseDistribution::uniform(0.0, hi)?, col.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProductPosterior::new(comps)?.with_truncation(cfg.posterior.truncation))
}

pub fn generate_data(setup: &Setup, n: usize, macro_lineage: &SeedLineage) -> Result<RealWorldData> {
    setup.truth.generate(n, &mut macro_lineage.stream(labels::DATA, n as u64))
}

pub fn run_method(
    setup: &Setup,
    cfg: &ExperimentConfig,
    method: Method,
    data: &RealWorldData,
    ego: &EgoConfig,
    lineage: SeedLineage,
) -> Result<OptOutcome> {
    let sim: &dyn Simulator = setup.simulator.as_ref();
    let space = setup.space.clone();
    let out = match method {
        Method::Nbro => {
            let post = nbro_posterior(cfg, data)?;
            run(
                &Problem {
                    space,
                    posterior: &post,
                    simulator: sim,
                },
                ego,
                lineage,
            )
        }
        Method::Plugin => plugin_optimize(space, data, sim, ego, lineage),
        Method::PbExp => pb_optimize(space, data, Family::Exponential, sim, ego, lineage),
        Method::PbLognormal => pb_optimize(space, data, Family::Lognormal, sim, ego, lineage),
    };
    out.map_err(|e| e.error)
}

/// `f(·, P^c)` with its reference optimum.
pub struct Truth {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub f: Box<dyn Objective>,
}

/// Long-run CCF denial rate under the true inputs, with common random
/// numbers across designs.
struct CcfTruth {
    truth: Vec<BaseDistribution>,
    cfg: CcfConfig,
    reps: usize,
    lineage: SeedLineage,
}

impl Objective for CcfTruth {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for j in 0..self.reps {
            let run = ccf_run(x, &self.truth, &self.cfg, &mut self.lineage.stream(labels::REFERENCE, j as u64))?;
            total += run.counted_denials as f64 / self.cfg.days;
        }
        Ok(total / self.reps as f64)
    }
}

pub fn problem_truth(cfg: &ExperimentConfig, setup: &Setup, root: &SeedLineage) -> Truth {
    match cfg.problem {
        ProblemKind::Inventory => {
            let grid = inventory_grid_truth(TRUE_DEMAND_RATE);
            Truth {
                x_star: grid.argmin,
                f_star: grid.min,
                f: Box::new(|x: &[f64]| inventory_analytic_cost(x, TRUE_DEMAND_RATE)),
            }
        }
        ProblemKind::Ccf => Truth {
            x_star: CCF_REFERENCE_OPTIMUM.0.to_vec(),
            f_star: CCF_REFERENCE_OPTIMUM.1,
            f: Box::new(CcfTruth {
                truth: setup.truth.dists.clone(),
                cfg: CcfConfig {
                    days: cfg.ccf_truth_days,
                    ..cfg.ccf.clone()
                },
                reps: cfg.ccf_truth_reps,
                lineage: root.child(labels::REFERENCE, 0),
            }),
        },
    }
}

/// Brute-force `g` for one posterior, with its minimum over a grid
/// (polished locally on continuous spaces).
pub struct GTable {
    pub g: Box<dyn Objective + Send>,
    pub argmin: Vec<f64>,
    pub min: f64,
}

pub fn g_table(cfg: &ExperimentConfig, setup: &Setup, post: &ProductPosterior, lineage: &SeedLineage) -> Result<GTable> {
    let atoms = reference_atoms(post, cfg.reference.draws, lineage);
    match &setup.space {
        DesignSpace::Box { lo, hi } => {
            if cfg.problem != ProblemKind::Inventory {
                return Err(Error::Unsupported("box reference only for inventory".into()));
            }
            let g = InventoryG::new(&atoms, &cfg.inventory, cfg.reference.renewal_step, hi[1] - lo[0])?;
            let (ss, bs) = (axis(lo[0], hi[0], cfg.reference.grid_step), axis(lo[1], hi[1], cfg.reference.grid_step));
            let values = g.grid_values(&ss, &bs);
            let grid = box_grid(&[lo[0], lo[1]], &[hi[0], hi[1]], cfg.reference.grid_step);
            let r = grid_argmin(&grid, &values)?;
            // polish within one grid cell of the grid minimum
            let step = cfg.reference.grid_step;
            let cell_lo: Vec<f64> = r.argmin.iter().zip(lo).map(|(a, l)| (a - step).max(*l)).collect();
            let cell_hi: Vec<f64> = r.argmin.iter().zip(hi).map(|(a, h)| (a + step).min(*h)).collect();
            let (x, neg) = pattern_search_max(|x| -g.value(x).unwrap_or(f64::INFINITY), &r.argmin, &cell_lo, &cell_hi, 60, 1e-3);
            let (argmin, min) = if -neg < r.min { (x, -neg) } else { (r.argmin, r.min) };
            Ok(GTable {
                g: Box::new(g),
                argmin,
                min,
            })
        }
        DesignSpace::Finite { candidates } => {
            let sim: &dyn Simulator = setup.simulator.as_ref();
            let g = SimulatedG::new(atoms, sim, cfg.reference.reps, lineage.child(labels::REFERENCE, 1))?;
            let values = g.values(candidates)?;
            let r = grid_argmin(candidates, &values)?;
            // values are cached, so the table answers queries for candidates only
            let table: Vec<(Vec<f64>, f64)> = candidates.iter().cloned().zip(values).collect();
            Ok(GTable {
                g: Box::new(move |x: &[f64]| table.iter().find(|(c, _)| c.as_slice() == x).map_or(f64::NAN, |t| t.1)),
                argmin: r.argmin,
                min: r.min,
            })
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn join_coords(x: &[f64]) -> String {
    x.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" ")
}

/// One optimizer outcome scored against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub experiment: String,
    pub method: Method,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub x_hat: String,
    pub f_true: f64,
    pub gap: f64,
    pub xgap: f64,
    pub ggap: Option<f64>,
    pub gxgap: Option<f64>,
    pub runtime_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoodRow {
    pub n: usize,
    pub method_a: Method,
    pub method_b: Method,
    pub median_a: f64,
    pub median_b: f64,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub records: Vec<MetricRecord>,
    pub tests: Vec<MoodRow>,
}

/// Runs every configured method on shared data and seeds across
/// `n_values` × `macro_reps`, scoring GAP and xGAP against the truth.
pub fn compare_methods(cfg: &ExperimentConfig, root: SeedLineage, timings: bool) -> Result<CompareReport> {
    cfg.validate()?;
    let setup = setup(cfg);
    let truth = problem_truth(cfg, &setup, &root);
    let ego = EgoConfig {
        budget: cfg.compare_budget,
        ..cfg.ego.clone()
    };
    let mut records = Vec::new();
    for &n in &cfg.n_values {
        let per_rep: Vec<Vec<MetricRecord>> = (0..cfg.macro_reps)
            .into_par_iter()
            .map(|rep| {
                let macro_lineage = root.child("macro", rep as u64);
                let data = generate_data(&setup, n, &macro_lineage)?;
                let lineage = macro_lineage.child("n", n as u64);
                cfg.methods
                    .iter()
                    .map(|&method| {
                        let start = Instant::now();
                        let out = run_method(&setup, cfg, method, &data, &ego, lineage)?;
                        let elapsed = start.elapsed().as_secs_f64();
                        let f_true = truth.f.value(&out.x_hat)?;
                        Ok(MetricRecord {
                            experiment: "compare".into(),
                            method,
                            n,
                            rep,
                            seed: lineage.root(),
                            x_hat: join_coords(&out.x_hat),
                            f_true,
                            gap: (truth.f_star - f_true).abs(),
                            xgap: distance(&out.x_hat, &truth.x_star),
                            ggap: None,
                            gxgap: None,
                            runtime_seconds: timings.then_some(elapsed),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        records.extend(per_rep.into_iter().flatten());
    }
    let tests = mood_tests(cfg, &records);
    Ok(CompareReport { records, tests })
}

/// NBRO against every other method, per sample size, on GAP.
pub fn mood_tests(cfg: &ExperimentConfig, records: &[MetricRecord]) -> Vec<MoodRow> {
    let gaps = |n: usize, m: Method| -> Vec<f64> { records.iter().filter(|r| r.n == n && r.method == m).map(|r| r.gap).collect() };
    let mut rows = Vec::new();
    if !cfg.methods.contains(&Method::Nbro) {
        return rows;
    }
    for &n in &cfg.n_values {
        let a = gaps(n, Method::Nbro);
        for &m in cfg.methods.iter().filter(|m| **m != Method::Nbro) {
            let b = gaps(n, m);
            if a.is_empty() || b.is_empty() {
                continue;
            }
            let test = mood_median_test(&a, &b).ok();
            rows.push(MoodRow {
                n,
                method_a: Method::Nbro,
                method_b: m,
                median_a: median(&a),
                median_b: median(&b),
                statistic: test.map(|t| t.0),
                p_value: test.map(|t| t.1),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub level: usize,
    pub metric: String,
    pub median: f64,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn summarize(level: usize, metric: &str, values: &[f64]) -> Option<SummaryRow> {
    if values.is_empty() {
        return None;
    }
    let (mean, ci_lo, ci_hi) = mean_ci(values);
    Some(SummaryRow {
        level,
        metric: metric.into(),
        median: median(values),
        mean,
        ci_lo,
        ci_hi,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub argmin_g: String,
    pub min_g: f64,
    pub value_gap: f64,
    pub solution_gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub summary: Vec<SummaryRow>,
}

/// `|f(x*, P^c) − min g|` and `‖x* − argmin g‖` across sample sizes.
pub fn convergence_in_n(cfg: &ExperimentConfig, root: SeedLineage) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let setup = setup(cfg);
    let truth = problem_truth(cfg, &setup, &root);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &n in &cfg.n_values {
        let level: Vec<ConvergenceRow> = (0..cfg.macro_reps)
            .into_par_iter()
            .map(|rep| {
                let macro_lineage = root.child("macro", rep as u64);
                let data = generate_data(&setup, n, &macro_lineage)?;
                let lineage = macro_lineage.child("n", n as u64);
                let post = nbro_posterior(cfg, &data)?;
                let table = g_table(cfg, &setup, &post, &lineage)?;
                Ok(ConvergenceRow {
                    n,
                    rep,
                    seed: lineage.root(),
                    argmin_g: join_coords(&table.argmin),
                    min_g: table.min,
                    value_gap: (truth.f_star - table.min).abs(),
                    solution_gap: distance(&truth.x_star, &table.argmin),
                })
            })
            .collect::<Result<_>>()?;
        let v: Vec<f64> = level.iter().map(|r| r.value_gap).collect();
        let x: Vec<f64> = level.iter().map(|r| r.solution_gap).collect();
        summary.extend(summarize(n, "value_gap", &v));
        summary.extend(summarize(n, "solution_gap", &x));
        rows.extend(level);
    }
    Ok(ConvergenceReport { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub rep: usize,
    pub seed: u64,
    pub checkpoint: usize,
    pub x_hat: String,
    pub ggap: f64,
    pub gxgap: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    pub statistic: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub rows: Vec<BudgetRow>,
    pub summary: Vec<SummaryRow>,
    /// Mann–Kendall test for a decreasing trend in median gGAP.
    pub trend: Option<TrendTest>,
}

/// NBRO runs scored by gGAP and gxGAP at each budget checkpoint.
pub fn convergence_in_budget(cfg: &ExperimentConfig, root: SeedLineage) -> Result<BudgetReport> {
    cfg.validate()?;
    let setup = setup(cfg);
    let truth = problem_truth(cfg, &setup, &root);
    let n = cfg.n;
    let per_rep: Vec<Vec<BudgetRow>> = (0..cfg.macro_reps)
        .into_par_iter()
        .map(|rep| {
            let macro_lineage = root.child("macro", rep as u64);
            let data = generate_data(&setup, n, &macro_lineage)?;
            let lineage = macro_lineage.child("n", n as u64);
            let post = nbro_posterior(cfg, &data)?;
            let table = g_table(cfg, &setup, &post, &lineage)?;
            let out = run_method(&setup, cfg, Method::Nbro, &data, &cfg.ego, lineage)?;
            cfg.checkpoints
                .iter()
                .map(|&c| {
                    let x = out
                        .state
                        .recommendation_at(c)
                        .unwrap_or(out.x_hat.as_slice())
                        .to_vec();
                    Ok(BudgetRow {
                        rep,
                        seed: lineage.root(),
                        checkpoint: c,
                        x_hat: join_coords(&x),
                        ggap: (table.g.value(&x)? - table.min).abs(),
                        gxgap: distance(&x, &table.argmin),
                        gap: (truth.f.value(&x)? - truth.f_star).abs(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<BudgetRow> = per_rep.into_iter().flatten().collect();
    let mut summary = Vec::new();
    let mut medians = Vec::new();
    for &c in &cfg.checkpoints {
        let g: Vec<f64> = rows.iter().filter(|r| r.checkpoint == c).map(|r| r.ggap).collect();
        let x: Vec<f64> = rows.iter().filter(|r| r.checkpoint == c).map(|r| r.gxgap).collect();
        if let Some(s) = summarize(c, "ggap", &g) {
            medians.push(s.median);
            summary.push(s);
        }
        summary.extend(summarize(c, "gxgap", &x));
    }
    let trend = mann_kendall_decreasing(&medians).ok().map(|(statistic, z, p_value)| TrendTest { statistic, z, p_value });
    Ok(BudgetReport { rows, summary, trend })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleRun {
    pub method: Method,
    pub x_hat: String,
    pub mu_hat: f64,
    pub f_true: f64,
    pub gap: f64,
    pub xgap: f64,
}

/// One optimization on data generated from the true inputs.
pub fn run_single(cfg: &ExperimentConfig, root: SeedLineage, method: Method) -> Result<(SingleRun, OptOutcome)> {
    cfg.validate()?;
    let setup = setup(cfg);
    let truth = problem_truth(cfg, &setup, &root);
    let macro_lineage = root.child("macro", 0);
    let data = generate_data(&setup, cfg.n, &macro_lineage)?;
    let out = run_method(&setup, cfg, method, &data, &cfg.ego, macro_lineage.child("n", cfg.n as u64))?;
    let f_true = truth.f.value(&out.x_hat)?;
    Ok((
        SingleRun {
            method,
            x_hat: join_coords(&out.x_hat),
            mu_hat: out.mu_hat,
            f_true,
            gap: (f_true - truth.f_star).abs(),
            xgap: distance(&out.x_hat, &truth.x_star),
        },
        out,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::FitOptions;
    use crate::harness::config::Scale;

    fn tiny(problem: ProblemKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(problem, Scale::Desk);
        cfg.macro_reps = 2;
        cfg.n_values = vec![10];
        cfg.ego = EgoConfig {
            s0: 4,
            budget: 6,
            reps: 2,
            n_mc: 4,
            n_fresh: 2,
            n_rand: 30,
            n_refine: 1,
            refine_iters: 5,
            fit: FitOptions {
                restarts: 2,
                max_evals: 40,
                ..FitOptions::default()
            },
            ..EgoConfig::default()
        };
        cfg.compare_budget = 5;
        cfg.checkpoints = vec![4, 6];
        cfg.reference.draws = 5;
        cfg.reference.grid_step = 500.0;
        cfg.inventory.periods = 200;
        cfg.inventory.warmup = 20;
        cfg
    }

    #[test]
    fn methods_share_initial_designs() {
        let cfg = tiny(ProblemKind::Inventory);
        let setup = setup(&cfg);
        let lineage = SeedLineage::new(9);
        let data = generate_data(&setup, 10, &lineage).unwrap();
        let ego = EgoConfig {
            budget: cfg.ego.s0,
            ..cfg.ego.clone()
        };
        let firsts: Vec<Vec<Vec<f64>>> = cfg
            .methods
            .iter()
            .map(|&m| {
                let out = run_method(&setup, &cfg, m, &data, &ego, lineage).unwrap();
                out.state.history.iter().map(|r| r.design.clone()).collect()
            })
            .collect();
        assert!(firsts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn compare_is_reproducible() {
        let cfg = tiny(ProblemKind::Inventory);
        let a = compare_methods(&cfg, SeedLineage::new(1), false).unwrap();
        let b = compare_methods(&cfg, SeedLineage::new(1), false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 2 * 4);
        assert_eq!(a.tests.len(), 3);
        assert!(a.records.iter().all(|r| r.gap >= 0.0 && r.xgap >= 0.0 && r.runtime_seconds.is_none()));
    }

    #[test]
    fn convergence_tables_have_every_level() {
        let mut cfg = tiny(ProblemKind::Inventory);
        cfg.n_values = vec![10, 100];
        let r = convergence_in_n(&cfg, SeedLineage::new(2)).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.summary.len(), 4);
        cfg.macro_reps = 0;
        let empty = convergence_in_n(&cfg, SeedLineage::new(2)).unwrap();
        assert!(empty.rows.is_empty() && empty.summary.is_empty());
    }

    #[test]
    fn budget_study_reports_each_checkpoint() {
        let cfg = tiny(ProblemKind::Inventory);
        let r = convergence_in_budget(&cfg, SeedLineage::new(3)).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.rows.iter().all(|row| row.ggap >= 0.0));
        assert!(r.trend.is_none());
    }

    #[test]
    fn ccf_pipeline_runs() {
        let mut cfg = tiny(ProblemKind::Ccf);
        cfg.methods = vec![Method::Nbro, Method::Plugin];
        cfg.macro_reps = 1;
        cfg.n_values = vec![50];
        cfg.ccf.days = 30.0;
        cfg.ccf.warmup = 30.0;
        cfg.ccf_truth_reps = 2;
        cfg.ccf_truth_days = 100.0;
        let r = compare_methods(&cfg, SeedLineage::new(4), false).unwrap();
        assert_eq!(r.records.len(), 2);
        assert!(r.records.iter().all(|m| m.f_true.is_finite()));
        cfg.methods.push(Method::PbExp);
        assert!(compare_methods(&cfg, SeedLineage::new(4), false).is_err());
    }
}
