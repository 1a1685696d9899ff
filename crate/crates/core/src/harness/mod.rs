//! Experiment orchestration: metrics, reference objectives, statistical
//! tests, convergence studies and method comparisons.

pub mod config;
mod experiments;
pub mod output;
mod reference;
pub mod stats;

pub use config::{ExperimentConfig, Method, PosteriorConfig, ProblemKind, Scale};
pub use experiments::{
    compare_methods, convergence_in_budget, convergence_in_n, g_table, generate_data, join_coords, mood_tests,
    nbro_posterior, problem_truth, run_method, run_single, setup, BudgetReport, BudgetRow, CompareReport,
    ConvergenceReport, ConvergenceRow, GTable, MetricRecord, MoodRow, Setup, SingleRun, SummaryRow, TrendTest, Truth,
    CCF_REFERENCE_OPTIMUM,
};
pub use reference::{
    axis, box_grid, g_reference, gap_metrics, grid_argmin, reference_atoms, GReference, InventoryG, Objective,
    ReferenceConfig, SimulatedG,
};
