use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nbro_core::harness::{
    self, compare_methods, convergence_in_budget, convergence_in_n, output, run_single, CompareReport, ExperimentConfig,
    Method, ProblemKind, Scale,
};
use nbro_core::rng::SeedLineage;
use nbro_core::simulators::{inventory_grid_truth, TRUE_DEMAND_RATE};

#[derive(Parser)]
#[command(name = "nbro", about = "Nonparametric Bayesian risk-aware simulation optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; a preset for --scale is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    /// Record wall-clock runtimes (makes output non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Inventory,
    Ccf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nbro,
    Plugin,
    PbExp,
    PbLognormal,
}

#[derive(Subcommand)]
enum Command {
    /// One optimization on generated data.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ProblemArg::Inventory)]
        problem: ProblemArg,
        #[arg(long, value_enum, default_value_t = MethodArg::Nbro)]
        method: MethodArg,
    },
    /// NBRO against the plug-in and parametric baselines.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Convergence of the NBRO optimum in the real-world sample size.
    ConvergeN {
        #[command(flatten)]
        common: Common,
    },
    /// gGAP of NBRO recommendations across budget checkpoints.
    ConvergeBudget {
        #[command(flatten)]
        common: Common,
    },
    /// Critical-care facility experiment.
    Ccf {
        #[command(flatten)]
        common: Common,
    },
    /// Inventory closed-form cost on the 126 × 125 grid.
    GridTruth {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load(common: &Common, problem: ProblemKind) -> Result<ExperimentConfig> {
    let cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => {
            let scale = match common.scale {
                ScaleArg::Desk => Scale::Desk,
                ScaleArg::Paper => Scale::Paper,
            };
            ExperimentConfig::preset(problem, scale)
        }
    };
    cfg.validate()?;
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(cfg)
}

fn write_compare(dir: &Path, report: &CompareReport) -> Result<()> {
    output::write_rows(dir.join("metrics.csv"), &report.records)?;
    output::write_rows(dir.join("mood.csv"), &report.tests)?;
    for t in &report.tests {
        println!(
            "n={:<6} {} vs {}: median GAP {:.5} vs {:.5}, Mood p = {}",
            t.n,
            t.method_a,
            t.method_b,
            t.median_a,
            t.median_b,
            t.p_value.map_or("n/a".into(), |p| format!("{p:.4}"))
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common, problem, method } => {
            let problem = match problem {
                ProblemArg::Inventory => ProblemKind::Inventory,
                ProblemArg::Ccf => ProblemKind::Ccf,
            };
            let method = match method {
                MethodArg::Nbro => Method::Nbro,
                MethodArg::Plugin => Method::Plugin,
                MethodArg::PbExp => Method::PbExp,
                MethodArg::PbLognormal => Method::PbLognormal,
            };
            let cfg = load(&common, problem)?;
            let (summary, outcome) = run_single(&cfg, SeedLineage::new(common.seed), method)?;
            outcome
                .state
                .write_history_csv(method.name(), BufWriter::new(File::create(common.out.join("history.csv"))?))?;
            output::write_rows(common.out.join("summary.csv"), std::slice::from_ref(&summary))?;
            output::write_manifest(&common.out, "run", &cfg, common.seed)?;
            println!("x_hat = {}  f(x_hat) = {:.6}  GAP = {:.6}", summary.x_hat, summary.f_true, summary.gap);
        }
        Command::Compare { common } => {
            let cfg = load(&common, ProblemKind::Inventory)?;
            let report = compare_methods(&cfg, SeedLineage::new(common.seed), common.timings)?;
            write_compare(&common.out, &report)?;
            output::write_manifest(&common.out, "compare", &cfg, common.seed)?;
        }
        Command::Ccf { common } => {
            let cfg = load(&common, ProblemKind::Ccf)?;
            if cfg.problem != ProblemKind::Ccf {
                bail!("config for `ccf` must set problem = \"ccf\"");
            }
            let report = compare_methods(&cfg, SeedLineage::new(common.seed), common.timings)?;
            write_compare(&common.out, &report)?;
            output::write_manifest(&common.out, "ccf", &cfg, common.seed)?;
            for r in &report.records {
                println!("{} rep {}: x_hat = {}  f(x_hat) = {:.4}", r.method, r.rep, r.x_hat, r.f_true);
            }
        }
        Command::ConvergeN { common } => {
            let cfg = load(&common, ProblemKind::Inventory)?;
            let report = convergence_in_n(&cfg, SeedLineage::new(common.seed))?;
            output::write_rows(common.out.join("convergence_n.csv"), &report.rows)?;
            output::write_rows(common.out.join("summary.csv"), &report.summary)?;
            output::write_manifest(&common.out, "converge-n", &cfg, common.seed)?;
            print_summary(&report.summary);
        }
        Command::ConvergeBudget { common } => {
            let cfg = load(&common, ProblemKind::Inventory)?;
            let report = convergence_in_budget(&cfg, SeedLineage::new(common.seed))?;
            output::write_rows(common.out.join("convergence_budget.csv"), &report.rows)?;
            output::write_rows(common.out.join("summary.csv"), &report.summary)?;
            output::write_rows(common.out.join("trend.csv"), report.trend.as_slice())?;
            output::write_manifest(&common.out, "converge-budget", &cfg, common.seed)?;
            print_summary(&report.summary);
            if let Some(t) = &report.trend {
                println!("Mann-Kendall (decreasing median gGAP): S = {}, p = {:.4}", t.statistic, t.p_value);
            }
        }
        Command::GridTruth { out } => {
            fs::create_dir_all(&out)?;
            let truth = inventory_grid_truth(TRUE_DEMAND_RATE);
            truth.write_csv(BufWriter::new(File::create(out.join("grid_truth.csv"))?))?;
            println!("argmin = {}  min = {:.6}", harness::join_coords(&truth.argmin), truth.min);
        }
    }
    Ok(())
}

fn print_summary(rows: &[harness::SummaryRow]) {
    for r in rows {
        println!(
            "{:<8} {:<13} median {:.5}  mean {:.5}  95% CI [{:.5}, {:.5}]",
            r.level, r.metric, r.median, r.mean, r.ci_lo, r.ci_hi
        );
    }
}
