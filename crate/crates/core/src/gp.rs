//! Stochastic (nugget-effect) Gaussian process over design–distribution
//! pairs with a constant trend under a vague prior.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{DiscreteDistribution, Inputs};
use crate::error::{Error, Result};
use crate::optim::{latin_hypercube, nelder_mead};
use crate::rng::{labels, SeedLineage};
use crate::wasserstein::{quadratic_wasserstein, KernelParams, Point};

/// Jitter multipliers of τ² tried in order until the factorization succeeds.
pub const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Replicate-averaged simulation outputs at the evaluated points.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    points: Vec<Point>,
    means: Vec<f64>,
    reps: Vec<usize>,
    pooled_var: f64,
}

impl TrainingSet {
    pub fn new(points: Vec<Point>, means: Vec<f64>, reps: Vec<usize>, pooled_var: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewSamples {
                need: 2,
                got: points.len(),
            });
        }
        for len in [means.len(), reps.len()] {
            if len != points.len() {
                return Err(Error::DimensionMismatch {
                    expected: points.len(),
                    got: len,
                });
            }
        }
        let (d, l) = (points[0].design.len(), points[0].inputs.len());
        for p in &points {
            if p.design.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.design.len(),
                });
            }
            if p.inputs.len() != l {
                return Err(Error::DimensionMismatch {
                    expected: l,
                    got: p.inputs.len(),
                });
            }
            if p.design.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite design".into()));
            }
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("non-finite output mean".into()));
        }
        if reps.contains(&0) {
            return Err(Error::InvalidParameter("zero replications".into()));
        }
        if !(pooled_var.is_finite() && pooled_var >= 0.0) {
            return Err(Error::InvalidParameter(format!("pooled variance {pooled_var}")));
        }
        Ok(Self {
            points,
            means,
            reps,
            pooled_var,
        })
    }

    /// Averages raw replicate outputs and pools the within-point variance.
    pub fn from_replicates(points: Vec<Point>, outputs: &[Vec<f64>]) -> Result<Self> {
        if outputs.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: outputs.len(),
            });
        }
        if let Some(o) = outputs.iter().find(|o| o.len() < 2) {
            return Err(Error::TooFewSamples { need: 2, got: o.len() });
        }
        let means: Vec<f64> = outputs.iter().map(|o| o.iter().sum::<f64>() / o.len() as f64).collect();
        let reps = outputs.iter().map(Vec::len).collect();
        Self::new(points, means, reps, pooled_variance(outputs))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn reps(&self) -> &[usize] {
        &self.reps
    }

    pub fn pooled_var(&self) -> f64 {
        self.pooled_var
    }

    pub fn design_dims(&self) -> usize {
        self.points[0].design.len()
    }

    pub fn input_dims(&self) -> usize {
        self.points[0].inputs.len()
    }

    /// Index of a training point bit-identical to `p`.
    pub fn find(&self, p: &Point) -> Option<usize> {
        self.points.iter().position(|q| {
            q.design.len() == p.design.len()
                && q.design.iter().zip(&p.design).all(|(a, b)| a.to_bits() == b.to_bits())
                && (Arc::ptr_eq(&q.inputs, &p.inputs) || q.inputs == p.inputs)
        })
    }

    fn without(&self, i: usize) -> Self {
        let mut t = self.clone();
        t.points.remove(i);
        t.means.remove(i);
        t.reps.remove(i);
        t
    }
}

/// `Σ_i Σ_j (y_ij − ȳ_i)² / Σ_i (r_i − 1)`; zero when no point is replicated.
pub fn pooled_variance(outputs: &[Vec<f64>]) -> f64 {
    let mut ss = 0.0;
    let mut dof = 0usize;
    for o in outputs {
        if o.len() < 2 {
            continue;
        }
        let m = o.iter().sum::<f64>() / o.len() as f64;
        ss += o.iter().map(|y| (y - m) * (y - m)).sum::<f64>();
        dof += o.len() - 1;
    }
    if dof == 0 {
        0.0
    } else {
        ss / dof as f64
    }
}

/// Log-space search box for the hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub theta_x: Vec<(f64, f64)>,
    pub theta_p: Vec<(f64, f64)>,
    pub tau2: (f64, f64),
}

impl HyperBounds {
    /// Length scales in `[1e-2, 1e2]` times the per-dimension spread of the
    /// training points and `τ²` in `[1e-4, 1e2]` times the variance of the
    /// output means. The spread of a distribution dimension is the square
    /// root of its largest pairwise Wasserstein value.
    pub fn from_training(train: &TrainingSet) -> Self {
        Self::from_distances(train, &PairDistances::new(train.points()))
    }

    fn from_distances(train: &TrainingSet, dist: &PairDistances) -> Self {
        let scale = |r: f64| {
            let r = if r > 0.0 && r.is_finite() { r } else { 1.0 };
            (1e-2 * r, 1e2 * r)
        };
        let theta_x = (0..train.design_dims())
            .map(|k| {
                let (lo, hi) = train
                    .points
                    .iter()
                    .map(|p| p.design[k])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                scale(hi - lo)
            })
            .collect();
        let theta_p = dist.wd.iter().map(|m| scale(m.max().sqrt())).collect();

        let n = train.means.len() as f64;
        let mean = train.means.iter().sum::<f64>() / n;
        let var = train.means.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0);
        let v = if var > 0.0 {
            var
        } else if train.pooled_var > 0.0 {
            train.pooled_var
        } else {
            1.0
        };
        Self {
            theta_x,
            theta_p,
            tau2: (1e-4 * v, 1e2 * v),
        }
    }

    fn log_box(&self) -> (Vec<f64>, Vec<f64>) {
        self.theta_x
            .iter()
            .chain(&self.theta_p)
            .chain(std::iter::once(&self.tau2))
            .map(|(lo, hi)| (lo.ln(), hi.ln()))
            .unzip()
    }

    fn params_from_log(&self, z: &[f64]) -> KernelParams {
        let d = self.theta_x.len();
        let l = self.theta_p.len();
        KernelParams {
            theta_x: z[..d].iter().map(|v| v.exp()).collect(),
            theta_p: z[d..d + l].iter().map(|v| v.exp()).collect(),
            tau2: z[d + l].exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub restarts: usize,
    /// Likelihood evaluations per local search.
    pub max_evals: usize,
    /// Hyperparameters are re-estimated after this many added points.
    pub refit_every: usize,
    /// Root seed for refits triggered by [`GpModel::update`].
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_evals: 300,
            refit_every: 5,
            seed: 0,
        }
    }
}

/// Squared design gaps and Wasserstein values between training points,
/// one matrix per dimension.
#[derive(Debug, Clone)]
struct PairDistances {
    sq: Vec<DMatrix<f64>>,
    wd: Vec<DMatrix<f64>>,
}

impl PairDistances {
    fn new(points: &[Point]) -> Self {
        let s = points.len();
        let d = points[0].design.len();
        let l = points[0].inputs.len();
        let sq = (0..d)
            .map(|k| {
                DMatrix::from_fn(s, s, |i, j| {
                    let g = points[i].design[k] - points[j].design[k];
                    g * g
                })
            })
            .collect();
        let wd = (0..l)
            .map(|k| {
                let mut m = DMatrix::zeros(s, s);
                for i in 0..s {
                    for j in i + 1..s {
                        let w = quadratic_wasserstein(&points[i].inputs[k], &points[j].inputs[k]);
                        m[(i, j)] = w;
                        m[(j, i)] = w;
                    }
                }
                m
            })
            .collect();
        Self { sq, wd }
    }

    /// Grows every matrix by the row of `new` against `points` (which must
    /// not yet contain `new`).
    fn push(&mut self, points: &[Point], new: &Point) {
        let s = points.len();
        let grow = |m: &DMatrix<f64>, f: &dyn Fn(usize) -> f64| {
            DMatrix::from_fn(s + 1, s + 1, |i, j| {
                if i < s && j < s {
                    m[(i, j)]
                } else if i == s && j == s {
                    0.0
                } else {
                    f(i.min(j))
                }
            })
        };
        for (k, m) in self.sq.iter_mut().enumerate() {
            *m = grow(m, &|t| {
                let g = points[t].design[k] - new.design[k];
                g * g
            });
        }
        for (k, m) in self.wd.iter_mut().enumerate() {
            let row: Vec<f64> = points.iter().map(|p| quadratic_wasserstein(&p.inputs[k], &new.inputs[k])).collect();
            *m = grow(m, &|t| row[t]);
        }
    }

    fn remove(&self, i: usize) -> Self {
        Self {
            sq: self.sq.iter().map(|m| m.clone().remove_row(i).remove_column(i)).collect(),
            wd: self.wd.iter().map(|m| m.clone().remove_row(i).remove_column(i)).collect(),
        }
    }

    fn correlation(&self, params: &KernelParams, s: usize) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(s, s);
        for (m, t) in self.sq.iter().zip(&params.theta_x) {
            e += m * (1.0 / (2.0 * t * t));
        }
        for (m, t) in self.wd.iter().zip(&params.theta_p) {
            e += m * (1.0 / (2.0 * t * t));
        }
        e.map(|v| (-v).exp())
    }
}

/// Quantities derived from one factorization of the training covariance.
#[derive(Debug, Clone)]
struct Solved {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
    beta0: f64,
    ainv_one: DVector<f64>,
    one_ainv_one: f64,
    weights: DVector<f64>,
    log_lik: f64,
}

fn covariance(corr: &DMatrix<f64>, params: &KernelParams, noise_var: f64, reps: &[usize], jitter: f64) -> DMatrix<f64> {
    let mut a = corr * params.tau2;
    for (i, r) in reps.iter().enumerate() {
        a[(i, i)] += noise_var / *r as f64 + jitter;
    }
    a
}

fn factor_ladder(
    corr: &DMatrix<f64>,
    params: &KernelParams,
    noise_var: f64,
    reps: &[usize],
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    for mult in JITTER_LADDER {
        let jitter = mult * params.tau2;
        if let Some(c) = Cholesky::new(covariance(corr, params, noise_var, reps, jitter)) {
            if chol_ok(&c) {
                return Ok((c, jitter));
            }
        }
    }
    Err(Error::NotPositiveDefinite(JITTER_LADDER[JITTER_LADDER.len() - 1] * params.tau2))
}

fn chol_ok(c: &Cholesky<f64, Dyn>) -> bool {
    c.l_dirty().diagonal().iter().all(|v| v.is_finite() && *v > 0.0)
}

fn solve_with(chol: Cholesky<f64, Dyn>, jitter: f64, means: &[f64]) -> Result<Solved> {
    let s = means.len();
    let ones = DVector::from_element(s, 1.0);
    let y = DVector::from_column_slice(means);
    let ainv_one = chol.solve(&ones);
    let one_ainv_one = ainv_one.sum();
    if !(one_ainv_one.is_finite() && one_ainv_one > 0.0) {
        return Err(Error::NotPositiveDefinite(jitter));
    }
    let beta0 = ainv_one.dot(&y) / one_ainv_one;
    let resid = y - ones * beta0;
    let weights = chol.solve(&resid);
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    let log_lik = -0.5 * resid.dot(&weights) - log_det_half - 0.5 * s as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(Solved {
        chol,
        jitter,
        beta0,
        ainv_one,
        one_ainv_one,
        weights,
        log_lik,
    })
}

/// Profile log-likelihood of the nugget-effect model at fixed kernel
/// parameters, with the trend profiled out and the noise fixed to the
/// pooled variance.
pub fn profile_log_likelihood(train: &TrainingSet, params: &KernelParams) -> Result<f64> {
    let dist = PairDistances::new(train.points());
    Ok(solve_dist(train, &dist, params)?.log_lik)
}

fn solve_dist(train: &TrainingSet, dist: &PairDistances, params: &KernelParams) -> Result<Solved> {
    let corr = dist.correlation(params, train.len());
    let (chol, jitter) = factor_ladder(&corr, params, train.pooled_var, &train.reps)?;
    solve_with(chol, jitter, &train.means)
}

/// Leave-one-out prediction at one training point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooEntry {
    pub mean: f64,
    /// Predictive sd of the held-out replicate average (includes its noise).
    pub sd: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub entries: Vec<LooEntry>,
    pub mae: f64,
    /// Fraction of actuals inside the central 95% predictive interval.
    pub coverage: f64,
}

/// A fitted stochastic GP. Immutable; [`GpModel::update`] returns a new model.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    noise_var: f64,
    train: TrainingSet,
    options: FitOptions,
    dist: PairDistances,
    solved: Solved,
    updates_since_fit: usize,
}

impl GpModel {
    /// Maximum-likelihood fit over `bounds` by multistart Nelder–Mead in
    /// log space from Latin-hypercube starts.
    pub fn fit<R: Rng + ?Sized>(train: TrainingSet, bounds: &HyperBounds, options: &FitOptions, rng: &mut R) -> Result<Self> {
        if options.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if bounds.theta_x.len() != train.design_dims() || bounds.theta_p.len() != train.input_dims() {
            return Err(Error::DimensionMismatch {
                expected: train.design_dims() + train.input_dims(),
                got: bounds.theta_x.len() + bounds.theta_p.len(),
            });
        }
        let dist = PairDistances::new(train.points());
        let (lo, hi) = bounds.log_box();
        let dim = lo.len();

        let constant = train.means.iter().all(|m| *m == train.means[0]);
        let best_z = if constant {
            // The likelihood then only grows as τ² shrinks.
            let mut z: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            z[dim - 1] = lo[dim - 1];
            z
        } else {
            let objective = |z: &[f64]| match solve_dist(&train, &dist, &bounds.params_from_log(z)) {
                Ok(s) => -s.log_lik,
                Err(_) => f64::INFINITY,
            };
            let step: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.1 * (b - a)).collect();
            let starts = latin_hypercube(options.restarts, dim, rng);
            let mut best: Option<(Vec<f64>, f64)> = None;
            for u in starts {
                let z0: Vec<f64> = (0..dim).map(|k| lo[k] + u[k] * (hi[k] - lo[k])).collect();
                let (z, f) = nelder_mead(objective, &z0, &step, &lo, &hi, options.max_evals);
                if best.as_ref().is_none_or(|b| f < b.1) {
                    best = Some((z, f));
                }
            }
            let (z, f) = best.expect("at least one restart");
            if !f.is_finite() {
                return Err(Error::NotPositiveDefinite(
                    JITTER_LADDER[JITTER_LADDER.len() - 1] * bounds.params_from_log(&z).tau2,
                ));
            }
            z
        };
        let params = bounds.params_from_log(&best_z);
        let solved = solve_dist(&train, &dist, &params)?;
        Ok(Self {
            noise_var: train.pooled_var,
            params,
            train,
            options: options.clone(),
            dist,
            solved,
            updates_since_fit: 0,
        })
    }

    /// Model at fixed hyperparameters, noise variance set to the pooled variance.
    pub fn with_params(train: TrainingSet, params: KernelParams, options: FitOptions) -> Result<Self> {
        params.validate()?;
        if params.design_dims() != train.design_dims() || params.input_dims() != train.input_dims() {
            return Err(Error::DimensionMismatch {
                expected: train.design_dims() + train.input_dims(),
                got: params.design_dims() + params.input_dims(),
            });
        }
        let dist = PairDistances::new(train.points());
        let solved = solve_dist(&train, &dist, &params)?;
        Ok(Self {
            noise_var: train.pooled_var,
            params,
            train,
            options,
            dist,
            solved,
            updates_since_fit: 0,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn beta0(&self) -> f64 {
        self.solved.beta0
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn jitter(&self) -> f64 {
        self.solved.jitter
    }

    pub fn train(&self) -> &TrainingSet {
        &self.train
    }

    pub fn options(&self) -> &FitOptions {
        &self.options
    }

    pub fn log_likelihood(&self) -> f64 {
        self.solved.log_lik
    }

    pub fn updates_since_fit(&self) -> usize {
        self.updates_since_fit
    }

    /// `A⁻¹(Ȳ − β̂1)`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.solved.weights
    }

    /// `A⁻¹1`.
    pub fn ainv_one(&self) -> &DVector<f64> {
        &self.solved.ainv_one
    }

    /// `1ᵀA⁻¹1`.
    pub fn one_ainv_one(&self) -> f64 {
        self.solved.one_ainv_one
    }

    /// `A⁻¹b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solved.chol.solve(b)
    }

    /// `L⁻¹b` for the lower Cholesky factor `L`, so that
    /// `aᵀA⁻¹b = (L⁻¹a)ᵀ(L⁻¹b)`.
    pub fn half_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solved
            .chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("factor has a positive diagonal")
    }

    /// Prior covariance `τ² r(p1, p2)`.
    pub fn prior_cov(&self, p1: &Point, p2: &Point) -> f64 {
        self.params.tau2
            * self.params.design_correlation(&p1.design, &p2.design)
            * self.params.input_correlation(&p1.inputs, &p2.inputs)
    }

    /// `τ² r(p, t_i)` against every training point.
    pub fn cross_cov(&self, p: &Point) -> DVector<f64> {
        DVector::from_iterator(self.train.len(), self.train.points.iter().map(|t| self.prior_cov(p, t)))
    }

    pub fn posterior_mean(&self, p: &Point) -> f64 {
        self.mean_from_cross(&self.cross_cov(p))
    }

    pub fn mean_from_cross(&self, k: &DVector<f64>) -> f64 {
        self.solved.beta0 + k.dot(&self.solved.weights)
    }

    /// Posterior covariance including the trend-uncertainty term.
    pub fn posterior_cov(&self, p1: &Point, p2: &Point) -> f64 {
        let (k1, k2) = (self.cross_cov(p1), self.cross_cov(p2));
        self.cov_from_cross(self.prior_cov(p1, p2), &k1, &k2)
    }

    /// `prior − k1ᵀA⁻¹k2 + η1η2 / 1ᵀA⁻¹1` with `η = 1 − 1ᵀA⁻¹k`.
    pub fn cov_from_cross(&self, prior: f64, k1: &DVector<f64>, k2: &DVector<f64>) -> f64 {
        let v1 = self.half_solve(k1);
        let v2 = self.half_solve(k2);
        let eta1 = 1.0 - self.solved.ainv_one.dot(k1);
        let eta2 = 1.0 - self.solved.ainv_one.dot(k2);
        prior - v1.dot(&v2) + eta1 * eta2 / self.solved.one_ainv_one
    }

    /// Posterior covariance treating the trend as known.
    pub fn posterior_cov_known_trend(&self, p1: &Point, p2: &Point) -> f64 {
        let v1 = self.half_solve(&self.cross_cov(p1));
        let v2 = self.half_solve(&self.cross_cov(p2));
        self.prior_cov(p1, p2) - v1.dot(&v2)
    }

    pub fn posterior_var(&self, p: &Point) -> f64 {
        self.posterior_cov(p, p)
    }

    /// Joint posterior covariance matrix over `points`.
    pub fn posterior_cov_matrix(&self, points: &[Point]) -> DMatrix<f64> {
        let ks: Vec<DVector<f64>> = points.iter().map(|p| self.cross_cov(p)).collect();
        let vs: Vec<DVector<f64>> = ks.iter().map(|k| self.half_solve(k)).collect();
        let etas: Vec<f64> = ks.iter().map(|k| 1.0 - self.solved.ainv_one.dot(k)).collect();
        let n = points.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.prior_cov(&points[i], &points[j]) - vs[i].dot(&vs[j])
                    + etas[i] * etas[j] / self.solved.one_ainv_one;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Adds an evaluated point with `reps` replications averaging `ybar`.
    ///
    /// A point bit-identical to a training point merges into it
    /// (replication-weighted mean). Otherwise the point is appended by
    /// extending the Cholesky factor, and every `refit_every` appended
    /// points the hyperparameters are re-estimated.
    pub fn update(&self, point: Point, ybar: f64, reps: usize) -> Result<Self> {
        if reps == 0 || !ybar.is_finite() {
            return Err(Error::InvalidParameter(format!("bad update (ybar {ybar}, reps {reps})")));
        }
        if point.design.len() != self.train.design_dims() || point.inputs.len() != self.train.input_dims() {
            return Err(Error::DimensionMismatch {
                expected: self.train.design_dims() + self.train.input_dims(),
                got: point.design.len() + point.inputs.len(),
            });
        }
        let mut next = self.clone();
        if let Some(i) = self.train.find(&point) {
            let r0 = self.train.reps[i] as f64;
            next.train.means[i] = (r0 * self.train.means[i] + reps as f64 * ybar) / (r0 + reps as f64);
            next.train.reps[i] += reps;
            next.solved = solve_dist(&next.train, &next.dist, &next.params)?;
            return Ok(next);
        }

        next.dist.push(&self.train.points, &point);
        next.train.points.push(point);
        next.train.means.push(ybar);
        next.train.reps.push(reps);
        next.updates_since_fit += 1;

        if self.options.refit_every > 0 && next.updates_since_fit >= self.options.refit_every {
            let bounds = HyperBounds::from_distances(&next.train, &next.dist);
            let mut rng = SeedLineage::new(self.options.seed).stream(labels::FIT, next.train.len() as u64);
            let mut refit = Self::fit(next.train, &bounds, &self.options, &mut rng)?;
            refit.noise_var = self.noise_var;
            return Ok(refit);
        }

        next.solved = next.extend_factor()?;
        Ok(next)
    }

    /// Factor for the last training point appended to `self.train`, reusing
    /// the previous factor when possible.
    fn extend_factor(&self) -> Result<Solved> {
        let s = self.train.len();
        let new = &self.train.points[s - 1];
        let jitter = self.solved.jitter;
        let mut col = DVector::from_iterator(s, self.train.points.iter().map(|t| self.prior_cov(new, t)));
        col[s - 1] = self.params.tau2 + self.noise_var / self.train.reps[s - 1] as f64 + jitter;
        let chol = self.solved.chol.insert_column(s - 1, col);
        if chol_ok(&chol) {
            solve_with(chol, jitter, &self.train.means)
        } else {
            solve_dist(&self.train, &self.dist, &self.params)
        }
    }

    /// Leave-one-out predictions at fixed hyperparameters.
    pub fn loo_cv(&self) -> Result<LooReport> {
        let s = self.train.len();
        if s < 3 {
            return Err(Error::TooFewSamples { need: 3, got: s });
        }
        let z = 1.959_963_984_540_054;
        let mut entries = Vec::with_capacity(s);
        for i in 0..s {
            let sub = self.train.without(i);
            let dist = self.dist.remove(i);
            let solved = solve_dist(&sub, &dist, &self.params)?;
            let m = Self {
                params: self.params.clone(),
                noise_var: self.noise_var,
                train: sub,
                options: self.options.clone(),
                dist,
                solved,
                updates_since_fit: 0,
            };
            let p = &self.train.points[i];
            let var = m.posterior_var(p).max(0.0) + self.noise_var / self.train.reps[i] as f64;
            entries.push(LooEntry {
                mean: m.posterior_mean(p),
                sd: var.sqrt(),
                actual: self.train.means[i],
            });
        }
        let mae = entries.iter().map(|e| (e.mean - e.actual).abs()).sum::<f64>() / s as f64;
        let inside = entries.iter().filter(|e| (e.actual - e.mean).abs() <= z * e.sd).count();
        Ok(LooReport {
            entries,
            mae,
            coverage: inside as f64 / s as f64,
        })
    }

    pub fn snapshot(&self) -> GpSnapshot {
        GpSnapshot {
            params: self.params.clone(),
            noise_var: self.noise_var,
            jitter: self.solved.jitter,
            beta0: self.solved.beta0,
            options: self.options.clone(),
            updates_since_fit: self.updates_since_fit,
            points: self
                .train
                .points
                .iter()
                .map(|p| PointSnapshot {
                    design: p.design.clone(),
                    inputs: p.inputs.to_vec(),
                })
                .collect(),
            means: self.train.means.clone(),
            reps: self.train.reps.clone(),
            pooled_var: self.train.pooled_var,
        }
    }

    /// Rebuilds a model with exactly the stored hyperparameters and jitter.
    pub fn from_snapshot(snap: GpSnapshot) -> Result<Self> {
        snap.params.validate()?;
        let points = snap
            .points
            .into_iter()
            .map(|p| Point::new(p.design, Arc::from(p.inputs)))
            .collect();
        let train = TrainingSet::new(points, snap.means, snap.reps, snap.pooled_var)?;
        let dist = PairDistances::new(train.points());
        let corr = dist.correlation(&snap.params, train.len());
        let a = covariance(&corr, &snap.params, snap.noise_var, &train.reps, snap.jitter);
        let chol = Cholesky::new(a)
            .filter(chol_ok)
            .ok_or(Error::NotPositiveDefinite(snap.jitter))?;
        let solved = solve_with(chol, snap.jitter, &train.means)?;
        Ok(Self {
            params: snap.params,
            noise_var: snap.noise_var,
            train,
            options: snap.options,
            dist,
            solved,
            updates_since_fit: snap.updates_since_fit,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.snapshot())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_snapshot(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSnapshot {
    pub design: Vec<f64>,
    pub inputs: Vec<DiscreteDistribution>,
}

/// Self-describing serialized form of a [`GpModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub params: KernelParams,
    pub noise_var: f64,
    pub jitter: f64,
    /// Informational; recomputed on load.
    pub beta0: f64,
    pub options: FitOptions,
    pub updates_since_fit: usize,
    pub points: Vec<PointSnapshot>,
    pub means: Vec<f64>,
    pub reps: Vec<usize>,
    pub pooled_var: f64,
}

/// Convenience for building points from plain slices.
pub fn point(design: &[f64], inputs: &[DiscreteDistribution]) -> Point {
    Point::new(design.to_vec(), Arc::from(inputs.to_vec()) as Inputs)
}
