//! Monte Carlo collapse of the stochastic GP over a fixed set of posterior
//! input draws, giving a GP over the design alone, plus the one-step
//! lookahead law used by expected improvement.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::distributions::Inputs;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::wasserstein::Point;

/// `Ĝ_s(x) = (1/N) Σ_i F_s(x, P_i)` for fixed atoms `P_1..P_N`.
#[derive(Debug, Clone)]
pub struct GObjectiveModel {
    gp: Arc<GpModel>,
    atoms: Vec<Inputs>,
    /// `r_M(P_i, P_t)` for atom `i` and training point `t`.
    atom_train: DMatrix<f64>,
    /// Column means of `atom_train`.
    mean_atom_train: DVector<f64>,
    /// `(1/N²) Σ_i Σ_j r_M(P_i, P_j)`.
    mean_atom_pair: f64,
}

/// An input-distribution candidate with its correlations precomputed.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub inputs: Inputs,
    /// `r_M(p, P_t)` against every training point.
    train_corr: DVector<f64>,
    /// `(1/N) Σ_i r_M(P_i, p)`.
    atom_corr_mean: f64,
}

/// Predictive law of `Ĝ_{s+1}(x)` before observing the next evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookahead {
    pub mu: f64,
    pub sigma: f64,
    /// Variance of the posterior-mean shift.
    pub shift_var: f64,
    /// Averaged conditioned covariance.
    pub residual_var: f64,
    /// `σ′²` came out negative and was set to zero.
    pub clamped: bool,
}

impl GObjectiveModel {
    pub fn new(gp: Arc<GpModel>, atoms: Vec<Inputs>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("need at least one atom".into()));
        }
        let l = gp.params().input_dims();
        if let Some(a) = atoms.iter().find(|a| a.len() != l) {
            return Err(Error::DimensionMismatch {
                expected: l,
                got: a.len(),
            });
        }
        let train = gp.train().points();
        let params = gp.params();
        let n = atoms.len();
        let atom_train = DMatrix::from_fn(n, train.len(), |i, t| params.input_correlation(&atoms[i], &train[t].inputs));
        let mean_atom_train = DVector::from_iterator(
            train.len(),
            atom_train.column_iter().map(|c| c.sum() / n as f64),
        );
        let mut pair_sum = n as f64;
        for i in 0..n {
            for j in i + 1..n {
                pair_sum += 2.0 * params.input_correlation(&atoms[i], &atoms[j]);
            }
        }
        Ok(Self {
            gp,
            atoms,
            atom_train,
            mean_atom_train,
            mean_atom_pair: pair_sum / (n * n) as f64,
        })
    }

    pub fn gp(&self) -> &GpModel {
        &self.gp
    }

    pub fn gp_arc(&self) -> &Arc<GpModel> {
        &self.gp
    }

    pub fn atoms(&self) -> &[Inputs] {
        &self.atoms
    }

    pub fn n_mc(&self) -> usize {
        self.atoms.len()
    }

    /// `r_X(x, x_t)` against every training design.
    fn design_corr(&self, x: &[f64]) -> DVector<f64> {
        let params = self.gp.params();
        DVector::from_iterator(
            self.gp.train().len(),
            self.gp.train().points().iter().map(|t| params.design_correlation(x, &t.design)),
        )
    }

    /// `(1/N) Σ_i τ² r((x, P_i), t)` against every training point.
    fn mean_cross(&self, x: &[f64]) -> DVector<f64> {
        self.design_corr(x).component_mul(&self.mean_atom_train) * self.gp.params().tau2
    }

    /// `μ_s(x) = (1/N) Σ_i m_s(x, P_i)`.
    pub fn g_mean(&self, x: &[f64]) -> f64 {
        self.gp.mean_from_cross(&self.mean_cross(x))
    }

    /// `c_s(x, x') = (1/N²) Σ_i Σ_j k_s((x, P_i), (x', P_j))`.
    pub fn g_cov(&self, x: &[f64], x2: &[f64]) -> f64 {
        let prior = self.gp.params().tau2 * self.gp.params().design_correlation(x, x2) * self.mean_atom_pair;
        self.gp.cov_from_cross(prior, &self.mean_cross(x), &self.mean_cross(x2))
    }

    pub fn g_var(&self, x: &[f64]) -> f64 {
        self.g_cov(x, x)
    }

    pub fn prepare(&self, inputs: Inputs) -> Result<Candidate> {
        let params = self.gp.params();
        if inputs.len() != params.input_dims() {
            return Err(Error::DimensionMismatch {
                expected: params.input_dims(),
                got: inputs.len(),
            });
        }
        let train_corr = DVector::from_iterator(
            self.gp.train().len(),
            self.gp.train().points().iter().map(|t| params.input_correlation(&inputs, &t.inputs)),
        );
        let atom_corr_mean = self
            .atoms
            .iter()
            .map(|a| params.input_correlation(a, &inputs))
            .sum::<f64>()
            / self.n_mc() as f64;
        Ok(Candidate {
            inputs,
            train_corr,
            atom_corr_mean,
        })
    }

    /// Law of `Ĝ_{s+1}(x)` after a hypothetical evaluation of `reps`
    /// replications at `(x, cand)`.
    ///
    /// `σ′² = [ (1/N) Σ_i k_s(a_i, b) ]² / (k_s(b, b) + σ²_ε/r)
    ///      + (1/N²) Σ_i Σ_j k′(a_i, a_j)` with `a_i = (x, P_i)`, `b = (x, p)`
    /// and `k′(a, a') = k_s(a, a') − k_s(a, b) k_s(b, a') / (k_s(b, b) + σ²_ε/r)`.
    pub fn lookahead(&self, x: &[f64], cand: &Candidate, reps: usize) -> Lookahead {
        let tau2 = self.gp.params().tau2;
        let rx = self.design_corr(x);
        let k_bar = rx.component_mul(&self.mean_atom_train) * tau2;
        let k_p = rx.component_mul(&cand.train_corr) * tau2;

        let cross_mean = self.gp.cov_from_cross(tau2 * cand.atom_corr_mean, &k_bar, &k_p);
        let k_pp = self.gp.cov_from_cross(tau2, &k_p, &k_p);
        let denom = k_pp + self.gp.noise_var() / reps.max(1) as f64;
        let c = self.gp.cov_from_cross(tau2 * self.mean_atom_pair, &k_bar, &k_bar);

        let shift_var = if denom > 0.0 {
            cross_mean * cross_mean / denom
        } else {
            0.0
        };
        let residual_var = c - shift_var;
        let total = shift_var + residual_var;
        let clamped = total < 0.0;
        Lookahead {
            mu: self.gp.mean_from_cross(&k_bar),
            sigma: total.max(0.0).sqrt(),
            shift_var,
            residual_var,
            clamped,
        }
    }

    pub fn lookahead_inputs(&self, x: &[f64], inputs: Inputs, reps: usize) -> Result<Lookahead> {
        Ok(self.lookahead(x, &self.prepare(inputs)?, reps))
    }

    /// The point `(x, P_i)`.
    pub fn atom_point(&self, x: &[f64], i: usize) -> Point {
        Point::new(x.to_vec(), Arc::clone(&self.atoms[i]))
    }

    /// Correlations `r_M(P_i, P_t)` between atoms and training points.
    pub fn atom_train_corr(&self) -> &DMatrix<f64> {
        &self.atom_train
    }
}
