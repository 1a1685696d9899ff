//! Quadratic Wasserstein distance between univariate distributions and the
//! product correlation kernel over design–distribution pairs.

use serde::{Deserialize, Serialize};

use crate::distributions::{DiscreteDistribution, Inputs};
use crate::error::{Error, Result};

/// Squared-cost optimal transport value `∫₀¹ (F_Q⁻¹(u) − F_R⁻¹(u))² du`.
///
/// In one dimension the comonotone coupling is optimal, so the integral is
/// evaluated exactly by walking the merged cumulative-weight breakpoints of
/// the two quantile functions. No square root is taken.
pub fn quadratic_wasserstein(q: &DiscreteDistribution, r: &DiscreteDistribution) -> f64 {
    let (qa, qw) = (q.support(), q.weights());
    let (ra, rw) = (r.support(), r.weights());
    let (mut i, mut j) = (0, 0);
    let (mut cq, mut cr) = (qw[0], rw[0]);
    let mut prev = 0.0;
    let mut total = 0.0;
    loop {
        let next = cq.min(cr);
        let d = qa[i] - ra[j];
        total += (next - prev).max(0.0) * d * d;
        prev = next;
        let last_q = i + 1 == qa.len();
        let last_r = j + 1 == ra.len();
        if last_q && last_r {
            break;
        }
        // Advance whichever quantile step ends first; at the tail the
        // cumulative sums may fall short of 1 by rounding.
        if (cq <= cr && !last_q) || last_r {
            i += 1;
            cq += qw[i];
        } else {
            j += 1;
            cr += rw[j];
        }
    }
    let d = qa[qa.len() - 1] - ra[ra.len() - 1];
    total + (1.0 - prev).max(0.0) * d * d
}

/// Length scales and process variance of the design × distribution kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub theta_x: Vec<f64>,
    pub theta_p: Vec<f64>,
    pub tau2: f64,
}

impl KernelParams {
    pub fn new(theta_x: Vec<f64>, theta_p: Vec<f64>, tau2: f64) -> Result<Self> {
        let p = Self {
            theta_x,
            theta_p,
            tau2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let scales_ok = self
            .theta_x
            .iter()
            .chain(&self.theta_p)
            .all(|t| t.is_finite() && *t > 0.0);
        if !scales_ok {
            return Err(Error::InvalidParameter("length scales must be positive".into()));
        }
        if !(self.tau2.is_finite() && self.tau2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "process variance must be positive, got {}",
                self.tau2
            )));
        }
        Ok(())
    }

    pub fn design_dims(&self) -> usize {
        self.theta_x.len()
    }

    pub fn input_dims(&self) -> usize {
        self.theta_p.len()
    }

    /// `exp(-Σ sq_dx_i / (2 θ²_{1,i}))` given squared coordinate gaps.
    pub fn design_correlation_from_sq(&self, sq: impl Iterator<Item = f64>) -> f64 {
        let s: f64 = sq
            .zip(&self.theta_x)
            .map(|(d2, t)| d2 / (2.0 * t * t))
            .sum();
        (-s).exp()
    }

    /// `exp(-Σ WD_j / (2 θ²_{2,j}))` given per-dimension Wasserstein values.
    pub fn input_correlation_from_wd(&self, wd: impl Iterator<Item = f64>) -> f64 {
        let s: f64 = wd
            .zip(&self.theta_p)
            .map(|(w, t)| w / (2.0 * t * t))
            .sum();
        (-s).exp()
    }

    pub fn design_correlation(&self, a: &[f64], b: &[f64]) -> f64 {
        self.design_correlation_from_sq(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
    }

    pub fn input_correlation(&self, a: &[DiscreteDistribution], b: &[DiscreteDistribution]) -> f64 {
        self.input_correlation_from_wd(a.iter().zip(b).map(|(p, q)| quadratic_wasserstein(p, q)))
    }
}

/// A design together with one input distribution per input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub design: Vec<f64>,
    pub inputs: Inputs,
}

impl Point {
    pub fn new(design: Vec<f64>, inputs: Inputs) -> Self {
        Self { design, inputs }
    }
}

/// `r_X(x, x') · r_M(P, P')`.
pub fn pair_correlation(a: &Point, b: &Point, params: &KernelParams) -> Result<f64> {
    for p in [a, b] {
        if p.design.len() != params.design_dims() {
            return Err(Error::DimensionMismatch {
                expected: params.design_dims(),
                got: p.design.len(),
            });
        }
        if p.inputs.len() != params.input_dims() {
            return Err(Error::DimensionMismatch {
                expected: params.input_dims(),
                got: p.inputs.len(),
            });
        }
    }
    Ok(params.design_correlation(&a.design, &b.design)
        * params.input_correlation(&a.inputs, &b.inputs))
}
