use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::DiscreteDistribution;
use crate::error::{Error, Result};

/// Points used by the composite Simpson rule in [`BaseDistribution::expect`].
pub const QUADRATURE_POINTS: usize = 2001;
/// Upper-tail mass ignored when integrating over an unbounded support.
pub const QUADRATURE_TAIL: f64 = 1e-8;

/// Prior guess for one input dimension of a Dirichlet process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseDistribution {
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    /// Parameters of the underlying normal on the log scale.
    Lognormal { mu: f64, sigma: f64 },
    Discrete(DiscreteDistribution),
}

impl BaseDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let b = Self::Uniform { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let b = Self::Exponential { rate };
        b.validate()?;
        Ok(b)
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        let b = Self::Lognormal { mu, sigma };
        b.validate()?;
        Ok(b)
    }

    /// Lognormal with the given mean and standard deviation of the variable
    /// itself (not of its logarithm).
    pub fn lognormal_from_moments(mean: f64, sd: f64) -> Result<Self> {
        if !(mean > 0.0 && sd > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lognormal moments must be positive (mean {mean}, sd {sd})"
            )));
        }
        let sigma2 = (1.0 + (sd / mean).powi(2)).ln();
        Self::lognormal(mean.ln() - 0.5 * sigma2, sigma2.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            Self::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Self::Lognormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma > 0.0,
            Self::Discrete(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid base distribution {self:?}")))
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            Self::Lognormal { mu, sigma } => {
                if t <= 0.0 {
                    0.0
                } else {
                    standard_normal().cdf((t.ln() - mu) / sigma)
                }
            }
            Self::Discrete(d) => d.cdf(t),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Lognormal { mu, sigma } => (mu + sigma * standard_normal().inverse_cdf(u)).exp(),
            Self::Discrete(d) => d.quantile(u),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Uniform { lo, hi } => lo + rng.random::<f64>() * (hi - lo),
            Self::Exponential { rate } => -(1.0 - rng.random::<f64>()).ln() / rate,
            Self::Lognormal { mu, sigma } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                (mu + sigma * z).exp()
            }
            Self::Discrete(d) => d.sampler().sample(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Exponential { rate } => 1.0 / rate,
            Self::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Self::Discrete(d) => d.mean(),
        }
    }

    /// Equal-weight atoms at the midpoint quantiles `(k - 1/2)/m`.
    pub fn discretize(&self, m: usize) -> Result<DiscreteDistribution> {
        if m == 0 {
            return Err(Error::InvalidParameter("discretization needs at least one atom".into()));
        }
        let atoms = (1..=m).map(|k| self.quantile((k as f64 - 0.5) / m as f64)).collect();
        DiscreteDistribution::new(atoms, vec![1.0; m])
    }

    /// `E[h(ξ)]` by deterministic quadrature.
    ///
    /// Continuous bases use composite Simpson with [`QUADRATURE_POINTS`]
    /// nodes; unbounded supports are cut at the `1 - QUADRATURE_TAIL`
    /// quantile. Discrete bases are summed exactly.
    pub fn expect<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        match self {
            Self::Uniform { lo, hi } => simpson(&h, *lo, *hi) / (hi - lo),
            Self::Exponential { rate } => {
                let upper = self.quantile(1.0 - QUADRATURE_TAIL);
                simpson(|x| h(x) * rate * (-rate * x).exp(), 0.0, upper)
            }
            Self::Lognormal { mu, sigma } => {
                let upper = self.quantile(1.0 - QUADRATURE_TAIL);
                let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                simpson(
                    |x| {
                        if x <= 0.0 {
                            0.0
                        } else {
                            let z = (x.ln() - mu) / sigma;
                            h(x) * norm * (-0.5 * z * z).exp() / x
                        }
                    },
                    0.0,
                    upper,
                )
            }
            Self::Discrete(d) => d.expect(h),
        }
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let intervals = QUADRATURE_POINTS - 1;
    let step = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for i in 1..intervals {
        let x = a + step * i as f64;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * step / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_validation() {
        assert!(BaseDistribution::uniform(1.0, 1.0).is_err());
        assert!(BaseDistribution::exponential(0.0).is_err());
        assert!(BaseDistribution::lognormal(0.0, -1.0).is_err());
        assert!(BaseDistribution::lognormal_from_moments(-1.0, 1.0).is_err());
    }

    #[test]
    fn lognormal_moment_inversion() {
        let b = BaseDistribution::lognormal_from_moments(3.4, 3.5).unwrap();
        let mean = b.expect(|x| x);
        let var = b.expect(|x| (x - 3.4) * (x - 3.4));
        assert!((mean - 3.4).abs() < 1e-3, "{mean}");
        assert!((var.sqrt() - 3.5).abs() < 2e-2, "{}", var.sqrt());
        assert!((b.mean() - 3.4).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let u = BaseDistribution::uniform(0.0, 1.0).unwrap();
        assert!((u.expect(|x| x * x) - 1.0 / 3.0).abs() < 1e-12);
        let e = BaseDistribution::exponential(0.5).unwrap();
        assert!((e.expect(|x| x) - 2.0).abs() < 1e-6);
        // truncation at the 1-1e-8 quantile drops ~1.5e-5 of the second moment
        assert!((e.expect(|x| x * x) - 8.0).abs() < 5e-5);
    }

    #[test]
    fn discretized_exponential_mean() {
        let d = BaseDistribution::exponential(0.0002).unwrap().discretize(100_000).unwrap();
        assert_eq!(d.len(), 100_000);
        assert!((d.mean() - 5000.0).abs() / 5000.0 < 1e-3);
    }

    #[test]
    fn cdf_quantile_inverse() {
        for b in [
            BaseDistribution::uniform(-2.0, 3.0).unwrap(),
            BaseDistribution::exponential(2.0).unwrap(),
            BaseDistribution::lognormal(0.3, 0.8).unwrap(),
        ] {
            for u in [0.01, 0.3, 0.5, 0.9, 0.999] {
                assert!((b.cdf(b.quantile(u)) - u).abs() < 1e-9, "{b:?} {u}");
            }
        }
    }
}
