use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability distribution with finitely many atoms on the real line.
///
/// Atoms are strictly increasing, every weight is positive and the weights
/// sum to one. Empirical data, Dirichlet-process draws and discretized
/// parametric draws all end up in this form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscrete", into = "RawDiscrete")]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDiscrete {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawDiscrete> for DiscreteDistribution {
    type Error = Error;

    fn try_from(raw: RawDiscrete) -> Result<Self> {
        // Canonical input is kept bit-for-bit so serialization round-trips.
        let canonical = raw.support.len() == raw.weights.len()
            && !raw.support.is_empty()
            && raw.support.iter().all(|a| a.is_finite())
            && raw.support.windows(2).all(|w| w[0] < w[1])
            && raw.weights.iter().all(|w| w.is_finite() && *w > 0.0)
            && (raw.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        if canonical {
            Ok(DiscreteDistribution {
                support: raw.support,
                weights: raw.weights,
            })
        } else {
            DiscreteDistribution::new(raw.support, raw.weights)
        }
    }
}

impl From<DiscreteDistribution> for RawDiscrete {
    fn from(d: DiscreteDistribution) -> Self {
        RawDiscrete {
            support: d.support,
            weights: d.weights,
        }
    }
}

impl DiscreteDistribution {
    /// Builds a distribution from unsorted atoms and nonnegative weights.
    ///
    /// Atoms equal under `==` are merged, zero-weight atoms dropped and the
    /// weights renormalized.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        if let Some(a) = atoms.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidDistribution(format!("non-finite atom {a}")));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("bad weight {w}")));
        }

        let mut pairs: Vec<(f64, f64)> = atoms
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if pairs.is_empty() {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut support = Vec::with_capacity(pairs.len());
        let mut merged = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            // -0.0 and 0.0 compare equal and are merged on purpose
            if support.last() == Some(&a) {
                *merged.last_mut().unwrap() += w;
            } else {
                support.push(a);
                merged.push(w);
            }
        }
        let total: f64 = merged.iter().sum();
        let weights = merged.into_iter().map(|w| w / total).collect();
        Ok(Self { support, weights })
    }

    pub fn point_mass(atom: f64) -> Self {
        assert!(atom.is_finite(), "point mass at non-finite atom");
        Self {
            support: vec![atom],
            weights: vec![1.0],
        }
    }

    /// Equal weight on every value; repeated values accumulate weight.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyData);
        }
        Self::new(values.to_vec(), vec![1.0; values.len()])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(a, w)| w * f(a)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|a| a)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|a| (a - m) * (a - m))
    }

    pub fn sd(&self) -> f64 {
        self.variance().max(0.0).sqrt()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let k = self.support.partition_point(|&a| a <= t);
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }

    /// Left-continuous inverse: the smallest atom whose cumulative weight
    /// reaches `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (a, w) in self.iter() {
            acc += w;
            if acc >= u {
                return a;
            }
        }
        *self.support.last().unwrap()
    }

    /// Translates every atom by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self::new(
            self.support.iter().map(|a| a + c).collect(),
            self.weights.clone(),
        )
        .expect("shifting keeps a valid distribution")
    }

    pub fn sampler(&self) -> DiscreteSampler<'_> {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = self
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = f64::INFINITY;
        DiscreteSampler {
            support: &self.support,
            cumulative,
        }
    }
}

/// Inverse-CDF sampler over a [`DiscreteDistribution`].
#[derive(Debug, Clone)]
pub struct DiscreteSampler<'a> {
    support: &'a [f64],
    cumulative: Vec<f64>,
}

impl DiscreteSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.at(u)
    }

    pub fn at(&self, u: f64) -> f64 {
        let k = self.cumulative.partition_point(|&c| c <= u);
        self.support[k.min(self.support.len() - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn merges_and_sorts() {
        let d = DiscreteDistribution::new(vec![3.0, 1.0, 3.0, 2.0], vec![0.25, 0.25, 0.25, 0.25])
            .unwrap();
        assert_eq!(d.support(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.weights(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn drops_zero_weights() {
        let d = DiscreteDistribution::new(vec![1.0, 2.0], vec![0.0, 3.0]).unwrap();
        assert_eq!(d.support(), &[2.0]);
        assert_eq!(d.weights(), &[1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DiscreteDistribution::new(vec![], vec![]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0], vec![-1.0]).is_err());
        assert!(DiscreteDistribution::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0], vec![0.0]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn cdf_and_quantile() {
        let d = DiscreteDistribution::new(vec![0.0, 1.0, 5.0], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(d.cdf(-1.0), 0.0);
        assert!((d.cdf(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(d.cdf(10.0), 1.0);
        assert_eq!(d.quantile(0.1), 0.0);
        assert_eq!(d.quantile(0.5), 1.0);
        assert_eq!(d.quantile(0.51), 5.0);
        assert!((d.mean() - 2.8).abs() < 1e-12);
    }

    #[test]
    fn sampler_frequencies() {
        let d = DiscreteDistribution::new(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
        let s = d.sampler();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let ones = (0..40_000).filter(|_| s.sample(&mut rng) == 1.0).count();
        assert!((ones as f64 / 40_000.0 - 0.75).abs() < 0.01);
    }

    #[test]
    fn serde_validates() {
        let bad = r#"{"support":[1.0,2.0],"weights":[0.5,-0.5]}"#;
        assert!(serde_json::from_str::<DiscreteDistribution>(bad).is_err());
        let d = DiscreteDistribution::new(vec![0.1, 0.7], vec![1.0, 2.0]).unwrap();
        let back: DiscreteDistribution =
            serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(d, back);
    }

    proptest! {
        #[test]
        fn construction_invariants(
            pairs in prop::collection::vec((-5i32..5, 0.0f64..3.0), 1..40)
        ) {
            let atoms: Vec<f64> = pairs.iter().map(|p| p.0 as f64 * 0.5).collect();
            let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(d) = DiscreteDistribution::new(atoms, weights) {
                let total: f64 = d.weights().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(d.support().windows(2).all(|w| w[0] < w[1]));
                prop_assert!(d.weights().iter().all(|&w| w > 0.0));
            }
        }
    }
}
