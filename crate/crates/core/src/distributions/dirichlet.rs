use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BaseDistribution, DiscreteDistribution, InputPosterior, Inputs};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Stick count used when nothing else is configured.
pub const DEFAULT_TRUNCATION: usize = 500;

/// Posterior of a Dirichlet process on one input dimension:
/// `DP(alpha + n, (alpha * P0 + sum_j delta_{xi_j}) / (alpha + n))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpPosterior {
    alpha: f64,
    data: Vec<f64>,
    base: BaseDistribution,
}

impl DpPosterior {
    pub fn new(alpha: f64, base: BaseDistribution, data: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::NonPositiveConcentration(alpha));
        }
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite observation {x}")));
        }
        base.validate()?;
        Ok(Self { alpha, data, base })
    }

    /// The default prior used for the benchmark problems: `alpha = 1` and a
    /// uniform base on `[0, max(data)]`.
    pub fn with_uniform_base(data: Vec<f64>) -> Result<Self> {
        let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        Self::new(1.0, BaseDistribution::uniform(0.0, hi)?, data)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn base(&self) -> &BaseDistribution {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn concentration(&self) -> f64 {
        self.alpha + self.n() as f64
    }

    /// Mixture weight of the prior base inside the posterior base.
    pub fn base_weight(&self) -> f64 {
        self.alpha / self.concentration()
    }

    /// Mixture weight of each individual observation.
    pub fn atom_weight(&self) -> f64 {
        1.0 / self.concentration()
    }

    pub fn base_mixture_cdf(&self, t: f64) -> f64 {
        let below = self.data.iter().filter(|&&x| x <= t).count() as f64;
        (self.alpha * self.base.cdf(t) + below) / self.concentration()
    }

    pub fn sample_base_mixture<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() * self.concentration();
        if u < self.alpha {
            self.base.sample(rng)
        } else {
            let j = ((u - self.alpha) as usize).min(self.n() - 1);
            self.data[j]
        }
    }

    /// Stick count whose expected leftover mass `(c / (c + 1))^(K - 1)` is
    /// at most `tail`, never below [`DEFAULT_TRUNCATION`].
    pub fn auto_truncation(&self, tail: f64) -> usize {
        let c = self.concentration();
        let needed = (tail.ln() / (c / (c + 1.0)).ln()).ceil() as usize + 1;
        needed.max(DEFAULT_TRUNCATION)
    }

    /// One truncated stick-breaking draw with `truncation` sticks.
    ///
    /// Stick fractions are `Beta(1, alpha + n)`; the mass left after the
    /// first `truncation - 1` sticks goes to the last atom.
    pub fn sample_distribution<R: Rng + ?Sized>(
        &self,
        truncation: usize,
        rng: &mut R,
    ) -> DiscreteDistribution {
        let (atoms, weights) = self.sticks(truncation, rng);
        DiscreteDistribution::new(atoms, weights).expect("stick weights form a distribution")
    }

    /// Raw atoms and stick weights before duplicate atoms are merged.
    pub fn sticks<R: Rng + ?Sized>(&self, truncation: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        assert!(truncation >= 1, "truncation must be at least one stick");
        let inv_c = 1.0 / self.concentration();
        let mut atoms = Vec::with_capacity(truncation);
        let mut weights = Vec::with_capacity(truncation);
        let mut remaining = 1.0;
        for _ in 1..truncation {
            let v = 1.0 - rng.random::<f64>().powf(inv_c);
            weights.push(v * remaining);
            remaining *= 1.0 - v;
            atoms.push(self.sample_base_mixture(rng));
        }
        weights.push(remaining);
        atoms.push(self.sample_base_mixture(rng));
        (atoms, weights)
    }
}

/// Independent Dirichlet-process posteriors, one per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPosterior {
    components: Vec<DpPosterior>,
    /// Sticks per draw; `None` picks [`DpPosterior::auto_truncation`].
    truncation: Option<usize>,
    tail: f64,
}

impl ProductPosterior {
    pub fn new(components: Vec<DpPosterior>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "product posterior needs at least one dimension".into(),
            ));
        }
        Ok(Self {
            components,
            truncation: None,
            tail: 1e-4,
        })
    }

    pub fn with_truncation(mut self, truncation: Option<usize>) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn components(&self) -> &[DpPosterior] {
        &self.components
    }

    pub fn truncation_for(&self, dim: usize) -> usize {
        self.truncation
            .unwrap_or_else(|| self.components[dim].auto_truncation(self.tail))
    }

    /// Componentwise stick-breaking with a common truncation.
    pub fn sample_product<R: Rng + ?Sized>(
        &self,
        truncation: usize,
        rng: &mut R,
    ) -> Vec<DiscreteDistribution> {
        self.components
            .iter()
            .map(|c| c.sample_distribution(truncation, rng))
            .collect()
    }
}

impl InputPosterior for ProductPosterior {
    fn dims(&self) -> usize {
        self.components.len()
    }

    fn draw(&self, rng: &mut StreamRng) -> Inputs {
        let draws: Vec<DiscreteDistribution> = (0..self.components.len())
            .map(|j| {
                let k = self.truncation_for(j);
                self.components[j].sample_distribution(k, rng)
            })
            .collect();
        Arc::from(draws)
    }
}

/// Posterior-expected objective through the mixture identity
/// `alpha/(alpha+n) E_{P0}[h] + 1/(alpha+n) sum_j h(xi_j)`.
///
/// `h(x, xi)` is the simulator mean at design `x` for a fixed input `xi`.
/// Only single-dimension posteriors are supported.
pub fn nbro_objective_closed_form<H>(post: &ProductPosterior, h: H, x: &[f64]) -> Result<f64>
where
    H: Fn(&[f64], f64) -> f64,
{
    let [dp] = post.components() else {
        return Err(Error::Unsupported(format!(
            "closed-form objective needs one input dimension, got {}",
            post.components().len()
        )));
    };
    let prior_part = dp.base().expect(|xi| h(x, xi));
    let data_part: f64 = dp.data().iter().map(|&xi| h(x, xi)).sum();
    Ok(dp.base_weight() * prior_part + dp.atom_weight() * data_part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedLineage;

    fn uniform_post(alpha: f64, lo: f64, hi: f64, data: Vec<f64>) -> DpPosterior {
        DpPosterior::new(alpha, BaseDistribution::uniform(lo, hi).unwrap(), data).unwrap()
    }

    #[test]
    fn posterior_parameters() {
        let p = uniform_post(1.0, 0.0, 10.0, vec![2.0]);
        assert_eq!(p.concentration(), 2.0);
        assert_eq!(p.base_weight(), 0.5);
        assert_eq!(p.atom_weight(), 0.5);
    }

    #[test]
    fn default_prior_base_weight() {
        let mut rng = SeedLineage::new(3).stream("t", 0);
        let data: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 9.0).collect();
        let p = DpPosterior::with_uniform_base(data).unwrap();
        assert_eq!(p.concentration(), 1001.0);
        assert_eq!(p.base_weight(), 1.0 / 1001.0);
    }

    #[test]
    fn rejects_bad_prior() {
        let base = BaseDistribution::uniform(0.0, 1.0).unwrap();
        assert!(matches!(
            DpPosterior::new(5.0, base.clone(), vec![]),
            Err(Error::EmptyData)
        ));
        assert!(matches!(
            DpPosterior::new(0.0, base.clone(), vec![1.0]),
            Err(Error::NonPositiveConcentration(_))
        ));
        assert!(matches!(
            DpPosterior::new(-1.0, base, vec![1.0]),
            Err(Error::NonPositiveConcentration(_))
        ));
    }

    #[test]
    fn base_mixture_cdf_examples() {
        let p = uniform_post(1.0, 0.0, 10.0, vec![2.0]);
        assert!((p.base_mixture_cdf(5.0) - 0.75).abs() < 1e-15);
        assert_eq!(p.base_mixture_cdf(-1e300), 0.0);
        assert_eq!(p.base_mixture_cdf(1e300), 1.0);

        let q = DpPosterior::new(
            2.0,
            BaseDistribution::exponential(1.0).unwrap(),
            vec![0.5, 1.5],
        )
        .unwrap();
        let expected = (2.0 * (1.0 - (-1.0f64).exp()) + 1.0) / 4.0;
        assert!((q.base_mixture_cdf(1.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn single_stick_is_point_mass() {
        let p = uniform_post(1.0, 0.0, 10.0, vec![2.0, 3.0]);
        let mut rng = SeedLineage::new(1).stream("t", 0);
        let d = p.sample_distribution(1, &mut rng);
        assert_eq!(d.len(), 1);
        assert_eq!(d.weights(), &[1.0]);
    }

    #[test]
    fn stick_weights_sum_to_one() {
        let p = uniform_post(1.0, 0.0, 10.0, (0..50).map(f64::from).collect());
        let mut rng = SeedLineage::new(2).stream("t", 0);
        for k in [2, 10, 500] {
            let (_, w) = p.sticks(k, &mut rng);
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = uniform_post(1.0, 0.0, 10.0, vec![1.0, 4.0, 9.0]);
        let a = p.sample_distribution(500, &mut SeedLineage::new(9).stream("t", 0));
        let b = p.sample_distribution(500, &mut SeedLineage::new(9).stream("t", 0));
        assert_eq!(a, b);
    }

    #[test]
    fn auto_truncation_controls_tail() {
        let small = uniform_post(1.0, 0.0, 1.0, vec![0.5; 10]);
        assert_eq!(small.auto_truncation(1e-4), DEFAULT_TRUNCATION);
        let large = uniform_post(1.0, 0.0, 1.0, vec![0.5; 1000]);
        let k = large.auto_truncation(1e-4);
        let c = large.concentration();
        assert!((c / (c + 1.0)).powi(k as i32 - 1) <= 1e-4);
        assert!((c / (c + 1.0)).powi(k as i32 - 2) > 1e-4);
    }

    #[test]
    fn closed_form_examples() {
        let lin = ProductPosterior::new(vec![uniform_post(1.0, 0.0, 2.0, vec![4.0])]).unwrap();
        let v = nbro_objective_closed_form(&lin, |_, xi| xi, &[]).unwrap();
        assert!((v - 2.5).abs() < 1e-12);

        let sq = ProductPosterior::new(vec![uniform_post(2.0, 0.0, 1.0, vec![1.0, 2.0])]).unwrap();
        let v = nbro_objective_closed_form(&sq, |_, xi| xi * xi, &[]).unwrap();
        assert!((v - 17.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_rejects_products() {
        let p = uniform_post(1.0, 0.0, 2.0, vec![1.0]);
        let two = ProductPosterior::new(vec![p.clone(), p]).unwrap();
        assert!(matches!(
            nbro_objective_closed_form(&two, |_, xi| xi, &[]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn product_draws_are_componentwise_and_reproducible() {
        let comps: Vec<DpPosterior> = (0..6)
            .map(|j| uniform_post(1.0, 0.0, 5.0 + j as f64, vec![1.0 + j as f64; 20]))
            .collect();
        let post = ProductPosterior::new(comps).unwrap().with_truncation(Some(50));
        let lineage = SeedLineage::new(11);
        let a = post.draw(&mut lineage.stream("atoms", 0));
        let b = post.draw(&mut lineage.stream("atoms", 0));
        assert_eq!(a.len(), 6);
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let c = post.sample_product(1, &mut lineage.stream("atoms", 1));
        assert!(c.iter().all(|d| d.len() == 1));
    }
}
