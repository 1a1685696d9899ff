//! Comparison optimizers: plug-in over the empirical distribution and
//! parametric Bayes with exponential or lognormal input models.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{BaseDistribution, DiscreteDistribution, FixedInputs, InputPosterior, Inputs, RealWorldData};
use crate::ego::{run, DesignSpace, EgoConfig, OptOutcome, Problem, RunError, Simulator};
use crate::error::{Error, Result};
use crate::rng::{SeedLineage, StreamRng};

/// Atoms per parametric draw inside the optimizer.
pub const PB_DISCRETIZATION: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Exponential,
    Lognormal,
}

/// Posterior over the parameters of one input family under its Jeffreys prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ParametricPosterior {
    /// `λ ~ Gamma(shape, rate)`.
    Exponential { shape: f64, rate: f64 },
    /// `σ² ~ InvGamma(a, b)`, `μ | σ² ~ N(m, σ²/κ)` on the log scale.
    Lognormal { m: f64, kappa: f64, a: f64, b: f64 },
}

pub fn pb_posterior(family: Family, data: &[f64]) -> Result<ParametricPosterior> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!("nonpositive observation {v}")));
    }
    let n = data.len() as f64;
    match family {
        Family::Exponential => Ok(ParametricPosterior::Exponential {
            shape: n,
            rate: data.iter().sum(),
        }),
        Family::Lognormal => {
            if data.len() < 2 {
                return Err(Error::TooFewSamples { need: 2, got: data.len() });
            }
            let logs: Vec<f64> = data.iter().map(|v| v.ln()).collect();
            let m = logs.iter().sum::<f64>() / n;
            let ss: f64 = logs.iter().map(|l| (l - m).powi(2)).sum();
            Ok(ParametricPosterior::Lognormal {
                m,
                kappa: n,
                a: 0.5 * (n - 1.0),
                b: (0.5 * ss).max(f64::MIN_POSITIVE.sqrt()),
            })
        }
    }
}

impl ParametricPosterior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Exponential { shape, rate } => shape > 0.0 && rate > 0.0,
            Self::Lognormal { m, kappa, a, b } => m.is_finite() && kappa > 0.0 && a > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{self:?}")))
        }
    }

    /// One parameter draw as a continuous distribution.
    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<BaseDistribution> {
        match *self {
            Self::Exponential { shape, rate } => {
                let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                BaseDistribution::exponential(g.sample(rng))
            }
            Self::Lognormal { m, kappa, a, b } => {
                let g = Gamma::new(a, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let var = b / g.sample(rng);
                let z: f64 = StandardNormal.sample(rng);
                BaseDistribution::lognormal(m + z * (var / kappa).sqrt(), var.sqrt())
            }
        }
    }
}

/// A parameter draw discretized at `discretization` midpoint quantiles.
pub fn pb_sample_distribution<R: Rng + ?Sized>(post: &ParametricPosterior, rng: &mut R, discretization: usize) -> Result<DiscreteDistribution> {
    if discretization < 2 {
        return Err(Error::InvalidParameter("discretization must be at least 2".into()));
    }
    post.sample_model(rng)?.discretize(discretization)
}

/// Independent parametric posteriors, one per input dimension.
#[derive(Debug, Clone)]
pub struct PbPosterior {
    components: Vec<ParametricPosterior>,
    discretization: usize,
}

impl PbPosterior {
    pub fn new(components: Vec<ParametricPosterior>, discretization: usize) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("no input dimensions".into()));
        }
        if discretization < 2 {
            return Err(Error::InvalidParameter("discretization must be at least 2".into()));
        }
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components, discretization })
    }

    pub fn from_data(data: &RealWorldData, family: Family, discretization: usize) -> Result<Self> {
        let comps = data.columns().iter().map(|c| pb_posterior(family, c)).collect::<Result<_>>()?;
        Self::new(comps, discretization)
    }

    pub fn components(&self) -> &[ParametricPosterior] {
        &self.components
    }
}

impl InputPosterior for PbPosterior {
    fn dims(&self) -> usize {
        self.components.len()
    }

    fn draw(&self, rng: &mut StreamRng) -> Inputs {
        self.components
            .iter()
            .map(|c| pb_sample_distribution(c, rng, self.discretization).expect("validated posterior"))
            .collect::<Vec<_>>()
            .into()
    }
}

/// EGO over the design alone with the inputs frozen at the empirical
/// distribution; EI and recommendation use the design-only GP.
pub fn plugin_optimize(
    space: DesignSpace,
    data: &RealWorldData,
    simulator: &dyn Simulator,
    cfg: &EgoConfig,
    lineage: SeedLineage,
) -> std::result::Result<OptOutcome, RunError> {
    let empirical = data.empirical()?;
    let frozen = move |x: &[f64], _: &[DiscreteDistribution], rng: &mut StreamRng| simulator.simulate(x, &empirical, rng);
    let none = FixedInputs::none();
    run(
        &Problem {
            space,
            posterior: &none,
            simulator: &frozen,
        },
        cfg,
        lineage,
    )
}

/// The NBRO pipeline with the Dirichlet-process posterior replaced by a
/// parametric one.
pub fn pb_optimize(
    space: DesignSpace,
    data: &RealWorldData,
    family: Family,
    simulator: &dyn Simulator,
    cfg: &EgoConfig,
    lineage: SeedLineage,
) -> std::result::Result<OptOutcome, RunError> {
    let post = PbPosterior::from_data(data, family, PB_DISCRETIZATION)?;
    run(
        &Problem {
            space,
            posterior: &post,
            simulator,
        },
        cfg,
        lineage,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::FitOptions;

    #[test]
    fn conjugate_examples() {
        assert_eq!(
            pb_posterior(Family::Exponential, &[1.0, 1.0]).unwrap(),
            ParametricPosterior::Exponential { shape: 2.0, rate: 2.0 }
        );
        let e = std::f64::consts::E;
        match pb_posterior(Family::Lognormal, &[e, e]).unwrap() {
            ParametricPosterior::Lognormal { m, kappa, a, b } => {
                assert!((m - 1.0).abs() < 1e-15);
                assert_eq!((kappa, a), (2.0, 0.5));
                assert!(b > 0.0);
            }
            _ => unreachable!(),
        }
        assert!(pb_posterior(Family::Exponential, &[1.0, -1.0]).is_err());
        assert!(pb_posterior(Family::Lognormal, &[1.0]).is_err());
    }

    fn trapezoid_weights(n: usize) -> Vec<f64> {
        (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 } else { 1.0 }).collect()
    }

    #[test]
    fn exponential_update_matches_brute_force() {
        let data = [0.7, 2.1, 0.3, 1.4, 0.9];
        let (shape, rate) = (5.0, data.iter().sum::<f64>());
        // likelihood × 1/λ on a fine grid
        let n = 200_001;
        let hi = 20.0;
        let h = hi / (n - 1) as f64;
        let w = trapezoid_weights(n);
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (i, wi) in w.iter().enumerate() {
            let l = i as f64 * h;
            if l == 0.0 {
                continue;
            }
            let dens = wi * data.iter().map(|x| l * (-l * x).exp()).product::<f64>() / l;
            z += dens;
            m1 += dens * l;
            m2 += dens * l * l;
        }
        let (mean, var) = (m1 / z, m2 / z - (m1 / z).powi(2));
        assert!((mean - shape / rate).abs() / (shape / rate) < 1e-3);
        assert!((var - shape / rate / rate).abs() / (shape / rate / rate) < 1e-3);
    }

    #[test]
    fn lognormal_update_matches_brute_force() {
        let data = [1.3, 0.4, 2.7, 0.9, 1.8];
        let (m, kappa, a, b) = match pb_posterior(Family::Lognormal, &data).unwrap() {
            ParametricPosterior::Lognormal { m, kappa, a, b } => (m, kappa, a, b),
            _ => unreachable!(),
        };
        let logs: Vec<f64> = data.iter().map(|v: &f64| v.ln()).collect();
        // grid over (u, t) with μ = m + u·σ, t = ln σ²; prior 1/σ² dσ² dμ = σ du dt
        let (nm, nt) = (1201, 2401);
        let (mlo, mhi, tlo, thi) = (-8.0, 8.0, -12.0, 12.0);
        let (hm, ht) = ((mhi - mlo) / (nm - 1) as f64, (thi - tlo) / (nt - 1) as f64);
        let (wm, wt) = (trapezoid_weights(nm), trapezoid_weights(nt));
        let (mut z, mut e_mu, mut e_var) = (0.0, 0.0, 0.0);
        for (j, wj) in wt.iter().enumerate() {
            let t = tlo + j as f64 * ht;
            let var = t.exp();
            for (i, wi) in wm.iter().enumerate() {
                let mu = m + (mlo + i as f64 * hm) * var.sqrt();
                let ll: f64 = logs.iter().map(|l| -0.5 * (l - mu).powi(2) / var - 0.5 * var.ln()).sum();
                let d = wi * wj * ll.exp() * var.sqrt();
                z += d;
                e_mu += d * mu;
                e_var += d * var;
            }
        }
        let (e_mu, e_var) = (e_mu / z, e_var / z);
        assert!((e_mu - m).abs() < 1e-3 * m.abs().max(1.0));
        let closed = b / (a - 1.0);
        assert!((e_var - closed).abs() / closed < 1e-3, "{e_var} vs {closed}");
        assert_eq!(kappa, 5.0);
    }

    #[test]
    fn exponential_posterior_concentrates() {
        let truth = BaseDistribution::exponential(0.0002).unwrap();
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = SeedLineage::new(seed).stream("d", 0);
            let data: Vec<f64> = (0..1000).map(|_| truth.sample(&mut rng)).collect();
            if let ParametricPosterior::Exponential { shape, rate } = pb_posterior(Family::Exponential, &data).unwrap() {
                if ((shape / rate) - 0.0002).abs() / 0.0002 < 0.1 {
                    hits += 1;
                }
            }
        }
        assert!(hits >= 99);
    }

    #[test]
    fn discretized_draw_is_quantile_grid() {
        let post = ParametricPosterior::Exponential { shape: 50.0, rate: 100.0 };
        let mut rng = SeedLineage::new(3).stream("pb", 0);
        let d = pb_sample_distribution(&post, &mut rng.clone(), 100_000).unwrap();
        let lambda = match post.sample_model(&mut rng).unwrap() {
            BaseDistribution::Exponential { rate } => rate,
            _ => unreachable!(),
        };
        assert_eq!(d.len(), 100_000);
        assert!(d.weights().iter().all(|w| (w - 1e-5).abs() < 1e-15));
        assert!((d.support()[0] - (-(1.0 - 0.5e-5_f64).ln() / lambda)).abs() < 1e-12);
        assert!((d.mean() * lambda - 1.0).abs() < 0.01);
        assert!(pb_sample_distribution(&post, &mut rng, 1).is_err());
    }

    fn toy_sim(x: &[f64], p: &[DiscreteDistribution], rng: &mut StreamRng) -> Result<f64> {
        let xi = p[0].sampler().sample(rng);
        Ok((x[0] - xi).powi(2))
    }

    fn small_cfg() -> EgoConfig {
        EgoConfig {
            s0: 5,
            budget: 8,
            reps: 3,
            n_mc: 5,
            n_fresh: 3,
            n_rand: 50,
            n_refine: 1,
            refine_iters: 10,
            fit: FitOptions {
                restarts: 2,
                max_evals: 60,
                ..FitOptions::default()
            },
            ..EgoConfig::default()
        }
    }

    #[test]
    fn plugin_only_sees_empirical_inputs_and_is_deterministic() {
        let data = RealWorldData::single("xi", vec![0.2, 0.4, 0.9]).unwrap();
        let empirical = data.empirical().unwrap();
        let seen = std::sync::Mutex::new(Vec::new());
        let sim = |x: &[f64], p: &[DiscreteDistribution], rng: &mut StreamRng| {
            seen.lock().unwrap().push(p.to_vec());
            toy_sim(x, p, rng)
        };
        let space = DesignSpace::new_box(vec![0.0], vec![1.0]).unwrap();
        let a = plugin_optimize(space.clone(), &data, &sim, &small_cfg(), SeedLineage::new(5)).unwrap();
        assert!(seen.lock().unwrap().iter().all(|p| p[..] == empirical[..]));
        assert!(a.state.history.iter().all(|r| r.inputs.is_empty()));
        let b = plugin_optimize(space, &data, &sim, &small_cfg(), SeedLineage::new(5)).unwrap();
        assert_eq!(a.x_hat, b.x_hat);
        assert_eq!(a.state.history.len(), 8);
    }

    #[test]
    fn pb_run_is_deterministic() {
        let data = RealWorldData::single("xi", vec![0.2, 0.4, 0.9, 0.5]).unwrap();
        let space = DesignSpace::new_box(vec![0.0], vec![1.0]).unwrap();
        let a = pb_optimize(space.clone(), &data, Family::Lognormal, &toy_sim, &small_cfg(), SeedLineage::new(6)).unwrap();
        let b = pb_optimize(space, &data, Family::Lognormal, &toy_sim, &small_cfg(), SeedLineage::new(6)).unwrap();
        assert_eq!(a.x_hat, b.x_hat);
        assert_eq!(a.state.history.last().unwrap().inputs[0].len(), PB_DISCRETIZATION);
    }
}
