use serde::{Deserialize, Serialize};

use crate::distributions::{BaseDistribution, DiscreteDistribution, RealWorldData};
use crate::error::Result;
use crate::rng::StreamRng;

pub const TRUE_DEMAND_RATE: f64 = 0.0002;

/// The unknown real-world input distributions of a benchmark problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueInputs {
    pub names: Vec<String>,
    pub dists: Vec<BaseDistribution>,
}

impl TrueInputs {
    pub fn dims(&self) -> usize {
        self.dists.len()
    }

    /// `n` iid observations per dimension.
    pub fn generate(&self, n: usize, rng: &mut StreamRng) -> Result<RealWorldData> {
        let columns = self
            .dists
            .iter()
            .map(|d| (0..n).map(|_| d.sample(rng)).collect())
            .collect();
        RealWorldData::new(self.names.clone(), columns)
    }

    /// Continuous dimensions at `m` midpoint quantiles; discrete ones as-is.
    pub fn discretize(&self, m: usize) -> Result<Vec<DiscreteDistribution>> {
        self.dists
            .iter()
            .map(|d| match d {
                BaseDistribution::Discrete(p) => Ok(p.clone()),
                other => other.discretize(m),
            })
            .collect()
    }
}

/// Exponential demand with mean 5000.
pub fn inventory_true_demand() -> TrueInputs {
    TrueInputs {
        names: vec!["demand".into()],
        dists: vec![BaseDistribution::exponential(TRUE_DEMAND_RATE).expect("valid rate")],
    }
}

/// Arrivals at 3.3 per day, four lognormal stays and the route mix.
pub fn ccf_true_inputs() -> TrueInputs {
    let ln = |m, s| BaseDistribution::lognormal_from_moments(m, s).expect("valid moments");
    let route = DiscreteDistribution::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.2, 0.55, 0.2, 0.05]).expect("valid route mix");
    TrueInputs {
        names: ["interarrival", "icu_stay", "ccu_stay", "iicu_stay", "iccu_stay", "route"]
            .map(String::from)
            .to_vec(),
        dists: vec![
            BaseDistribution::exponential(3.3).expect("valid rate"),
            ln(3.4, 3.5),
            ln(3.8, 1.6),
            ln(15.0, 7.0),
            ln(17.0, 3.0),
            BaseDistribution::Discrete(route),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedLineage;

    #[test]
    fn generated_data_has_the_right_moments() {
        let t = ccf_true_inputs();
        let data = t.generate(20_000, &mut SeedLineage::new(1).stream("d", 0)).unwrap();
        assert_eq!(data.l(), 6);
        let mean = |j: usize| data.column(j).iter().sum::<f64>() / 20_000.0;
        assert!((mean(0) - 1.0 / 3.3).abs() < 0.01);
        assert!((mean(2) - 3.8).abs() < 0.05);
        assert!(data.column(5).iter().all(|v| [1.0, 2.0, 3.0, 4.0].contains(v)));
        let d = t.discretize(1000).unwrap();
        assert_eq!(d[5].len(), 4);
        assert!((d[3].mean() - 15.0).abs() < 0.1);
    }
}
