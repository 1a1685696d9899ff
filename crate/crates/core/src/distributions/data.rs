use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{BaseDistribution, DiscreteDistribution, DpPosterior, ProductPosterior};
use crate::error::{Error, Result};

/// Observed real-world input data, one column per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealWorldData {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl RealWorldData {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidParameter("no input dimensions".into()));
        }
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: names.len(),
            });
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.len(),
            });
        }
        Ok(Self { names, columns })
    }

    pub fn single(name: &str, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![name.to_string()], vec![values])
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn l(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Reads a headed CSV with one column per input dimension.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for record in rdr.records() {
            let record = record?;
            if record.len() != names.len() {
                return Err(Error::DimensionMismatch {
                    expected: names.len(),
                    got: record.len(),
                });
            }
            for (col, field) in columns.iter_mut().zip(record.iter()) {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidParameter(format!("not a number: {field:?}"))
                })?;
                col.push(v);
            }
        }
        Self::new(names, columns)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names)?;
        for i in 0..self.n() {
            w.write_record(self.columns.iter().map(|c| c[i].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Dirichlet-process posterior per column with the given priors.
    pub fn posterior(&self, alpha: f64, bases: Vec<BaseDistribution>) -> Result<ProductPosterior> {
        if bases.len() != self.l() {
            return Err(Error::DimensionMismatch {
                expected: self.l(),
                got: bases.len(),
            });
        }
        let comps = self
            .columns
            .iter()
            .zip(bases)
            .map(|(col, base)| DpPosterior::new(alpha, base, col.clone()))
            .collect::<Result<Vec<_>>>()?;
        ProductPosterior::new(comps)
    }

    /// Posterior with `alpha = 1` and a `uniform(0, max)` base per column.
    pub fn default_posterior(&self) -> Result<ProductPosterior> {
        let comps = self
            .columns
            .iter()
            .map(|col| DpPosterior::with_uniform_base(col.clone()))
            .collect::<Result<Vec<_>>>()?;
        ProductPosterior::new(comps)
    }

    pub fn empirical(&self) -> Result<Vec<DiscreteDistribution>> {
        self.columns.iter().map(|c| empirical_distribution(c)).collect()
    }
}

/// Unique values weighted by multiplicity.
pub fn empirical_distribution(data: &[f64]) -> Result<DiscreteDistribution> {
    DiscreteDistribution::from_samples(data)
}
