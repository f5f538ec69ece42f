//! Two-component Gaussian mixture used by the simulation study.

use std::fmt::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::seed;

/// Size of each covariance block.
const BLOCK: usize = 5;

/// Block-diagonal `[I₅, (1 − ρ) I₅ + ρ 1 1ᵀ]`, positive definite for
/// `−1/4 < ρ < 1`.
pub fn sigma_rho(rho: f64) -> Result<DMatrix<f64>> {
    if !(rho > -0.25 && rho < 1.0) {
        return Err(Error::Config(format!("rho must lie in (-0.25, 1), got {rho}")));
    }
    let p = 2 * BLOCK;
    Ok(DMatrix::from_fn(p, p, |a, b| match (a == b, a >= BLOCK && b >= BLOCK) {
        (true, _) => 1.0,
        (false, true) => rho,
        (false, false) => 0.0,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub rho: f64,
    /// Mean of the second component; the first is centred at 0.
    pub shift: Vec<f64>,
    pub weights: [f64; 2],
}

impl MixtureSpec {
    /// `p = 10`, second component shifted by 2 on the last five coordinates,
    /// equal weights.
    pub fn new(n: usize, rho: f64) -> Self {
        Self {
            n,
            rho,
            shift: vec![0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0, 2.0],
            weights: [0.5, 0.5],
        }
    }

    pub fn with_weights(mut self, weights: [f64; 2]) -> Self {
        self.weights = weights;
        self
    }

    pub fn p(&self) -> usize {
        self.shift.len()
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("mixture needs at least one row".into()));
        }
        if self.shift.len() != 2 * BLOCK {
            return Err(Error::DimensionMismatch {
                expected: 2 * BLOCK,
                actual: self.shift.len(),
            });
        }
        if self.weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) || (self.weights[0] + self.weights[1] - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!("weights must be probabilities summing to 1, got {:?}", self.weights)));
        }
        Ok(())
    }
}

/// Simulated data with its generating component memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: Dataset,
    pub truth: Partition,
}

impl LabeledDataset {
    /// Writes `data.csv` and `truth.csv` (`row,component`, 0-based rows)
    /// into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.data.save_csv(&dir.join("data.csv"))?;
        let mut truth = String::from("row,component\n");
        for (i, z) in self.truth.labels().iter().enumerate() {
            let _ = writeln!(truth, "{i},{z}");
        }
        std::fs::write(dir.join("truth.csv"), truth)?;
        Ok(())
    }
}

/// Each row picks a component by `weights`, then draws from
/// `N(mean_z, Σ(ρ))`.
pub fn generate_mixture(spec: &MixtureSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let sigma = sigma_rho(spec.rho)?;
    let l = sigma
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("Σ({}) is not positive definite", spec.rho)))?
        .unpack();
    let p = spec.p();
    let shift = DVector::from_column_slice(&spec.shift);
    let mut rng = seed::rng(seed);
    let mut values = Vec::with_capacity(spec.n * p);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let z = usize::from(rng.random::<f64>() >= spec.weights[0]);
        let e = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let mut x = &l * e;
        if z == 1 {
            x += &shift;
        }
        values.extend(x.iter());
        labels.push(z);
    }
    Ok(LabeledDataset {
        data: Dataset::from_flat(spec.n, p, values)?,
        truth: Partition::new(labels, 2)?,
    })
}
