//! Rubin's rules for pooling a scalar statistic over `M` imputations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-imputation point estimates and their within-imputation variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarEstimates {
    q_hat: Vec<f64>,
    u: Vec<f64>,
}

impl ScalarEstimates {
    pub fn new(q_hat: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if q_hat.is_empty() {
            return Err(Error::Data("no estimates to pool".into()));
        }
        if q_hat.len() != u.len() {
            return Err(Error::DimensionMismatch {
                expected: q_hat.len(),
                actual: u.len(),
            });
        }
        if q_hat.iter().chain(&u).any(|x| !x.is_finite()) {
            return Err(Error::Data("estimates must be finite".into()));
        }
        if u.iter().any(|&x| x < 0.0) {
            return Err(Error::Data("within-imputation variances must be non-negative".into()));
        }
        Ok(Self { q_hat, u })
    }

    pub fn m(&self) -> usize {
        self.q_hat.len()
    }

    pub fn q_hat(&self) -> &[f64] {
        &self.q_hat
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledVariance {
    pub t: f64,
    pub u_bar: f64,
    pub b: f64,
    /// Set when `M = 1`: `b` is 0 by construction.
    pub single_imputation: bool,
}

impl PooledVariance {
    /// `b / t`, the share of variance due to the missing values.
    pub fn ratio(&self) -> f64 {
        if self.t > 0.0 {
            self.b / self.t
        } else {
            0.0
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `Q̄`, the average of the point estimates.
pub fn pool_mean(e: &ScalarEstimates) -> f64 {
    mean(&e.q_hat)
}

/// `Ū`, `B` (sample variance of `q_hat`, divisor `M − 1`) and
/// `T = Ū + B`, or `Ū + (1 + 1/M) B` with the small-`M` correction.
pub fn pool_variance(e: &ScalarEstimates, small_m_correction: bool) -> PooledVariance {
    let m = e.m();
    let u_bar = mean(&e.u);
    let b = if m < 2 {
        0.0
    } else {
        let q = pool_mean(e);
        e.q_hat.iter().map(|x| (x - q).powi(2)).sum::<f64>() / (m - 1) as f64
    };
    let factor = if small_m_correction { 1.0 + 1.0 / m as f64 } else { 1.0 };
    PooledVariance {
        t: u_bar + factor * b,
        u_bar,
        b,
        single_imputation: m == 1,
    }
}
