use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::{Dataset, IncompleteDataset};
use crate::error::{Error, Result};
use crate::seed;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" => Ok(Mechanism::Mar),
            other => Err(Error::Config(format!("unknown missingness mechanism {other:?}"))),
        }
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Config(format!("missing rate must be in [0, 1), got {tau}")));
    }
    Ok(())
}

/// Draws cells with per-cell probabilities, then redraws any row or column
/// that came out entirely missing. Cells with probability 0 never change.
fn draw_mask(n: usize, p: usize, prob: impl Fn(usize, usize) -> f64, rng: &mut seed::Rng) -> Result<Vec<bool>> {
    let mut mask: Vec<bool> = (0..n * p).map(|c| rng.random::<f64>() < prob(c / p, c % p)).collect();
    for _ in 0..MAX_REDRAWS {
        let bad_rows: Vec<usize> = (0..n).filter(|&i| (0..p).all(|j| mask[i * p + j])).collect();
        let bad_cols: Vec<usize> = (0..p).filter(|&j| (0..n).all(|i| mask[i * p + j])).collect();
        if bad_rows.is_empty() && bad_cols.is_empty() {
            return Ok(mask);
        }
        for i in bad_rows {
            for j in 0..p {
                mask[i * p + j] = rng.random::<f64>() < prob(i, j);
            }
        }
        for j in bad_cols {
            for i in 0..n {
                mask[i * p + j] = rng.random::<f64>() < prob(i, j);
            }
        }
    }
    Err(Error::Data(format!(
        "could not draw a mask without empty rows or columns in {MAX_REDRAWS} redraws"
    )))
}

/// MCAR: each cell is masked independently with probability `tau`.
pub fn ampute_mcar(d: &Dataset, tau: f64, seed: u64) -> Result<IncompleteDataset> {
    check_tau(tau)?;
    let mut rng = seed::rng(seed);
    let mask = draw_mask(d.n(), d.p(), |_, _| tau, &mut rng)?;
    IncompleteDataset::from_mask(d, mask)
}

/// Intercept `a` with `mean_i Φ(a + x_i) = tau`, by bisection to 1e-6.
pub fn mar_intercept(driver: &[f64], tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Config(format!("MAR intercept needs tau in (0, 1), got {tau}")));
    }
    let rate = |a: f64| driver.iter().map(|&x| std_normal_cdf(a + x)).sum::<f64>() / driver.len() as f64;
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut widen = 0;
    while rate(lo) > tau || rate(hi) < tau {
        lo *= 2.0;
        hi *= 2.0;
        widen += 1;
        if widen > 60 {
            return Err(Error::Numerical("MAR intercept bracket not found".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid);
        if (r - tau).abs() < 1e-6 {
            return Ok(mid);
        }
        if r < tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical("MAR intercept bisection did not converge".into()))
}

/// MAR driven by the first column: for every other column,
/// `P(missing) = Φ(a_τ + x_{i1})`. The first column stays observed.
pub fn ampute_mar(d: &Dataset, tau: f64, seed: u64) -> Result<IncompleteDataset> {
    check_tau(tau)?;
    if d.p() < 2 {
        return Err(Error::Config("MAR amputation needs a driver column and at least one other".into()));
    }
    if tau == 0.0 {
        return IncompleteDataset::from_mask(d, vec![false; d.n() * d.p()]);
    }
    let driver: Vec<f64> = (0..d.n()).map(|i| d.get(i, 0)).collect();
    let a = mar_intercept(&driver, tau)?;
    let probs: Vec<f64> = driver.iter().map(|&x| std_normal_cdf(a + x)).collect();
    let mut rng = seed::rng(seed);
    let mask = draw_mask(d.n(), d.p(), |i, j| if j == 0 { 0.0 } else { probs[i] }, &mut rng)?;
    IncompleteDataset::from_mask(d, mask)
}

pub fn ampute(d: &Dataset, mechanism: Mechanism, tau: f64, seed: u64) -> Result<IncompleteDataset> {
    match mechanism {
        Mechanism::Mcar => ampute_mcar(d, tau, seed),
        Mechanism::Mar => ampute_mar(d, tau, seed),
    }
}
