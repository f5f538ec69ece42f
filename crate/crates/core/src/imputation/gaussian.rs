//! Proper multiple imputation under a multivariate normal model.
//!
//! For each copy: bootstrap the rows, estimate the mean and covariance on the
//! resample (mean fill followed by EM iterations, ridge-regularized), then draw
//! every missing block from its Gaussian conditional given the observed
//! coordinates of its row.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, Dataset, IncompleteDataset};
use crate::error::{Error, Result};
use crate::seed;

const RIDGE_RETRIES: usize = 6;
const BOOTSTRAP_REDRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianConfig {
    /// Ridge added to the covariance diagonal, relative to its mean diagonal.
    pub ridge: f64,
    pub em_iters: usize,
    /// EM stops early once no mean or covariance entry moves more than this.
    pub em_tol: f64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            em_iters: 50,
            em_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Moments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

fn add_ridge(cov: &mut DMatrix<f64>, rel: f64) {
    let p = cov.nrows();
    let avg = (cov.trace() / p as f64).abs().max(1e-12);
    for j in 0..p {
        cov[(j, j)] += rel * avg;
    }
}

fn cholesky_with_retry(m: &DMatrix<f64>, ridge: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut a = m.clone();
    let mut eps = ridge;
    for _ in 0..=RIDGE_RETRIES {
        if let Some(c) = a.clone().cholesky() {
            return Ok(c);
        }
        a = m.clone();
        eps *= 10.0;
        add_ridge(&mut a, eps);
    }
    Err(Error::Numerical("covariance not positive definite after ridge retries".into()))
}

/// Conditional mean and covariance of the missing coordinates of one row.
pub(crate) fn conditional(
    mom: &Moments,
    row: &[f64],
    miss: &[usize],
    obs: &[usize],
    ridge: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mu_m = DVector::from_iterator(miss.len(), miss.iter().map(|&j| mom.mean[j]));
    let s_mm = DMatrix::from_fn(miss.len(), miss.len(), |a, b| mom.cov[(miss[a], miss[b])]);
    if obs.is_empty() {
        return Ok((mu_m, s_mm));
    }
    let s_oo = DMatrix::from_fn(obs.len(), obs.len(), |a, b| mom.cov[(obs[a], obs[b])]);
    let s_om = DMatrix::from_fn(obs.len(), miss.len(), |a, b| mom.cov[(obs[a], miss[b])]);
    let resid = DVector::from_iterator(obs.len(), obs.iter().map(|&j| row[j] - mom.mean[j]));
    let chol = cholesky_with_retry(&s_oo, ridge)?;
    // Σ_oo⁻¹ Σ_om
    let reg = chol.solve(&s_om);
    let cond_mean = mu_m + reg.transpose() * resid;
    let mut cond_cov = s_mm - s_om.transpose() * &reg;
    cond_cov = (&cond_cov + cond_cov.transpose()) * 0.5;
    Ok((cond_mean, cond_cov))
}

fn split(mask: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let miss = (0..mask.len()).filter(|&j| mask[j]).collect();
    let obs = (0..mask.len()).filter(|&j| !mask[j]).collect();
    (miss, obs)
}

/// Mean/covariance of the rows `idx` of `inc` by EM from a mean fill.
pub(crate) fn estimate_moments(inc: &IncompleteDataset, idx: &[usize], cfg: &GaussianConfig) -> Result<Moments> {
    let p = inc.p();
    let n = idx.len() as f64;
    let mut mean = DVector::zeros(p);
    for j in 0..p {
        let obs: Vec<f64> = idx.iter().filter_map(|&i| inc.get(i, j)).collect();
        if obs.is_empty() {
            return Err(Error::Data(format!("column {} has no observed value in the sample", j + 1)));
        }
        mean[j] = obs.iter().sum::<f64>() / obs.len() as f64;
    }
    let filled = |i: usize, j: usize, mean: &DVector<f64>| inc.get(i, j).unwrap_or(mean[j]);
    let mut cov = DMatrix::zeros(p, p);
    for &i in idx {
        let x = DVector::from_fn(p, |j, _| filled(i, j, &mean) - mean[j]);
        cov += &x * x.transpose();
    }
    cov /= n;
    add_ridge(&mut cov, cfg.ridge);
    let mut mom = Moments { mean, cov };
    let any_missing = idx.iter().any(|&i| inc.row_mask(i).iter().any(|&m| m));
    if !any_missing {
        return Ok(mom);
    }
    for _ in 0..cfg.em_iters {
        let mut sum = DVector::zeros(p);
        let mut sum_sq = DMatrix::zeros(p, p);
        for &i in idx {
            let row = inc.row(i);
            let (miss, obs) = split(inc.row_mask(i));
            let mut x = DVector::from_fn(p, |j, _| row[j]);
            let mut extra = DMatrix::zeros(p, p);
            if !miss.is_empty() {
                let (cm, cc) = conditional(&mom, row, &miss, &obs, cfg.ridge)?;
                for (a, &j) in miss.iter().enumerate() {
                    x[j] = cm[a];
                    for (b, &l) in miss.iter().enumerate() {
                        extra[(j, l)] = cc[(a, b)];
                    }
                }
            }
            sum += &x;
            sum_sq += &x * x.transpose() + extra;
        }
        let new_mean = sum / n;
        let mut new_cov = sum_sq / n - &new_mean * new_mean.transpose();
        new_cov = (&new_cov + new_cov.transpose()) * 0.5;
        add_ridge(&mut new_cov, cfg.ridge);
        let shift = (&new_mean - &mom.mean)
            .amax()
            .max((&new_cov - &mom.cov).amax());
        mom = Moments {
            mean: new_mean,
            cov: new_cov,
        };
        if shift < cfg.em_tol {
            break;
        }
    }
    Ok(mom)
}

/// One completed copy.
pub(crate) fn impute_one(inc: &IncompleteDataset, cfg: &GaussianConfig, seed: u64) -> Result<Dataset> {
    let n = inc.n();
    let mut rng = seed::rng(seed);
    let mut mom = None;
    for _ in 0..BOOTSTRAP_REDRAWS {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        match estimate_moments(inc, &idx, cfg) {
            Ok(m) => {
                mom = Some(m);
                break;
            }
            Err(Error::Data(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let mom = match mom {
        Some(m) => m,
        None => estimate_moments(inc, &(0..n).collect::<Vec<_>>(), cfg)?,
    };
    let p = inc.p();
    let mut draws = vec![f64::NAN; n * p];
    for i in 0..n {
        let (miss, obs) = split(inc.row_mask(i));
        if miss.is_empty() {
            continue;
        }
        let (cm, cc) = conditional(&mom, inc.row(i), &miss, &obs, cfg.ridge)?;
        let chol = cholesky_with_retry(&cc, cfg.ridge)?;
        let z = DVector::from_fn(miss.len(), |_, _| StandardNormal.sample(&mut rng));
        let x = cm + chol.l() * z;
        for (a, &j) in miss.iter().enumerate() {
            draws[i * p + j] = x[a];
        }
    }
    inc.complete_with(|i, j| draws[i * p + j])
}

pub(crate) fn check_continuous(inc: &IncompleteDataset) -> Result<()> {
    if inc.kinds().contains(&ColumnKind::Binary) && inc.missing_count() > 0 {
        return Err(Error::Config(
            "the Gaussian imputer needs continuous columns; use the hot-deck imputer for binary data".into(),
        ));
    }
    Ok(())
}
