//! Hot-deck multiple imputation for categorical data with Bayesian-bootstrap
//! donor weights. Donors for a cell are rows observed on that cell that agree
//! with the recipient on as many of its observed columns as possible.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::dataset::{Dataset, IncompleteDataset};
use crate::error::{Error, Result};
use crate::seed;

pub(crate) fn impute_one(inc: &IncompleteDataset, seed: u64) -> Result<Dataset> {
    let (n, p) = (inc.n(), inc.p());
    let mut rng = seed::rng(seed);
    // Bayesian bootstrap: normalized Exp(1) draws are Dirichlet(1, ..., 1).
    let weights: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
    let mut fill = vec![f64::NAN; n * p];
    for i in 0..n {
        for j in (0..p).filter(|&j| inc.is_missing(i, j)) {
            let candidates: Vec<(usize, usize)> = (0..n)
                .filter(|&d| d != i && !inc.is_missing(d, j))
                .map(|d| {
                    let agree = (0..p)
                        .filter(|&l| l != j)
                        .filter(|&l| match (inc.get(i, l), inc.get(d, l)) {
                            (Some(a), Some(b)) => a == b,
                            _ => false,
                        })
                        .count();
                    (d, agree)
                })
                .collect();
            let best = candidates
                .iter()
                .map(|c| c.1)
                .max()
                .ok_or_else(|| Error::Data(format!("no donor observed on row {}, column {}", i + 1, j + 1)))?;
            let pool: Vec<usize> = candidates.iter().filter(|c| c.1 == best).map(|c| c.0).collect();
            let total: f64 = pool.iter().map(|&d| weights[d]).sum();
            let mut u = rng.random::<f64>() * total;
            let mut donor = *pool.last().expect("non-empty pool");
            for &d in &pool {
                if u < weights[d] {
                    donor = d;
                    break;
                }
                u -= weights[d];
            }
            fill[i * p + j] = inc.get(donor, j).expect("donor observed on cell");
        }
    }
    inc.complete_with(|i, j| fill[i * p + j])
}
