//! Bootstrap clustering instability and its decomposition over imputed
//! datasets: within-imputation `Ū`, between-imputation `B`, total `T = Ū + B`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{classify, Clusterer};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::partition::{mirkin_distance, Partition};
use crate::seed::{self, STREAM_BOOTSTRAP, STREAM_FIT};

/// Redraws allowed when a resample has fewer distinct rows than clusters.
const MAX_REDRAWS: usize = 10;

/// How the `M × M` disagreement sum is normalized into `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetweenNormalization {
    /// `1 / M²` over all ordered pairs, zero diagonal included.
    #[default]
    OrderedPairs,
    /// `1 / (M (M − 1))` over distinct pairs.
    DistinctPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of bootstrap pairs `C`.
    pub c_pairs: usize,
    pub seed: u64,
    #[serde(default)]
    pub normalization: BetweenNormalization,
    #[serde(default)]
    pub execution: Execution,
}

impl BootstrapConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            c_pairs: 20,
            seed,
            normalization: BetweenNormalization::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_pairs(mut self, c_pairs: usize) -> Self {
        self.c_pairs = c_pairs;
        self
    }

    pub fn with_normalization(mut self, normalization: BetweenNormalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub u_bar: f64,
    pub b: f64,
    pub t: f64,
    pub u_per_imputation: Vec<f64>,
    pub pairwise_delta: Vec<Vec<f64>>,
    /// Set when `M = 1`: `B` is 0 by construction.
    pub single_imputation: bool,
}

impl InstabilityReport {
    /// `B / T`, the share of instability due to the missing values
    /// (0 when `T = 0`).
    pub fn robustness_ratio(&self) -> f64 {
        if self.t > 0.0 {
            self.b / self.t
        } else {
            0.0
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "u_bar": self.u_bar,
            "b": self.b,
            "t": self.t,
            "b_over_t": self.robustness_ratio(),
            "single_imputation": self.single_imputation,
            "u_per_imputation": self.u_per_imputation,
            "pairwise_delta": self.pairwise_delta,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Mean that returns `xs[0]` bit-exactly when all values are equal.
fn shifted_mean(xs: &[f64]) -> f64 {
    let x0 = xs[0];
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

fn resample(d: &Dataset, k: usize, rng: &mut seed::Rng) -> Result<Dataset> {
    let n = d.n();
    for _ in 0..=MAX_REDRAWS {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let sample = d.select_rows(&idx);
        if k <= 1 || sample.distinct_rows() >= k {
            return Ok(sample);
        }
    }
    Err(Error::Data(format!(
        "bootstrap resamples kept fewer than {k} distinct rows after {MAX_REDRAWS} redraws"
    )))
}

/// Disagreement for each bootstrap pair, in pair order.
pub fn bootstrap_pair_disagreements(d: &Dataset, clusterer: &dyn Clusterer, cfg: &BootstrapConfig) -> Result<Vec<f64>> {
    if cfg.c_pairs == 0 {
        return Err(Error::Config("bootstrap needs at least one pair".into()));
    }
    let k = clusterer.k();
    cfg.execution.try_map(cfg.c_pairs, |c| {
        let pair = |e: Error| Error::BootstrapPair {
            pair: c,
            source: Box::new(e),
        };
        let mut rng = seed::rng(seed::derive(cfg.seed, &[STREAM_BOOTSTRAP, c as u64]));
        let first = resample(d, k, &mut rng).map_err(pair)?;
        let second = resample(d, k, &mut rng).map_err(pair)?;
        let fit_a = clusterer
            .fit(&first, seed::derive(cfg.seed, &[STREAM_FIT, c as u64, 0]))
            .map_err(pair)?;
        let fit_b = clusterer
            .fit(&second, seed::derive(cfg.seed, &[STREAM_FIT, c as u64, 1]))
            .map_err(pair)?;
        let pa = classify(&fit_a.model, d).map_err(pair)?;
        let pb = classify(&fit_b.model, d).map_err(pair)?;
        let n = d.n() as f64;
        Ok(mirkin_distance(&pa, &pb).map_err(pair)? as f64 / (n * n))
    })
}

/// Bootstrap instability `U = (1/C) Σ_c δ(Ψ(X_c), Ψ(X̃_c))`: both members of
/// each pair are fitted on resamples and used to classify the original rows.
pub fn bootstrap_instability(d: &Dataset, clusterer: &dyn Clusterer, cfg: &BootstrapConfig) -> Result<f64> {
    let per_pair = bootstrap_pair_disagreements(d, clusterer, cfg)?;
    Ok(per_pair.iter().sum::<f64>() / per_pair.len() as f64)
}

/// Between-imputation instability and the pairwise disagreement matrix.
/// Mirkin counts are summed as integers, so `B` is independent of the order
/// of the partitions.
pub fn between_instability(partitions: &[Partition], normalization: BetweenNormalization) -> Result<(f64, Vec<Vec<f64>>)> {
    let m = partitions.len();
    let first = partitions
        .first()
        .ok_or_else(|| Error::Data("between instability of an empty list".into()))?;
    let n2 = (first.n() * first.n()) as f64;
    let mut counts = vec![vec![0u64; m]; m];
    for a in 0..m {
        for b in a + 1..m {
            let d = mirkin_distance(&partitions[a], &partitions[b])?;
            counts[a][b] = d;
            counts[b][a] = d;
        }
    }
    let total: u64 = counts.iter().flatten().sum();
    let pairs = match normalization {
        BetweenNormalization::OrderedPairs => (m * m) as f64,
        BetweenNormalization::DistinctPairs => (m * (m.max(2) - 1)) as f64,
    };
    let b = if m < 2 { 0.0 } else { total as f64 / (n2 * pairs) };
    let matrix = counts
        .iter()
        .map(|row| row.iter().map(|&d| d as f64 / n2).collect())
        .collect();
    Ok((b, matrix))
}

/// Partitions of the completed copies and their pooled instability.
#[derive(Debug, Clone)]
pub struct PooledAnalysis {
    pub partitions: Vec<Partition>,
    pub report: InstabilityReport,
}

/// Seed used to fit the clusterer on every completed copy.
pub fn copy_fit_seed(cfg: &BootstrapConfig) -> u64 {
    seed::derive(cfg.seed, &[STREAM_FIT])
}

/// Clusters each completed copy and pools instability over them.
///
/// Every copy is analysed with the same seeds (fit seed and bootstrap
/// streams), so identical copies produce identical partitions and `U_m`.
pub fn pooled_instability_datasets(copies: &[Dataset], clusterer: &dyn Clusterer, cfg: &BootstrapConfig) -> Result<PooledAnalysis> {
    if copies.is_empty() {
        return Err(Error::Data("no completed datasets".into()));
    }
    let fit_seed = copy_fit_seed(cfg);
    let per_copy = cfg.execution.try_map(copies.len(), |m| {
        let tag = |e: Error| Error::ImputedCopy {
            copy: m,
            source: Box::new(e),
        };
        let fit = clusterer.fit(&copies[m], fit_seed).map_err(tag)?;
        let u = bootstrap_instability(&copies[m], clusterer, cfg).map_err(tag)?;
        Ok::<_, Error>((fit.partition, u))
    })?;
    let (partitions, u_per_imputation): (Vec<Partition>, Vec<f64>) = per_copy.into_iter().unzip();
    let (b, pairwise_delta) = between_instability(&partitions, cfg.normalization)?;
    let u_bar = shifted_mean(&u_per_imputation);
    let report = InstabilityReport {
        u_bar,
        b,
        t: u_bar + b,
        u_per_imputation,
        pairwise_delta,
        single_imputation: copies.len() == 1,
    };
    Ok(PooledAnalysis { partitions, report })
}

pub fn pooled_instability(
    stack: &crate::imputation::ImputationStack,
    clusterer: &dyn Clusterer,
    cfg: &BootstrapConfig,
) -> Result<InstabilityReport> {
    Ok(pooled_instability_datasets(stack.completed(), clusterer, cfg)?.report)
}
