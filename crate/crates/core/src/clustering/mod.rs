//! Base clusterings of completed datasets and nearest-centroid classification.

mod hclust;
mod kmeans;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;

pub use hclust::{hclust_flexible, LinkageSpec, DEFAULT_BETA};
pub use kmeans::{kmeans, KMeansConfig, KMeansFit};

/// Per-column affine map applied before distances are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Columns with zero spread get weight 0 in every distance.
    pub active: Vec<bool>,
}

impl Scaling {
    pub fn identity(p: usize) -> Self {
        Self {
            mean: vec![0.0; p],
            sd: vec![1.0; p],
            active: vec![true; p],
        }
    }

    /// Column z-scores (sample standard deviation) computed on `d`.
    pub fn standardize(d: &Dataset) -> Self {
        let (n, p) = (d.n(), d.p());
        let mut mean = vec![0.0; p];
        for row in d.rows() {
            mean.iter_mut().zip(row).for_each(|(m, &x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut ss = vec![0.0; p];
        for row in d.rows() {
            for j in 0..p {
                let dx = row[j] - mean[j];
                ss[j] += dx * dx;
            }
        }
        let denom = (n.max(2) - 1) as f64;
        let sd: Vec<f64> = ss.iter().map(|s| (s / denom).sqrt()).collect();
        let active = sd.iter().map(|&s| s > 1e-12 * (1.0 + s)).collect();
        Self { mean, sd, active }
    }

    pub fn p(&self) -> usize {
        self.mean.len()
    }

    pub fn dropped_columns(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| !self.active[j]).collect()
    }

    /// Maps a row into the scaled space; inactive columns become 0.
    pub fn apply_into(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = if self.active[j] {
                (row[j] - self.mean[j]) / self.sd[j]
            } else {
                0.0
            };
        }
    }

    pub fn apply(&self, d: &Dataset) -> Vec<f64> {
        let p = d.p();
        let mut out = vec![0.0; d.n() * p];
        for (i, row) in d.rows().enumerate() {
            self.apply_into(row, &mut out[i * p..(i + 1) * p]);
        }
        out
    }
}

/// Cluster centroids in scaled space, with the scaling used at fit time.
/// Defines the Voronoi cells used to classify new points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    /// Row-major `k × p`.
    pub centroids: Vec<f64>,
    pub k: usize,
    pub scaling: Scaling,
}

impl CentroidModel {
    pub fn p(&self) -> usize {
        self.scaling.p()
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        let p = self.p();
        &self.centroids[c * p..(c + 1) * p]
    }

    /// Centroids of the clusters of `labels` over already-scaled rows.
    /// Empty clusters get a zero centroid.
    pub(crate) fn from_scaled(scaled: &[f64], p: usize, labels: &[usize], k: usize, scaling: Scaling) -> Self {
        let mut centroids = vec![0.0; k * p];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for j in 0..p {
                centroids[l * p + j] += scaled[i * p + j];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..p {
                    centroids[c * p + j] /= counts[c] as f64;
                }
            }
        }
        Self { centroids, k, scaling }
    }

    /// Index of the nearest centroid to an already-scaled row; ties go to
    /// the lowest cluster index.
    pub(crate) fn nearest_scaled(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..self.k {
            let d = sq_dist(x, self.centroid(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assigns each row of `d` to its nearest centroid in the model's scaled space.
pub fn classify(model: &CentroidModel, d: &Dataset) -> Result<Partition> {
    if d.p() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p(),
            actual: d.p(),
        });
    }
    let mut buf = vec![0.0; d.p()];
    let labels = d
        .rows()
        .map(|row| {
            model.scaling.apply_into(row, &mut buf);
            model.nearest_scaled(&buf)
        })
        .collect();
    Partition::new(labels, model.k)
}

/// A fitted clustering: labels of the fit rows plus the model defining cells.
#[derive(Debug, Clone)]
pub struct Fit {
    pub partition: Partition,
    pub model: CentroidModel,
}

/// A seeded clustering procedure with a fixed target cluster count.
pub trait Clusterer: Sync + Send {
    fn k(&self) -> usize;
    fn fit(&self, d: &Dataset, seed: u64) -> Result<Fit>;
}

/// Serializable choice of base clusterer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ClustererSpec {
    Kmeans(KMeansConfig),
    Hclust { k: usize, beta: f64 },
}

impl ClustererSpec {
    pub fn with_k(&self, k: usize) -> ClustererSpec {
        match self {
            ClustererSpec::Kmeans(cfg) => ClustererSpec::Kmeans(KMeansConfig { k, ..cfg.clone() }),
            ClustererSpec::Hclust { beta, .. } => ClustererSpec::Hclust { k, beta: *beta },
        }
    }
}

impl Clusterer for ClustererSpec {
    fn k(&self) -> usize {
        match self {
            ClustererSpec::Kmeans(cfg) => cfg.k,
            ClustererSpec::Hclust { k, .. } => *k,
        }
    }

    fn fit(&self, d: &Dataset, seed: u64) -> Result<Fit> {
        match self {
            ClustererSpec::Kmeans(cfg) => {
                let f = kmeans(d, cfg, seed)?;
                Ok(Fit {
                    partition: f.partition,
                    model: f.model,
                })
            }
            ClustererSpec::Hclust { k, beta } => {
                let (partition, model) = hclust_flexible(d, &LinkageSpec::new(*beta)?, *k)?;
                Ok(Fit { partition, model })
            }
        }
    }
}
