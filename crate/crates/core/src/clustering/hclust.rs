use serde::{Deserialize, Serialize};

use super::{sq_dist, CentroidModel, Scaling};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;

pub const DEFAULT_BETA: f64 = -0.1;

/// Flexible-UPGMA linkage: Lance–Williams update with
/// `α_i = (1 - β)·n_i / (n_i + n_j)`, `γ = 0` and coefficient `β` on `d(i, j)`.
/// `β = 0` is plain average linkage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageSpec {
    beta: f64,
}

impl LinkageSpec {
    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_nan() || beta >= 1.0 {
            return Err(Error::Config(format!("flexible linkage needs beta < 1, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for LinkageSpec {
    fn default() -> Self {
        Self { beta: DEFAULT_BETA }
    }
}

/// One agglomeration step: clusters represented by their smallest member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

pub(crate) fn agglomerate(d: &Dataset, spec: &LinkageSpec, k: usize) -> (Vec<usize>, Vec<Merge>) {
    let n = d.n();
    let beta = spec.beta;
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(d.row(i), d.row(j));
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    // owner[x] = representative of x's cluster
    let mut owner: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(k));
    for _ in 0..n.saturating_sub(k) {
        let mut best = (f64::INFINITY, 0, 0);
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if dist[i * n + j] < best.0 {
                    best = (dist[i * n + j], i, j);
                }
            }
        }
        let (h, a, b) = best;
        if beta <= 0.0 {
            if let Some(prev) = merges.last().map(|m: &Merge| m.height) {
                debug_assert!(h >= prev - 1e-9 * (1.0 + prev.abs()), "merge heights decreased: {prev} -> {h}");
            }
        }
        let total = (size[a] + size[b]) as f64;
        let alpha_a = (1.0 - beta) * size[a] as f64 / total;
        let alpha_b = (1.0 - beta) * size[b] as f64 / total;
        for m in (0..n).filter(|&m| active[m] && m != a && m != b) {
            let v = alpha_a * dist[a * n + m] + alpha_b * dist[b * n + m] + beta * h;
            dist[a * n + m] = v;
            dist[m * n + a] = v;
        }
        active[b] = false;
        size[a] += size[b];
        owner.iter_mut().filter(|o| **o == b).for_each(|o| *o = a);
        merges.push(Merge {
            left: a,
            right: b,
            height: h,
        });
    }
    // Relabel representatives in order of first appearance.
    let mut map = vec![usize::MAX; n];
    let mut next = 0;
    let labels = owner
        .iter()
        .map(|&o| {
            if map[o] == usize::MAX {
                map[o] = next;
                next += 1;
            }
            map[o]
        })
        .collect();
    (labels, merges)
}

/// Agglomerative clustering with flexible-UPGMA linkage over squared
/// Euclidean distances on raw values, cut at `k` clusters. The returned model
/// holds raw-space cluster means for nearest-centroid classification.
pub fn hclust_flexible(d: &Dataset, spec: &LinkageSpec, k: usize) -> Result<(Partition, CentroidModel)> {
    if k == 0 {
        return Err(Error::Config("hierarchical clustering needs k >= 1".into()));
    }
    if k > d.n() {
        return Err(Error::Data(format!("k = {k} exceeds n = {}", d.n())));
    }
    let (labels, _) = agglomerate(d, spec, k);
    let model = CentroidModel::from_scaled(d.values(), d.p(), &labels, k, Scaling::identity(d.p()));
    Ok((Partition::new(labels, k)?, model))
}
