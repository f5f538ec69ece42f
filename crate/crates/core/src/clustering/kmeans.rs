use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{sq_dist, CentroidModel, Scaling};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_n_init() -> usize {
    100
}

fn default_max_iter() -> usize {
    100
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            n_init: default_n_init(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub partition: Partition,
    pub model: CentroidModel,
    /// Within-cluster sum of squares in standardized space.
    pub wcss: f64,
    /// WCSS after each assignment step of the winning initialization.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// Zero-variance columns ignored by the distance.
    pub dropped_columns: Vec<usize>,
}

struct Run {
    labels: Vec<usize>,
    centroids: Vec<f64>,
    wcss: f64,
    trace: Vec<f64>,
    converged: bool,
}

fn assign(x: &[f64], p: usize, centroids: &[f64], k: usize, labels: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (i, l) in labels.iter_mut().enumerate() {
        let row = &x[i * p..(i + 1) * p];
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = sq_dist(row, &centroids[c * p..(c + 1) * p]);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *l = best;
        total += best_d;
    }
    total
}

fn update_means(x: &[f64], p: usize, labels: &[usize], k: usize, centroids: &mut [f64], counts: &mut [usize]) {
    centroids.iter_mut().for_each(|c| *c = 0.0);
    counts.iter_mut().for_each(|c| *c = 0);
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for j in 0..p {
            centroids[l * p + j] += x[i * p + j];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            centroids[c * p..(c + 1) * p].iter_mut().for_each(|v| *v *= inv);
        }
    }
}

/// Moves, for each empty cluster, the point farthest from its own centroid
/// into it.
fn repair_empty(x: &[f64], p: usize, labels: &mut [usize], k: usize, centroids: &mut [f64], counts: &mut [usize]) {
    while let Some(empty) = (0..k).find(|&c| counts[c] == 0) {
        let mut far = None;
        let mut far_d = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let d = sq_dist(&x[i * p..(i + 1) * p], &centroids[l * p..(l + 1) * p]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { return };
        labels[i] = empty;
        update_means(x, p, labels, k, centroids, counts);
    }
}

fn lloyd(x: &[f64], n: usize, p: usize, k: usize, max_iter: usize, init: &[usize]) -> Run {
    let mut centroids = Vec::with_capacity(k * p);
    for &i in init {
        centroids.extend_from_slice(&x[i * p..(i + 1) * p]);
    }
    let mut counts = vec![0usize; k];
    let mut labels = vec![0usize; n];
    let mut next = vec![0usize; n];
    let mut wcss = assign(x, p, &centroids, k, &mut labels);
    let mut trace = vec![wcss];
    let mut converged = false;
    for _ in 0..max_iter {
        update_means(x, p, &labels, k, &mut centroids, &mut counts);
        repair_empty(x, p, &mut labels, k, &mut centroids, &mut counts);
        let new_wcss = assign(x, p, &centroids, k, &mut next);
        debug_assert!(
            new_wcss <= wcss + 1e-9 * (1.0 + wcss),
            "k-means objective increased: {wcss} -> {new_wcss}"
        );
        trace.push(new_wcss);
        wcss = new_wcss;
        let same = next == labels;
        std::mem::swap(&mut labels, &mut next);
        if same {
            converged = true;
            break;
        }
    }
    Run {
        labels,
        centroids,
        wcss,
        trace,
        converged,
    }
}

/// Best-of-`n_init` Lloyd k-means on column-standardized data.
pub fn kmeans(d: &Dataset, cfg: &KMeansConfig, seed: u64) -> Result<KMeansFit> {
    let (n, p, k) = (d.n(), d.p(), cfg.k);
    if k == 0 {
        return Err(Error::Config("k-means needs k >= 1".into()));
    }
    if cfg.n_init == 0 {
        return Err(Error::Config("k-means needs n_init >= 1".into()));
    }
    if k > n {
        return Err(Error::Data(format!("k = {k} exceeds n = {n}")));
    }
    let scaling = Scaling::standardize(d);
    let x = scaling.apply(d);
    if k > 1 && d.distinct_rows() < k {
        return Err(Error::Data(format!("fewer than {k} distinct rows")));
    }
    let mut rng = seed::rng(seed);
    let mut best: Option<Run> = None;
    for _ in 0..cfg.n_init {
        let init = index::sample(&mut rng, n, k).into_vec();
        let run = lloyd(&x, n, p, k, cfg.max_iter, &init);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let best = best.expect("n_init >= 1");
    let dropped_columns = scaling.dropped_columns();
    Ok(KMeansFit {
        partition: Partition::new(best.labels, k)?,
        model: CentroidModel {
            centroids: best.centroids,
            k,
            scaling,
        },
        wcss: best.wcss,
        trace: best.trace,
        converged: best.converged,
        dropped_columns,
    })
}
