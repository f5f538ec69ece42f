//! Partitions of `n` individuals, co-membership matrices and partition
//! comparison indices (Mirkin distance, normalized disagreement, ARI).
//!
//! Pair-based quantities use the ordered-pair convention: all `n²` pairs
//! `(i, i')` are counted, including `i = i'`. Under that convention the
//! disagreement is exactly `mirkin / n²`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard assignment of `n ≥ 1` individuals to at most `k` clusters.
///
/// Labels are dense integers in `0..k`; clusters may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Data("a partition needs at least one individual".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Data(format!("label {bad} outside 0..{k}")));
        }
        Ok(Self { labels, k })
    }

    /// Builds a partition whose declared cluster count is `max(label) + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        Self::new(labels, k)
    }

    /// All individuals in cluster 0.
    pub fn single_cluster(n: usize) -> Self {
        Self {
            labels: vec![0; n.max(1)],
            k: 1,
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    /// Number of non-empty clusters.
    pub fn occupied(&self) -> usize {
        let mut seen = vec![false; self.k];
        self.labels.iter().for_each(|&l| seen[l] = true);
        seen.into_iter().filter(|&s| s).count()
    }

    /// Relabels clusters by order of first appearance (restricted growth
    /// string). Two partitions induce the same equivalence relation iff their
    /// canonical forms have equal labels.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Partition { labels, k: self.k }
    }

    /// True when both partitions induce the same co-membership relation.
    pub fn same_relation(&self, other: &Partition) -> bool {
        self.n() == other.n() && self.canonical().labels == other.canonical().labels
    }

    /// Fits the labels into `0..k`, keeping the first `k - 1` clusters in order
    /// of appearance and merging every later cluster into the last one.
    pub fn squeeze_to(&self, k: usize) -> Partition {
        let canon = self.canonical();
        let labels = canon.labels.iter().map(|&l| l.min(k - 1)).collect();
        Partition { labels, k }
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.labels.iter().for_each(|&l| sizes[l] += 1);
        sizes
    }

    pub fn to_csv_line(&self) -> String {
        let mut s = String::with_capacity(self.n() * 2);
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{l}");
        }
        s
    }

    pub fn from_csv_line(line: &str) -> Result<Partition> {
        let labels = line
            .trim()
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Data(format!("bad cluster label {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::from_labels(labels)
    }
}

fn check_same_n(p: &Partition, q: &Partition) -> Result<()> {
    if p.n() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            actual: q.n(),
        });
    }
    Ok(())
}

/// Binary co-membership matrix `h[i][i'] = 1` iff `i` and `i'` share a cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityMatrix {
    n: usize,
    h: Vec<bool>,
}

impl ConnectivityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.h[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.h.chunks(self.n).map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.to_rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn connectivity(p: &Partition) -> ConnectivityMatrix {
    let n = p.n();
    let l = p.labels();
    let h = (0..n * n).map(|idx| l[idx / n] == l[idx % n]).collect();
    ConnectivityMatrix { n, h }
}

/// Entrywise mean of the connectivity matrices of several partitions.
///
/// Co-membership counts are accumulated as integers, so the result does not
/// depend on the order of the input partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanConnectivity {
    n: usize,
    count: Vec<u32>,
    m: usize,
}

impl MeanConnectivity {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of partitions averaged.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.count[i * self.n + j] as f64 / self.m as f64
    }

    /// Number of partitions in which `i` and `j` are co-members.
    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.count[i * self.n + j]
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

pub fn mean_connectivity(ps: &[Partition]) -> Result<MeanConnectivity> {
    let first = ps
        .first()
        .ok_or_else(|| Error::Data("mean connectivity of an empty list".into()))?;
    let n = first.n();
    let mut count = vec![0u32; n * n];
    for p in ps {
        check_same_n(first, p)?;
        let l = p.labels();
        for i in 0..n {
            let row = &mut count[i * n..(i + 1) * n];
            for (j, c) in row.iter_mut().enumerate() {
                if l[i] == l[j] {
                    *c += 1;
                }
            }
        }
    }
    Ok(MeanConnectivity {
        n,
        count,
        m: ps.len(),
    })
}

/// Sparse contingency table of two labelings, with row and column margins.
struct Contingency {
    cells: Vec<u64>,
    rows: Vec<u64>,
    cols: Vec<u64>,
}

fn contingency(p: &Partition, q: &Partition) -> Contingency {
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows = vec![0u64; p.k()];
    let mut cols = vec![0u64; q.k()];
    for (&a, &b) in p.labels().iter().zip(q.labels()) {
        *cells.entry((a, b)).or_default() += 1;
        rows[a] += 1;
        cols[b] += 1;
    }
    Contingency {
        cells: cells.into_values().collect(),
        rows,
        cols,
    }
}

/// Number of ordered pairs on which `p` and `q` disagree about co-membership.
pub fn mirkin_distance(p: &Partition, q: &Partition) -> Result<u64> {
    check_same_n(p, q)?;
    let t = contingency(p, q);
    let sq = |v: &[u64]| v.iter().map(|x| x * x).sum::<u64>();
    Ok(sq(&t.rows) + sq(&t.cols) - 2 * sq(&t.cells))
}

/// Proportion of the `n²` ordered pairs on which `p` and `q` disagree.
pub fn disagreement(p: &Partition, q: &Partition) -> Result<f64> {
    let n = p.n() as f64;
    Ok(mirkin_distance(p, q)? as f64 / (n * n))
}

/// Hubert–Arabie adjusted Rand index.
///
/// A zero denominator (both partitions all-singletons or both a single
/// cluster) yields 1 for identical relations and 0 otherwise.
pub fn adjusted_rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    check_same_n(p, q)?;
    let n = p.n() as u64;
    if n < 2 {
        return Err(Error::Data("ARI needs at least two individuals".into()));
    }
    let c2 = |x: &u64| x * x.saturating_sub(1) / 2;
    let t = contingency(p, q);
    let index = t.cells.iter().map(c2).sum::<u64>() as f64;
    let a = t.rows.iter().map(c2).sum::<u64>() as f64;
    let b = t.cols.iter().map(c2).sum::<u64>() as f64;
    let total = c2(&n) as f64;
    let expected = a * b / total;
    let max = 0.5 * (a + b);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if p.same_relation(q) { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn part(l: &[usize]) -> Partition {
        Partition::from_labels(l.to_vec()).unwrap()
    }

    /// Reference: enumerate every ordered pair.
    fn brute_mirkin(p: &[usize], q: &[usize]) -> u64 {
        let n = p.len();
        let mut d = 0;
        for i in 0..n {
            for j in 0..n {
                if (p[i] == p[j]) != (q[i] == q[j]) {
                    d += 1;
                }
            }
        }
        d
    }

    /// Reference: ARI from unordered pair counts (a = both together,
    /// b = p only, c = q only) rather than the contingency margins.
    fn brute_ari(p: &[usize], q: &[usize]) -> f64 {
        let n = p.len();
        let (mut a, mut b, mut c, mut pairs) = (0f64, 0f64, 0f64, 0f64);
        for i in 0..n {
            for j in i + 1..n {
                pairs += 1.0;
                let sp = p[i] == p[j];
                let sq = q[i] == q[j];
                match (sp, sq) {
                    (true, true) => a += 1.0,
                    (true, false) => b += 1.0,
                    (false, true) => c += 1.0,
                    _ => {}
                }
            }
        }
        let expected = (a + b) * (a + c) / pairs;
        let max = ((a + b) + (a + c)) / 2.0;
        if max == expected {
            return if brute_mirkin(p, q) == 0 { 1.0 } else { 0.0 };
        }
        (a - expected) / (max - expected)
    }

    #[test]
    fn connectivity_examples() {
        let h = connectivity(&part(&[0, 0, 1]));
        assert_eq!(h.to_rows(), vec![vec![1, 1, 0], vec![1, 1, 0], vec![0, 0, 1]]);
        let h = connectivity(&part(&[0, 1, 2]));
        assert_eq!(h.to_rows(), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let h = connectivity(&part(&[0, 0, 0]));
        assert!(h.to_rows().iter().flatten().all(|&v| v == 1));
    }

    #[test]
    fn mean_connectivity_examples() {
        let m = mean_connectivity(&[part(&[0, 0, 1]), part(&[0, 0, 1])]).unwrap();
        let h = connectivity(&part(&[0, 0, 1]));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), h.get(i, j) as u8 as f64);
            }
        }
        let m = mean_connectivity(&[part(&[0, 0]), part(&[0, 1])]).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);
        assert_eq!(m.get(0, 0), 1.0);
        assert!(mean_connectivity(&[]).is_err());
        assert!(mean_connectivity(&[part(&[0, 0]), part(&[0, 1, 1])]).is_err());
    }

    #[test]
    fn mean_connectivity_matches_direct_summation() {
        let ps = [part(&[0, 1, 1, 2, 0]), part(&[0, 0, 0, 1, 1]), part(&[2, 1, 0, 1, 2])];
        let m = mean_connectivity(&ps).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let sum: f64 = ps
                    .iter()
                    .map(|p| if p.labels()[i] == p.labels()[j] { 1.0 } else { 0.0 })
                    .sum();
                assert_eq!(m.get(i, j), sum / 3.0);
            }
        }
    }

    #[test]
    fn disagreement_and_mirkin_examples() {
        let p = part(&[0, 0, 1, 1]);
        let q = part(&[0, 1, 0, 1]);
        assert_eq!(disagreement(&p, &p).unwrap(), 0.0);
        assert_eq!(disagreement(&p, &q).unwrap(), 0.5);
        assert_eq!(mirkin_distance(&p, &q).unwrap(), 8);
        assert_eq!(
            disagreement(&part(&[0, 0, 0]), &part(&[0, 0, 1])).unwrap(),
            4.0 / 9.0
        );
        assert_eq!(mirkin_distance(&p, &part(&[1, 1, 0, 0])).unwrap(), 0);
        assert!(mirkin_distance(&p, &part(&[0, 1])).is_err());
    }

    #[test]
    fn ari_examples() {
        let p = part(&[0, 0, 1, 1]);
        assert_eq!(adjusted_rand_index(&p, &p).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&p, &part(&[1, 1, 0, 0])).unwrap(), 1.0);
        let v = adjusted_rand_index(&p, &part(&[0, 1, 0, 1])).unwrap();
        assert_eq!(v, brute_ari(&[0, 0, 1, 1], &[0, 1, 0, 1]));
        assert!((v + 0.5).abs() < 1e-15);
        assert!(adjusted_rand_index(&part(&[0]), &part(&[0])).is_err());
    }

    #[test]
    fn ari_degenerate_contingency() {
        let single = part(&[0, 0, 0]);
        let singletons = part(&[0, 1, 2]);
        assert_eq!(adjusted_rand_index(&single, &single).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&singletons, &singletons).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&single, &singletons).unwrap(), 0.0);
    }

    #[test]
    fn partition_validation_and_csv() {
        assert!(Partition::new(vec![], 1).is_err());
        assert!(Partition::new(vec![0, 2], 2).is_err());
        let p = Partition::new(vec![0, 0, 2], 4).unwrap();
        assert_eq!(p.occupied(), 2);
        assert_eq!(p.to_csv_line(), "0,0,2");
        assert_eq!(Partition::from_csv_line("0,0,2\n").unwrap().labels(), p.labels());
        assert!(Partition::from_csv_line("0,x").is_err());
        assert_eq!(part(&[2, 2, 0, 1]).canonical().labels(), &[0, 0, 1, 2]);
        assert_eq!(part(&[2, 2, 0, 1]).squeeze_to(2).labels(), &[0, 0, 1, 1]);
    }

    fn labels_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>)> {
        (1usize..=12).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..4, n),
                proptest::collection::vec(0usize..4, n),
                proptest::collection::vec(0usize..4, n),
            )
        })
    }

    proptest! {
        #[test]
        fn mirkin_is_a_metric((a, b, c) in labels_strategy()) {
            let (p, q, r) = (part(&a), part(&b), part(&c));
            let pq = mirkin_distance(&p, &q).unwrap();
            prop_assert_eq!(pq, mirkin_distance(&q, &p).unwrap());
            prop_assert_eq!(pq, brute_mirkin(&a, &b));
            prop_assert_eq!(pq % 2, 0);
            prop_assert!(pq <= mirkin_distance(&p, &r).unwrap() + mirkin_distance(&r, &q).unwrap());
            let n2 = (a.len() * a.len()) as f64;
            prop_assert_eq!(disagreement(&p, &q).unwrap(), pq as f64 / n2);
            prop_assert!(disagreement(&p, &q).unwrap() < 1.0);
        }

        #[test]
        fn ari_symmetric_and_permutation_invariant((a, b, _c) in labels_strategy(), shift in 1usize..4) {
            prop_assume!(a.len() >= 2);
            let (p, q) = (part(&a), part(&b));
            let permuted = Partition::from_labels(b.iter().map(|&l| (l + shift) % 4).collect()).unwrap();
            let pq = adjusted_rand_index(&p, &q).unwrap();
            prop_assert_eq!(pq, adjusted_rand_index(&q, &p).unwrap());
            prop_assert_eq!(pq, adjusted_rand_index(&p, &permuted).unwrap());
            prop_assert_eq!(adjusted_rand_index(&p, &p).unwrap(), 1.0);
            prop_assert!(pq <= 1.0 + 1e-12);
            prop_assert!((pq - brute_ari(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn connectivity_label_permutation_invariant((a, _b, _c) in labels_strategy(), shift in 1usize..4) {
            let p = part(&a);
            let permuted = Partition::from_labels(a.iter().map(|&l| (l + shift) % 4).collect()).unwrap();
            prop_assert_eq!(connectivity(&p), connectivity(&permuted));
        }

        #[test]
        fn mean_connectivity_bounds((a, b, c) in labels_strategy()) {
            let m = mean_connectivity(&[part(&a), part(&b), part(&c)]).unwrap();
            for i in 0..a.len() {
                prop_assert_eq!(m.get(i, i), 1.0);
                for j in 0..a.len() {
                    let v = m.get(i, j);
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert_eq!(v, m.get(j, i));
                }
            }
        }
    }
}
