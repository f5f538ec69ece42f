//! Median-partition consensus over the partitions of the imputed datasets.
//!
//! The pooled partition minimizes `L(Ψ) = Σ_m mirkin(Ψ, Ψ_m)`. Three solvers
//! are provided: a symmetric-NMF relaxation of `‖M̄ − H‖²`, simulated
//! annealing with one-element moves, and exhaustive enumeration for small `n`.

mod exact;
mod nmf;
mod saom;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{mean_connectivity, mirkin_distance, MeanConnectivity, Partition};

pub use exact::{consensus_exact, EXACT_MAX_N};
pub use nmf::{consensus_nmf, NmfConfig};
pub use saom::{consensus_saom, AnnealSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Nmf,
    Saom,
    Exact,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Nmf => "nmf",
            Solver::Saom => "saom",
            Solver::Exact => "exact",
        }
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nmf" => Ok(Solver::Nmf),
            "saom" => Ok(Solver::Saom),
            "exact" => Ok(Solver::Exact),
            other => Err(Error::Config(format!("unknown consensus solver {other:?}"))),
        }
    }
}

/// Contributory partitions over a common set of individuals, plus the
/// target cluster count of the pooled partition.
#[derive(Debug, Clone)]
pub struct ConsensusProblem {
    partitions: Vec<Partition>,
    k: usize,
    counts: MeanConnectivity,
}

impl ConsensusProblem {
    pub fn new(partitions: Vec<Partition>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("consensus needs k >= 1".into()));
        }
        let counts = mean_connectivity(&partitions)?;
        Ok(Self { partitions, k, counts })
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.counts.n()
    }

    pub fn m(&self) -> usize {
        self.partitions.len()
    }

    pub fn mean_connectivity(&self) -> &MeanConnectivity {
        &self.counts
    }

    /// Ordered-pair cost of putting `i` and `j` together (`M - S_ij`) minus
    /// the cost of separating them (`S_ij`).
    #[inline]
    pub(crate) fn together_minus_apart(&self, i: usize, j: usize) -> i64 {
        self.m() as i64 - 2 * self.counts.count(i, j) as i64
    }

    /// `L(labels)` evaluated from co-membership counts.
    pub(crate) fn loss_of_labels(&self, labels: &[usize]) -> u64 {
        let n = self.n();
        let m = self.m() as u64;
        let mut total = 0u64;
        for i in 0..n {
            for j in 0..n {
                let s = self.counts.count(i, j) as u64;
                total += if labels[i] == labels[j] { m - s } else { s };
            }
        }
        total
    }

    /// Contributory partition with the smallest loss, ties broken by the
    /// lexicographically smallest canonical labelling. Independent of the
    /// order of the contributory partitions.
    pub(crate) fn medoid(&self) -> Partition {
        self.partitions
            .iter()
            .map(|p| {
                let c = p.canonical();
                (self.loss_of_labels(c.labels()), c)
            })
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.labels().cmp(b.1.labels())))
            .map(|(_, p)| p)
            .expect("problem has at least one partition")
            .squeeze_to(self.k)
    }
}

/// `Σ_m mirkin(p, Ψ_m)`.
pub fn consensus_objective(p: &Partition, prob: &ConsensusProblem) -> Result<u64> {
    prob.partitions.iter().map(|q| mirkin_distance(p, q)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub pooled: Partition,
    /// Loss of `pooled`, recomputed from the contributory partitions.
    pub objective: u64,
    pub solver: Solver,
    /// Per-iteration objective: relaxed loss for NMF, best-so-far loss per
    /// sweep for SAOM.
    pub trace: Vec<f64>,
}

impl ConsensusResult {
    pub(crate) fn finish(pooled: Partition, prob: &ConsensusProblem, solver: Solver, trace: Vec<f64>) -> Result<Self> {
        let objective = consensus_objective(&pooled, prob)?;
        Ok(Self {
            pooled,
            objective,
            solver,
            trace,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let labels = self.pooled.labels();
        let v = serde_json::json!({
            "solver": self.solver.as_str(),
            "k": self.pooled.k(),
            "labels": labels,
            "objective": self.objective,
            "trace": self.trace,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Runs `solver` with default settings.
pub fn solve(prob: &ConsensusProblem, solver: Solver, seed: u64) -> Result<ConsensusResult> {
    match solver {
        Solver::Nmf => consensus_nmf(prob, &NmfConfig::default(), seed),
        Solver::Saom => consensus_saom(prob, &AnnealSchedule::default(), seed),
        Solver::Exact => consensus_exact(prob),
    }
}
