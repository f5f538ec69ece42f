use super::{ConsensusProblem, ConsensusResult, Solver};
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Largest `n` accepted by the exhaustive solver.
pub const EXACT_MAX_N: usize = 10;

struct Search<'a> {
    prob: &'a ConsensusProblem,
    labels: Vec<usize>,
    best: Option<(u64, Vec<usize>)>,
}

impl Search<'_> {
    /// Depth-first over restricted growth strings in lexicographic order;
    /// `cost` is the loss contributed by pairs inside `0..i`.
    fn visit(&mut self, i: usize, used: usize, cost: u64) {
        let n = self.prob.n();
        if i == n {
            if self.best.as_ref().is_none_or(|b| cost < b.0) {
                self.best = Some((cost, self.labels.clone()));
            }
            return;
        }
        let m = self.prob.m() as u64;
        let top = (used + 1).min(self.prob.k());
        for c in 0..top {
            let mut add = 0u64;
            for j in 0..i {
                let s = self.prob.counts.count(i, j) as u64;
                add += if self.labels[j] == c { m - s } else { s };
            }
            self.labels[i] = c;
            self.visit(i + 1, used.max(c + 1), cost + 2 * add);
        }
    }
}

/// Global minimizer of the consensus loss by enumeration of all partitions
/// into at most `k` clusters. Ties resolve to the lexicographically smallest
/// restricted growth string.
pub fn consensus_exact(prob: &ConsensusProblem) -> Result<ConsensusResult> {
    let n = prob.n();
    if n > EXACT_MAX_N {
        return Err(Error::Config(format!(
            "exact consensus refuses n = {n} (limit {EXACT_MAX_N})"
        )));
    }
    let mut search = Search {
        prob,
        labels: vec![0; n],
        best: None,
    };
    search.visit(0, 0, 0);
    let (cost, labels) = search.best.expect("at least one partition enumerated");
    let pooled = Partition::new(labels, prob.k())?;
    let result = ConsensusResult::finish(pooled, prob, Solver::Exact, vec![cost as f64])?;
    debug_assert_eq!(result.objective, cost);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::consensus_objective;
    use super::*;
    use crate::seed;

    /// Every labelling in `0..k`^n, not just canonical ones.
    fn brute_min(prob: &ConsensusProblem) -> u64 {
        let (n, k) = (prob.n(), prob.k());
        let mut best = u64::MAX;
        let mut labels = vec![0usize; n];
        loop {
            let p = Partition::new(labels.clone(), k).unwrap();
            best = best.min(consensus_objective(&p, prob).unwrap());
            let mut pos = 0;
            loop {
                if pos == n {
                    return best;
                }
                labels[pos] += 1;
                if labels[pos] < k {
                    break;
                }
                labels[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn identical_partitions() {
        let p = part(&[0, 1, 1, 0, 2]);
        let prob = ConsensusProblem::new(vec![p.clone(); 3], 3).unwrap();
        let r = consensus_exact(&prob).unwrap();
        assert_eq!(r.objective, 0);
        assert!(r.pooled.same_relation(&p));
    }

    #[test]
    fn four_points_two_partitions() {
        let prob = ConsensusProblem::new(vec![part(&[0, 0, 1, 1]), part(&[0, 1, 0, 1])], 2).unwrap();
        let r = consensus_exact(&prob).unwrap();
        assert_eq!(r.objective, brute_min(&prob));
        assert_eq!(r.objective, consensus_objective(&r.pooled, &prob).unwrap());
        // Either input partition is optimal here: 0 + 8.
        assert_eq!(r.objective, 8);
    }

    #[test]
    fn single_individual() {
        let prob = ConsensusProblem::new(vec![part(&[0]); 2], 2).unwrap();
        let r = consensus_exact(&prob).unwrap();
        assert_eq!(r.pooled.labels(), &[0]);
        assert_eq!(r.objective, 0);
    }

    #[test]
    fn refuses_large_n() {
        let prob = ConsensusProblem::new(vec![Partition::single_cluster(11)], 2).unwrap();
        assert!(consensus_exact(&prob).is_err());
    }

    #[test]
    fn matches_unrestricted_brute_force() {
        let mut rng = seed::rng(21);
        for n in 1..=6 {
            for k in 1..=3 {
                let prob = random_problem(n, 3, k, &mut rng);
                assert_eq!(consensus_exact(&prob).unwrap().objective, brute_min(&prob));
            }
        }
    }

    #[test]
    fn majority_partition_example() {
        let prob = ConsensusProblem::new(
            vec![
                part(&[0, 0, 0, 1, 1, 1]),
                part(&[0, 0, 0, 1, 1, 1]),
                part(&[0, 0, 1, 1, 1, 0]),
            ],
            2,
        )
        .unwrap();
        let r = consensus_exact(&prob).unwrap();
        assert_eq!(r.pooled.labels(), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(r.objective, brute_min(&prob));
    }
}
