use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ConsensusProblem, ConsensusResult, Solver};
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::seed;

/// Geometric cooling schedule for one-element-move annealing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    /// `None`: largest `|ΔL|` over `probe_moves` random moves from the start.
    pub initial_temperature: Option<f64>,
    pub probe_moves: usize,
    pub cooling: f64,
    /// `None`: `100 · n`.
    pub moves_per_sweep: Option<usize>,
    pub sweeps: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            initial_temperature: None,
            probe_moves: 50,
            cooling: 0.95,
            moves_per_sweep: None,
            sweeps: 50,
        }
    }
}

struct State<'a> {
    prob: &'a ConsensusProblem,
    labels: Vec<usize>,
    acc: Vec<i64>,
}

impl State<'_> {
    /// `L(after) - L(before)` for moving `i` to cluster `to`, in O(n).
    fn delta(&mut self, i: usize, to: usize) -> i64 {
        self.acc.iter_mut().for_each(|a| *a = 0);
        for (j, &l) in self.labels.iter().enumerate() {
            if j != i {
                self.acc[l] += self.prob.together_minus_apart(i, j);
            }
        }
        2 * (self.acc[to] - self.acc[self.labels[i]])
    }
}

/// Simulated annealing over partitions into at most `k` clusters. A move
/// relabels a single individual; moves are accepted by the Metropolis rule on
/// the change in loss. Starts from the best contributory partition and
/// returns the best state visited.
pub fn consensus_saom(prob: &ConsensusProblem, schedule: &AnnealSchedule, seed: u64) -> Result<ConsensusResult> {
    if !(schedule.cooling > 0.0 && schedule.cooling < 1.0) {
        return Err(Error::Config(format!("cooling factor must be in (0, 1), got {}", schedule.cooling)));
    }
    let (n, k) = (prob.n(), prob.k());
    let start = prob.medoid();
    let mut state = State {
        prob,
        labels: start.labels().to_vec(),
        acc: vec![0; k],
    };
    let mut current = prob.loss_of_labels(&state.labels) as i64;
    let mut best = (current, state.labels.clone());
    let mut trace = vec![current as f64];
    if k == 1 || n == 1 {
        let pooled = Partition::new(best.1, k)?;
        return ConsensusResult::finish(pooled, prob, Solver::Saom, trace);
    }
    let mut rng = seed::rng(seed);
    let random_move = |rng: &mut seed::Rng, labels: &[usize]| {
        let i = rng.random_range(0..n);
        let mut to = rng.random_range(0..k - 1);
        if to >= labels[i] {
            to += 1;
        }
        (i, to)
    };
    let mut temperature = match schedule.initial_temperature {
        Some(t) => t,
        None => {
            let mut t = 0i64;
            for _ in 0..schedule.probe_moves {
                let (i, to) = random_move(&mut rng, &state.labels);
                t = t.max(state.delta(i, to).abs());
            }
            if t == 0 {
                1.0
            } else {
                t as f64
            }
        }
    };
    let moves = schedule.moves_per_sweep.unwrap_or(100 * n);
    for _ in 0..schedule.sweeps {
        for _ in 0..moves {
            if best.0 == 0 {
                break;
            }
            let (i, to) = random_move(&mut rng, &state.labels);
            let d = state.delta(i, to);
            let accept = d <= 0 || rng.random::<f64>() < (-(d as f64) / temperature).exp();
            if accept {
                state.labels[i] = to;
                current += d;
                if current < best.0 {
                    best = (current, state.labels.clone());
                }
            }
        }
        trace.push(best.0 as f64);
        temperature *= schedule.cooling;
    }
    debug_assert_eq!(prob.loss_of_labels(&best.1) as i64, best.0);
    let pooled = Partition::new(best.1, k)?;
    ConsensusResult::finish(pooled, prob, Solver::Saom, trace)
}
