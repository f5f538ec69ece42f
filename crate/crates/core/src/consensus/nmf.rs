use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ConsensusProblem, ConsensusResult, Solver};
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    /// Stop once the relative decrease of the relaxed loss falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the off-diagonal penalty `‖GᵀG − diag(GᵀG)‖²`.
    pub lambda: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 2000,
            lambda: 0.0,
        }
    }
}

struct Relaxation<'a> {
    target: &'a DMatrix<f64>,
    target_sq: f64,
    lambda: f64,
}

impl Relaxation<'_> {
    /// `‖M̄ − GGᵀ‖² + λ‖offdiag(GᵀG)‖²`, via `‖M̄‖² − 2 tr(GᵀM̄G) + ‖GᵀG‖²`.
    fn loss(&self, g: &DMatrix<f64>) -> f64 {
        let mg = self.target * g;
        let gtg = g.transpose() * g;
        let cross = g.dot(&mg);
        let fit = (self.target_sq - 2.0 * cross + gtg.norm_squared()).max(0.0);
        if self.lambda == 0.0 {
            return fit;
        }
        let off = gtg.norm_squared() - gtg.diagonal().norm_squared();
        fit + self.lambda * off
    }

    /// Multiplicative step `G ∘ (M̄G / (GGᵀG + λ G O))^power` with `O` the
    /// off-diagonal part of `GᵀG`.
    fn step(&self, g: &DMatrix<f64>, power: f64) -> DMatrix<f64> {
        let mg = self.target * g;
        let mut gtg = g.transpose() * g;
        let mut denom = g * &gtg;
        if self.lambda != 0.0 {
            gtg.fill_diagonal(0.0);
            denom += (g * gtg) * self.lambda;
        }
        DMatrix::from_fn(g.nrows(), g.ncols(), |i, a| {
            let d = denom[(i, a)];
            if d > 0.0 {
                g[(i, a)] * (mg[(i, a)] / d).powf(power)
            } else {
                g[(i, a)]
            }
        })
    }
}

#[inline]
fn argmax_row(g: &DMatrix<f64>, i: usize) -> usize {
    let mut best = 0;
    for a in 1..g.ncols() {
        if g[(i, a)] > g[(i, best)] {
            best = a;
        }
    }
    best
}

/// Symmetric NMF consensus: fits `M̄ ≈ GGᵀ` with `G ≥ 0` (`n × k`) by
/// multiplicative updates, then assigns each individual to its largest
/// factor loading (ties to the lowest index).
///
/// `G` starts from the indicator matrix of the best contributory partition
/// plus `U[0, 0.01]` noise. Each step uses the fourth-root update; a step
/// that would increase the relaxed loss is retried with a halved exponent,
/// so the trace is non-increasing.
pub fn consensus_nmf(prob: &ConsensusProblem, cfg: &NmfConfig, seed: u64) -> Result<ConsensusResult> {
    if cfg.lambda < 0.0 || !cfg.tol.is_finite() {
        return Err(Error::Config("NMF needs lambda >= 0 and a finite tolerance".into()));
    }
    let (n, k) = (prob.n(), prob.k());
    let target = prob.mean_connectivity().to_matrix();
    let relax = Relaxation {
        target: &target,
        target_sq: target.norm_squared(),
        lambda: cfg.lambda,
    };
    let start = prob.medoid();
    let mut rng = seed::rng(seed);
    let mut g = DMatrix::from_fn(n, k, |i, a| {
        let base = if start.labels()[i] == a { 1.0 } else { 0.0 };
        base + 0.01 * rng.random::<f64>()
    });
    let mut loss = relax.loss(&g);
    let mut trace = vec![loss];
    for _ in 0..cfg.max_iter {
        let mut power = 0.25;
        let mut accepted = None;
        for _ in 0..8 {
            let cand = relax.step(&g, power);
            let cand_loss = relax.loss(&cand);
            if cand_loss <= loss {
                accepted = Some((cand, cand_loss));
                break;
            }
            power *= 0.5;
        }
        let Some((cand, cand_loss)) = accepted else { break };
        debug_assert!(cand_loss <= loss);
        let decrease = loss - cand_loss;
        g = cand;
        loss = cand_loss;
        trace.push(loss);
        if decrease <= cfg.tol * loss.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let labels = (0..n).map(|i| argmax_row(&g, i)).collect();
    let pooled = Partition::new(labels, k)?;
    ConsensusResult::finish(pooled, prob, Solver::Nmf, trace)
}
