//! Simulation study: generate → ampute → impute → cluster → pool, over a grid
//! of sample sizes, correlations, missing rates, mechanisms and `M`.
//!
//! Seeds for generated data, masks, imputation and bootstrap depend on the
//! replicate and on the grid coordinates that affect them, but not on `M`, the
//! imputer or the solver. Cells that differ only in those compare methods on
//! the same simulated datasets.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{Clusterer, ClustererSpec, KMeansConfig};
use crate::consensus::{solve, ConsensusProblem, Solver};
use crate::datagen::{generate_mixture, LabeledDataset, MixtureSpec};
use crate::dataset::{Dataset, IncompleteDataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::imputation::{ampute, Imputer, Mechanism};
use crate::partition::adjusted_rand_index;
use crate::seed::{self, float_key, STREAM_AMPUTE, STREAM_BOOTSTRAP, STREAM_CONSENSUS, STREAM_DATA, STREAM_IMPUTE};
use crate::stability::{bootstrap_instability, copy_fit_seed, pooled_instability_datasets, BootstrapConfig};

/// Largest share of failed replicates a cell tolerates.
const MAX_FAILURE_RATE: f64 = 0.10;

fn default_clusterer() -> ClustererSpec {
    ClustererSpec::Kmeans(KMeansConfig::new(2))
}

fn default_c_pairs() -> usize {
    20
}

fn default_solvers() -> Vec<Solver> {
    vec![Solver::Nmf]
}

fn default_imputers() -> Vec<String> {
    vec!["gaussian".into()]
}

fn default_mechanisms() -> Vec<Mechanism> {
    vec![Mechanism::Mcar]
}

/// Experiment grid, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub n_values: Vec<usize>,
    pub rho_values: Vec<f64>,
    pub tau_values: Vec<f64>,
    #[serde(default = "default_mechanisms")]
    pub mechanisms: Vec<Mechanism>,
    pub m_values: Vec<usize>,
    pub s_replicates: usize,
    #[serde(default = "default_imputers")]
    pub imputers: Vec<String>,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<Solver>,
    #[serde(default = "default_clusterer")]
    pub clusterer: ClustererSpec,
    #[serde(default = "default_c_pairs")]
    pub c_pairs: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl ExperimentGrid {
    /// Desk-scale grid: `n ∈ {50, 200}`, `ρ ∈ {0.3, 0.6}`,
    /// `τ ∈ {0.1, 0.3, 0.5}`, MCAR, `M ∈ {1, 5, 20}`, `S = 50`, `C = 20`.
    pub fn desk(base_seed: u64) -> Self {
        Self {
            n_values: vec![50, 200],
            rho_values: vec![0.3, 0.6],
            tau_values: vec![0.1, 0.3, 0.5],
            mechanisms: default_mechanisms(),
            m_values: vec![1, 5, 20],
            s_replicates: 50,
            imputers: default_imputers(),
            solvers: default_solvers(),
            clusterer: default_clusterer(),
            c_pairs: default_c_pairs(),
            base_seed,
            execution: Execution::default(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("n_values", self.n_values.is_empty()),
            ("rho_values", self.rho_values.is_empty()),
            ("tau_values", self.tau_values.is_empty()),
            ("mechanisms", self.mechanisms.is_empty()),
            ("m_values", self.m_values.is_empty()),
            ("imputers", self.imputers.is_empty()),
            ("solvers", self.solvers.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|e| e.1) {
            return Err(Error::Config(format!("grid field {name} must not be empty")));
        }
        if self.s_replicates == 0 || self.c_pairs == 0 {
            return Err(Error::Config("s_replicates and c_pairs must be at least 1".into()));
        }
        if self.m_values.contains(&0) {
            return Err(Error::Config("m_values must be at least 1".into()));
        }
        for id in &self.imputers {
            id.parse::<Imputer>()?;
        }
        Ok(())
    }

    /// Cells in table order: `n`, `ρ`, `τ`, mechanism, imputer, `M`.
    pub fn cells(&self) -> Vec<CellCoords> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &rho in &self.rho_values {
                for &tau in &self.tau_values {
                    for &mechanism in &self.mechanisms {
                        for imputer in &self.imputers {
                            for &m in &self.m_values {
                                out.push(CellCoords {
                                    n,
                                    rho,
                                    tau,
                                    mechanism,
                                    imputer: imputer.clone(),
                                    m,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCoords {
    pub n: usize,
    pub rho: f64,
    pub tau: f64,
    pub mechanism: Mechanism,
    pub imputer: String,
    pub m: usize,
}

/// Outcome of one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub missing_fraction: f64,
    /// ARI of the pooled partition against the truth, one per solver.
    pub ari: Vec<f64>,
    pub u_bar: f64,
    pub b: f64,
    pub t: f64,
    pub full_ari: f64,
    pub full_t: f64,
    /// Complete-case instability; `None` when it cannot be computed.
    pub cca_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: Solver,
    pub ari_mean: f64,
    pub ari_iq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub coords: CellCoords,
    pub solvers: Vec<SolverSummary>,
    pub u_bar_mean: f64,
    pub b_mean: f64,
    pub t_mean: f64,
    pub full_ari_mean: f64,
    pub full_ari_iq: f64,
    pub full_t_mean: f64,
    pub cca_t_mean: Option<f64>,
    pub cca_replicates: usize,
    pub failures: Vec<String>,
    pub replicates: Vec<ReplicateResult>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Interquartile range `Q3 − Q1`.
pub fn iqr(xs: &[f64]) -> f64 {
    quantile(xs, 0.75) - quantile(xs, 0.25)
}

/// Rows with no missing cell, and their indices in the input.
pub fn complete_case_extract(inc: &IncompleteDataset) -> Result<(Dataset, Vec<usize>)> {
    let (idx, values) = inc.complete_rows();
    if idx.is_empty() {
        return Err(Error::Data("no complete case".into()));
    }
    Ok((inc.subset_dataset(&idx, values)?, idx))
}

fn mechanism_code(m: Mechanism) -> u64 {
    match m {
        Mechanism::Mcar => 0,
        Mechanism::Mar => 1,
    }
}

struct ReplicateSeeds {
    data: u64,
    ampute: u64,
    impute: u64,
    bootstrap: u64,
    consensus: u64,
}

impl ReplicateSeeds {
    fn new(base: u64, c: &CellCoords, s: usize) -> Self {
        let (n, rho, s) = (c.n as u64, float_key(c.rho), s as u64);
        let mask = [n, rho, float_key(c.tau), mechanism_code(c.mechanism), s];
        let derive = |stream: u64, tail: &[u64]| {
            let path: Vec<u64> = std::iter::once(stream).chain(tail.iter().copied()).collect();
            seed::derive(base, &path)
        };
        Self {
            data: derive(STREAM_DATA, &[n, rho, s]),
            ampute: derive(STREAM_AMPUTE, &mask),
            impute: derive(STREAM_IMPUTE, &mask),
            // Independent of the mask, so the full-data benchmark is the same
            // across missing rates.
            bootstrap: derive(STREAM_BOOTSTRAP, &[n, rho, s]),
            consensus: derive(STREAM_CONSENSUS, &mask),
        }
    }
}

fn run_replicate(grid: &ExperimentGrid, c: &CellCoords, s: usize) -> Result<ReplicateResult> {
    let seeds = ReplicateSeeds::new(grid.base_seed, c, s);
    let clusterer = &grid.clusterer;
    let k = clusterer.k();
    let LabeledDataset { data, truth } = generate_mixture(&MixtureSpec::new(c.n, c.rho), seeds.data)?;
    let inc = ampute(&data, c.mechanism, c.tau, seeds.ampute)?;
    let imputer: Imputer = c.imputer.parse()?;
    let stack = imputer.impute(&inc, c.m, seeds.impute, grid.execution)?;
    let cfg = BootstrapConfig::new(seeds.bootstrap)
        .with_pairs(grid.c_pairs)
        .with_execution(grid.execution);
    let pooled = pooled_instability_datasets(stack.completed(), clusterer, &cfg)?;
    let prob = ConsensusProblem::new(pooled.partitions.clone(), k)?;
    let ari = grid
        .solvers
        .iter()
        .map(|&solver| {
            let r = solve(&prob, solver, seeds.consensus)?;
            adjusted_rand_index(&r.pooled, &truth)
        })
        .collect::<Result<Vec<_>>>()?;
    let full_fit = clusterer.fit(&data, copy_fit_seed(&cfg))?;
    let full_ari = adjusted_rand_index(&full_fit.partition, &truth)?;
    let full_t = bootstrap_instability(&data, clusterer, &cfg)?;
    let cca_t = complete_case_extract(&inc)
        .ok()
        .and_then(|(cc, _)| bootstrap_instability(&cc, clusterer, &cfg).ok());
    Ok(ReplicateResult {
        replicate: s,
        missing_fraction: inc.missing_fraction(),
        ari,
        u_bar: pooled.report.u_bar,
        b: pooled.report.b,
        t: pooled.report.t,
        full_ari,
        full_t,
        cca_t,
    })
}

/// Runs all replicates of one cell and aggregates them.
pub fn run_cell(coords: &CellCoords, grid: &ExperimentGrid) -> Result<CellResult> {
    let s_total = grid.s_replicates;
    let outcomes = grid.execution.map(s_total, |s| run_replicate(grid, coords, s));
    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (s, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => replicates.push(r),
            Err(e) => failures.push(format!("replicate {s}: {e}")),
        }
    }
    if replicates.is_empty() || failures.len() as f64 > MAX_FAILURE_RATE * s_total as f64 {
        return Err(Error::Data(format!(
            "cell n={} rho={} tau={} {} {} M={}: {} of {} replicates failed; first: {}",
            coords.n,
            coords.rho,
            coords.tau,
            coords.mechanism.as_str(),
            coords.imputer,
            coords.m,
            failures.len(),
            s_total,
            failures.first().map_or("", String::as_str)
        )));
    }
    let col = |f: &dyn Fn(&ReplicateResult) -> f64| replicates.iter().map(f).collect::<Vec<f64>>();
    let solvers = grid
        .solvers
        .iter()
        .enumerate()
        .map(|(i, &solver)| {
            let a = col(&|r| r.ari[i]);
            SolverSummary {
                solver,
                ari_mean: mean(&a),
                ari_iq: iqr(&a),
            }
        })
        .collect();
    let full_ari = col(&|r| r.full_ari);
    let cca: Vec<f64> = replicates.iter().filter_map(|r| r.cca_t).collect();
    Ok(CellResult {
        coords: coords.clone(),
        solvers,
        u_bar_mean: mean(&col(&|r| r.u_bar)),
        b_mean: mean(&col(&|r| r.b)),
        t_mean: mean(&col(&|r| r.t)),
        full_ari_mean: mean(&full_ari),
        full_ari_iq: iqr(&full_ari),
        full_t_mean: mean(&col(&|r| r.full_t)),
        cca_t_mean: (!cca.is_empty()).then(|| mean(&cca)),
        cca_replicates: cca.len(),
        failures,
        replicates,
    })
}

/// All cells of a grid, in [`ExperimentGrid::cells`] order.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<CellResult>> {
    grid.validate()?;
    let mut results = Vec::new();
    let mut errors = Vec::new();
    for c in grid.cells() {
        match run_cell(&c, grid) {
            Ok(r) => results.push(r),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Data(format!("{} cell(s) failed:\n{}", errors.len(), errors.join("\n"))));
    }
    Ok(results)
}

/// Result table: one row per cell, a mean/IQ pair per solver.
pub fn results_csv(cells: &[CellResult]) -> String {
    let mut out = String::from("n,rho,tau,mechanism,imputer,m,replicates,failed");
    if let Some(first) = cells.first() {
        for s in &first.solvers {
            let id = s.solver.as_str();
            let _ = write!(out, ",ari_mean_{id},ari_iq_{id}");
        }
    }
    out.push_str(",u_bar_mean,b_mean,t_mean,full_ari_mean,full_ari_iq,full_t_mean,cca_t_mean,cca_replicates\n");
    for c in cells {
        let k = &c.coords;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            k.n,
            k.rho,
            k.tau,
            k.mechanism.as_str(),
            k.imputer,
            k.m,
            c.replicates.len(),
            c.failures.len()
        );
        for s in &c.solvers {
            let _ = write!(out, ",{:.6},{:.6}", s.ari_mean, s.ari_iq);
        }
        let cca = c.cca_t_mean.map(|v| format!("{v:.6}")).unwrap_or_default();
        let _ = writeln!(
            out,
            ",{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            c.u_bar_mean, c.b_mean, c.t_mean, c.full_ari_mean, c.full_ari_iq, c.full_t_mean, cca, c.cca_replicates
        );
    }
    out
}

/// Writes `results.csv` and `cells/cell_NNN.json` under `dir`.
pub fn write_results(cells: &[CellResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("cells"))?;
    std::fs::write(dir.join("results.csv"), results_csv(cells))?;
    for (i, c) in cells.iter().enumerate() {
        std::fs::write(
            dir.join("cells").join(format!("cell_{:03}.json", i + 1)),
            serde_json::to_string_pretty(c)? + "\n",
        )?;
    }
    Ok(())
}
