//! Command-line front end.
//!
//! All randomness flows from `--seed` through [`seed::derive`]: amputation
//! uses `[STREAM_AMPUTE]`, imputation `[STREAM_IMPUTE]`, base-clusterer fits
//! `[STREAM_FIT]`, bootstrap instability `[STREAM_BOOTSTRAP]` and consensus
//! `[STREAM_CONSENSUS]`. Every output directory receives a `manifest.json`
//! recording the command, its configuration, the derived seeds and digests of
//! the inputs; it holds no timestamps or absolute output paths, so reruns are
//! byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::clustering::{Clusterer, ClustererSpec, KMeansConfig, DEFAULT_BETA};
use crate::consensus::{solve, ConsensusProblem, ConsensusResult, Solver};
use crate::dataset::{Dataset, IncompleteDataset};
use crate::error::{Error, ErrorKind, Result};
use crate::imputation::{ampute, ImputationStack, Imputer, Mechanism, DEFAULT_M};
use crate::partition::Partition;
use crate::rubin::{pool_mean, pool_variance, ScalarEstimates};
use crate::seed::{self, STREAM_AMPUTE, STREAM_BOOTSTRAP, STREAM_CONSENSUS, STREAM_FIT, STREAM_IMPUTE};
use crate::simharness::{results_csv, run_grid, write_results, ExperimentGrid};
use crate::stability::{pooled_instability_datasets, BootstrapConfig, InstabilityReport, PooledAnalysis};

/// Name that selects the bundled animals dataset instead of a file.
pub const ANIMALS: &str = "@animals";
const ANIMALS_CSV: &str = include_str!("../data/animals.csv");

#[derive(Debug, Parser)]
#[command(name = "miclust", version, about = "Clustering of incomplete data by multiple imputation")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mask cells of a complete dataset (MCAR or MAR).
    Ampute(AmputeArgs),
    /// Draw M completed copies of an incomplete dataset.
    Impute(ImputeArgs),
    /// Cluster a complete dataset or every copy of an imputation stack.
    Cluster(ClusterArgs),
    /// Pool partitions into a median partition.
    Consensus(ConsensusArgs),
    /// Bootstrap instability of a complete dataset or of an imputation stack.
    Instability(InstabilityArgs),
    /// Impute, cluster every copy, pool and decompose instability.
    Pipeline(PipelineArgs),
    /// Total instability for a range of cluster counts.
    ChooseK(ChooseKArgs),
    /// Run a simulation grid.
    Simulate(SimulateArgs),
    /// Classical Rubin's rules for a scalar statistic.
    #[command(subcommand)]
    Rubin(RubinCommand),
}

#[derive(Debug, Subcommand)]
pub enum RubinCommand {
    /// Pool point estimates and within-imputation variances.
    Pool(PoolArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Root seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kmeans,
    Hclust,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClustererArgs {
    /// Base clustering method.
    #[arg(long, value_enum, default_value_t = Method::Kmeans)]
    pub method: Method,
    /// k-means random starts.
    #[arg(long, default_value_t = 100)]
    pub n_init: usize,
    /// k-means iterations per start.
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Flexible-UPGMA beta (hclust).
    #[arg(long, default_value_t = DEFAULT_BETA, allow_hyphen_values = true)]
    pub beta: f64,
}

impl ClustererArgs {
    fn spec(&self, k: usize) -> ClustererSpec {
        match self.method {
            Method::Kmeans => ClustererSpec::Kmeans(KMeansConfig {
                k,
                n_init: self.n_init,
                max_iter: self.max_iter,
            }),
            Method::Hclust => ClustererSpec::Hclust { k, beta: self.beta },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImputerArgs {
    /// Imputation model: gaussian or hotdeck.
    #[arg(long, default_value = "gaussian")]
    pub imputer: String,
    /// Number of imputed copies.
    #[arg(long, default_value_t = DEFAULT_M)]
    pub m: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AmputeArgs {
    /// Complete CSV.
    #[arg(long)]
    pub input: String,
    /// mcar or mar.
    #[arg(long, default_value = "mcar")]
    pub mechanism: Mechanism,
    /// Expected fraction of missing cells.
    #[arg(long)]
    pub tau: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImputeArgs {
    /// Incomplete CSV, or @animals.
    #[arg(long)]
    pub input: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub imputer: ImputerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(id = "source", required = true, multiple = false)]
pub struct DataSource {
    /// Complete CSV.
    #[arg(long, group = "source")]
    pub input: Option<String>,
    /// Directory written by `impute` or `pipeline`.
    #[arg(long, group = "source")]
    pub stack: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: DataSource,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub clusterer: ClustererArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConsensusArgs {
    /// File with one comma-separated label vector per line.
    #[arg(long)]
    pub partitions: PathBuf,
    /// Clusters in the pooled partition (default: largest label + 1).
    #[arg(long)]
    pub k: Option<usize>,
    /// nmf, saom or exact.
    #[arg(long, default_value = "nmf")]
    pub solver: Solver,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InstabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: DataSource,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub clusterer: ClustererArgs,
    /// Bootstrap pairs per dataset.
    #[arg(long, default_value_t = 20)]
    pub c_pairs: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    /// Incomplete CSV, or @animals.
    #[arg(long)]
    pub input: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub imputer: ImputerArgs,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub clusterer: ClustererArgs,
    /// nmf, saom or exact.
    #[arg(long, default_value = "nmf")]
    pub solver: Solver,
    /// Bootstrap pairs per dataset.
    #[arg(long, default_value_t = 20)]
    pub c_pairs: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChooseKArgs {
    /// Incomplete CSV, or @animals.
    #[arg(long)]
    pub input: String,
    /// Cluster counts, as `2..5` (inclusive) or `2,3,5`.
    #[arg(long, default_value = "2..5")]
    pub k_range: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub imputer: ImputerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub clusterer: ClustererArgs,
    /// Solver for the consensus partition at the recommended K.
    #[arg(long, default_value = "nmf")]
    pub solver: Solver,
    /// Bootstrap pairs per dataset.
    #[arg(long, default_value_t = 20)]
    pub c_pairs: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Grid configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PoolArgs {
    /// Point estimates, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub q: String,
    /// Within-imputation variances, comma-separated.
    #[arg(long)]
    pub u: String,
    /// Leave out the (1 + 1/M) factor on the between variance.
    #[arg(long)]
    pub no_correction: bool,
    /// Also write `pooled.json` and a manifest here.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Process exit status for an error category.
pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
        ErrorKind::Io => 5,
    }
}

#[derive(Debug, Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: serde_json::Value,
    config_sha256: String,
    seeds: BTreeMap<&'static str, u64>,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects everything written to one output directory and finishes with
/// its manifest.
struct Output {
    dir: PathBuf,
    command: &'static str,
    config: serde_json::Value,
    seeds: BTreeMap<&'static str, u64>,
    inputs: Vec<InputRecord>,
    files: Vec<String>,
}

impl Output {
    fn new(dir: &Path, command: &'static str, config: &impl Serialize) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config: serde_json::to_value(config)?,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            files: Vec::new(),
        })
    }

    fn seed(&mut self, name: &'static str, value: u64) -> u64 {
        self.seeds.insert(name, value);
        value
    }

    fn input(&mut self, path: &str, bytes: &[u8]) {
        self.inputs.push(InputRecord {
            path: path.to_string(),
            sha256: hex_sha256(bytes),
        });
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn stack(&mut self, stack: &ImputationStack) -> Result<()> {
        stack.save_dir(&self.dir)?;
        self.files.extend((1..=stack.m()).map(|c| format!("imputed_{c:03}.csv")));
        self.files.push("stack.json".into());
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.files.sort();
        let config_sha256 = hex_sha256(serde_json::to_string(&self.config)?.as_bytes());
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: self.config,
            config_sha256,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.files,
        };
        std::fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_input(name: &str) -> Result<(IncompleteDataset, Vec<u8>)> {
    let bytes = if name == ANIMALS {
        ANIMALS_CSV.as_bytes().to_vec()
    } else {
        read_file(Path::new(name))?
    };
    Ok((IncompleteDataset::read_csv(bytes.as_slice())?, bytes))
}

fn read_source(src: &DataSource, out: &mut Output) -> Result<Vec<Dataset>> {
    match (&src.input, &src.stack) {
        (Some(path), _) => {
            let (inc, bytes) = read_input(path)?;
            out.input(path, &bytes);
            Ok(vec![inc.into_complete()?])
        }
        (None, Some(dir)) => {
            let manifest = dir.join("stack.json");
            out.input(&manifest.to_string_lossy(), &read_file(&manifest)?);
            Ok(ImputationStack::load_dir(dir)?.completed().to_vec())
        }
        (None, None) => Err(Error::Config("give --input or --stack".into())),
    }
}

fn row_labels(d: &Dataset) -> Vec<String> {
    match d.row_ids() {
        Some(ids) => ids.to_vec(),
        None => (1..=d.n()).map(|i| i.to_string()).collect(),
    }
}

fn assignments_csv(ids: &[String], p: &Partition) -> String {
    let mut s = String::from("id,cluster\n");
    for (id, l) in ids.iter().zip(p.labels()) {
        let _ = writeln!(s, "{id},{}", l + 1);
    }
    s
}

fn partitions_text(ps: &[Partition]) -> String {
    ps.iter().map(|p| p.to_csv_line() + "\n").collect()
}

fn report_json(report: &InstabilityReport, k: usize) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(&report.to_json()?)?;
    v["k"] = k.into();
    v["m"] = report.u_per_imputation.len().into();
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn bootstrap_config(seed: u64, c_pairs: usize) -> BootstrapConfig {
    BootstrapConfig::new(seed).with_pairs(c_pairs)
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        set_threads(t)?;
    }
    match cli.command {
        Command::Ampute(a) => cmd_ampute(&a),
        Command::Impute(a) => cmd_impute(&a),
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Consensus(a) => cmd_consensus(&a),
        Command::Instability(a) => cmd_instability(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
        Command::ChooseK(a) => cmd_choose_k(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Rubin(RubinCommand::Pool(a)) => cmd_rubin_pool(&a),
    }
}

#[cfg(feature = "parallel")]
fn set_threads(t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    // A pool may already exist when called repeatedly in one process; the
    // first setting wins, which only affects speed.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_threads(t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    Ok(())
}

pub fn cmd_ampute(a: &AmputeArgs) -> Result<()> {
    let mut out = Output::new(&a.common.out, "ampute", a)?;
    let (inc, bytes) = read_input(&a.input)?;
    out.input(&a.input, &bytes);
    let d = inc.into_complete()?;
    let s = out.seed("ampute", seed::derive(a.common.seed, &[STREAM_AMPUTE]));
    let masked = ampute(&d, a.mechanism, a.tau, s)?;
    let mut buf = Vec::new();
    masked.write_csv(&mut buf)?;
    out.write("incomplete.csv", &String::from_utf8_lossy(&buf))?;
    println!(
        "masked {} of {} cells ({:.4})",
        masked.missing_count(),
        d.n() * d.p(),
        masked.missing_fraction()
    );
    out.finish()
}

pub fn cmd_impute(a: &ImputeArgs) -> Result<()> {
    let mut out = Output::new(&a.common.out, "impute", a)?;
    let (inc, bytes) = read_input(&a.input)?;
    out.input(&a.input, &bytes);
    let imputer: Imputer = a.imputer.imputer.parse()?;
    let s = out.seed("impute", seed::derive(a.common.seed, &[STREAM_IMPUTE]));
    let stack = imputer.impute(&inc, a.imputer.m, s, Default::default())?;
    out.stack(&stack)?;
    println!(
        "{} copies with the {} imputer ({} missing cells)",
        stack.m(),
        stack.imputer_id(),
        inc.missing_count()
    );
    out.finish()
}

pub fn cmd_cluster(a: &ClusterArgs) -> Result<()> {
    let mut out = Output::new(&a.common.out, "cluster", a)?;
    let data = read_source(&a.source, &mut out)?;
    let spec = a.clusterer.spec(a.k);
    let s = out.seed("fit", seed::derive(a.common.seed, &[STREAM_FIT]));
    let parts = data
        .iter()
        .map(|d| spec.fit(d, s).map(|f| f.partition))
        .collect::<Result<Vec<_>>>()?;
    out.write("partitions.csv", &partitions_text(&parts))?;
    if let [only] = parts.as_slice() {
        out.write("assignments.csv", &assignments_csv(&row_labels(&data[0]), only))?;
    }
    println!("clustered {} dataset(s) into {} clusters", parts.len(), a.k);
    out.finish()
}

fn read_partitions(path: &Path) -> Result<(Vec<Partition>, Vec<u8>)> {
    let bytes = read_file(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let parts = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            Partition::from_csv_line(l).map_err(|e| Error::Data(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((parts, bytes))
}

fn write_consensus(out: &mut Output, r: &ConsensusResult, ids: &[String]) -> Result<()> {
    out.write("consensus.json", &(r.to_json()? + "\n"))?;
    out.write("consensus.csv", &assignments_csv(ids, &r.pooled))
}

pub fn cmd_consensus(a: &ConsensusArgs) -> Result<()> {
    let mut out = Output::new(&a.common.out, "consensus", a)?;
    let (parts, bytes) = read_partitions(&a.partitions)?;
    out.input(&a.partitions.to_string_lossy(), &bytes);
    if parts.is_empty() {
        return Err(Error::Data("no partitions to pool".into()));
    }
    let k = a.k.unwrap_or_else(|| parts.iter().map(|p| p.k()).max().unwrap_or(1));
    let prob = ConsensusProblem::new(parts, k)?;
    let s = out.seed("consensus", seed::derive(a.common.seed, &[STREAM_CONSENSUS]));
    let r = solve(&prob, a.solver, s)?;
    let ids: Vec<String> = (1..=prob.n()).map(|i| i.to_string()).collect();
    write_consensus(&mut out, &r, &ids)?;
    println!("{} consensus of {} partitions: objective {}", a.solver.as_str(), prob.m(), r.objective);
    out.finish()
}

fn print_report(r: &InstabilityReport) {
    println!(
        "U_bar = {:.6}  B = {:.6}  T = {:.6}  B/T = {:.6}{}",
        r.u_bar,
        r.b,
        r.t,
        r.robustness_ratio(),
        if r.single_imputation { "  (single imputation)" } else { "" }
    );
}

pub fn cmd_instability(a: &InstabilityArgs) -> Result<()> {
    let mut out = Output::new(&a.common.out, "instability", a)?;
    let data = read_source(&a.source, &mut out)?;
    let spec = a.clusterer.spec(a.k);
    let cfg = bootstrap_config(out.seed("bootstrap", seed::derive(a.common.seed, &[STREAM_BOOTSTRAP])), a.c_pairs);
    let analysis = pooled_instability_datasets(&data, &spec, &cfg)?;
    out.write("instability.json", &report_json(&analysis.report, a.k)?)?;
    print_report(&analysis.report);
    out.finish()
}

fn impute_stage(input: &str, imp: &ImputerArgs, seed_root: u64, out: &mut Output) -> Result<(IncompleteDataset, ImputationStack)> {
    let (inc, bytes) = read_input(input).map_err(|e| e.in_stage("read input"))?;
    out.input(input, &bytes);
    let imputer: Imputer = imp.imputer.parse()?;
    let s = out.seed("impute", seed::derive(seed_root, &[STREAM_IMPUTE]));
    let stack = imputer
        .impute(&inc, imp.m, s, Default::default())
        .map_err(|e| e.in_stage("impute"))?;
    Ok((inc, stack))
}

pub fn cmd_pipeline(a: &PipelineArgs) -> Result<()> {
    let mut out = Output::new(&a.common.out, "pipeline", a)?;
    let (inc, stack) = impute_stage(&a.input, &a.imputer, a.common.seed, &mut out)?;
    out.stack(&stack)?;
    let spec = a.clusterer.spec(a.k);
    let cfg = bootstrap_config(out.seed("bootstrap", seed::derive(a.common.seed, &[STREAM_BOOTSTRAP])), a.c_pairs);
    out.seed("fit", crate::stability::copy_fit_seed(&cfg));
    let PooledAnalysis { partitions, report } =
        pooled_instability_datasets(stack.completed(), &spec, &cfg).map_err(|e| e.in_stage("instability"))?;
    out.write("partitions.csv", &partitions_text(&partitions))?;
    let prob = ConsensusProblem::new(partitions, a.k).map_err(|e| e.in_stage("consensus"))?;
    let s = out.seed("consensus", seed::derive(a.common.seed, &[STREAM_CONSENSUS]));
    let r = solve(&prob, a.solver, s).map_err(|e| e.in_stage("consensus"))?;
    write_consensus(&mut out, &r, &row_labels(&stack.completed()[0]))?;
    out.write("instability.json", &report_json(&report, a.k)?)?;
    println!(
        "{} copies ({} missing cells), {} consensus objective {}",
        stack.m(),
        inc.missing_count(),
        a.solver.as_str(),
        r.objective
    );
    print_report(&report);
    out.finish()
}

/// Parses `2..5` (inclusive) or `2,3,5`.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("bad K range {s:?}; use e.g. 2..5 or 2,3,5"));
    let ks: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

#[derive(Debug, Serialize)]
struct ChooseKRow {
    k: usize,
    u_bar: f64,
    b: f64,
    t: f64,
    b_over_t: f64,
}

pub fn cmd_choose_k(a: &ChooseKArgs) -> Result<()> {
    let ks = parse_k_range(&a.k_range)?;
    let mut out = Output::new(&a.common.out, "choose-k", a)?;
    let (_, stack) = impute_stage(&a.input, &a.imputer, a.common.seed, &mut out)?;
    let cfg = bootstrap_config(out.seed("bootstrap", seed::derive(a.common.seed, &[STREAM_BOOTSTRAP])), a.c_pairs);
    out.seed("fit", crate::stability::copy_fit_seed(&cfg));
    let mut rows = Vec::new();
    let mut best: Option<(usize, f64, Vec<Partition>)> = None;
    for &k in &ks {
        let spec = a.clusterer.spec(k);
        let PooledAnalysis { partitions, report } = pooled_instability_datasets(stack.completed(), &spec, &cfg)
            .map_err(|e| e.in_stage("instability"))?;
        if best.as_ref().is_none_or(|b| report.t < b.1) {
            best = Some((k, report.t, partitions));
        }
        rows.push(ChooseKRow {
            k,
            u_bar: report.u_bar,
            b: report.b,
            t: report.t,
            b_over_t: report.robustness_ratio(),
        });
    }
    let (best_k, _, parts) = best.expect("non-empty K range");
    let mut table = String::from("k,u_bar,b,t,b_over_t\n");
    for r in &rows {
        let _ = writeln!(table, "{},{:.6},{:.6},{:.6},{:.6}", r.k, r.u_bar, r.b, r.t, r.b_over_t);
    }
    out.write("choose_k.csv", &table)?;
    let summary = serde_json::json!({ "rows": rows, "recommended_k": best_k });
    out.write("choose_k.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    let prob = ConsensusProblem::new(parts, best_k).map_err(|e| e.in_stage("consensus"))?;
    let s = out.seed("consensus", seed::derive(a.common.seed, &[STREAM_CONSENSUS]));
    let r = solve(&prob, a.solver, s).map_err(|e| e.in_stage("consensus"))?;
    write_consensus(&mut out, &r, &row_labels(&stack.completed()[0]))?;
    print!("{table}");
    println!("recommended K = {best_k}");
    out.finish()
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let text = String::from_utf8_lossy(&read_file(&a.config)?).into_owned();
    let grid = ExperimentGrid::from_json(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", a.config.display())))?;
    let mut out = Output::new(&a.out, "simulate", &grid)?;
    out.input(&a.config.to_string_lossy(), text.as_bytes());
    out.seed("base", grid.base_seed);
    let cells = run_grid(&grid)?;
    write_results(&cells, &a.out)?;
    out.files.push("results.csv".into());
    out.files.extend((1..=cells.len()).map(|i| format!("cells/cell_{i:03}.json")));
    print!("{}", results_csv(&cells));
    out.finish()
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {t:?} in {what}")))
        })
        .collect()
}

pub fn cmd_rubin_pool(a: &PoolArgs) -> Result<()> {
    let e = ScalarEstimates::new(parse_list(&a.q, "--q")?, parse_list(&a.u, "--u")?)?;
    let v = pool_variance(&e, !a.no_correction);
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "m": e.m(),
        "q_bar": pool_mean(&e),
        "u_bar": v.u_bar,
        "b": v.b,
        "t": v.t,
        "b_over_t": v.ratio(),
        "small_m_correction": !a.no_correction,
        "single_imputation": v.single_imputation,
    }))? + "\n";
    print!("{json}");
    if let Some(dir) = &a.out {
        let mut out = Output::new(dir, "rubin pool", a)?;
        out.write("pooled.json", &json)?;
        out.finish()?;
    }
    Ok(())
}
