//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The process exits 0 after printing every line so that a red criterion is
//! reported rather than hidden behind the first failure. Set
//! `MICLUST_ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails, and pass
//! criterion numbers (`cargo test --test acceptance -- 4 10`) to run a subset.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use miclust::clustering::{ClustererSpec, KMeansConfig};
use miclust::consensus::{consensus_exact, consensus_nmf, consensus_saom, AnnealSchedule, ConsensusProblem, NmfConfig};
use miclust::datagen::{generate_mixture, MixtureSpec};
use miclust::imputation::{ampute_mcar, impute_gaussian, impute_hotdeck, Imputer, Mechanism};
use miclust::partition::{adjusted_rand_index, disagreement, mirkin_distance, Partition};
use miclust::rubin::{pool_variance, ScalarEstimates};
use miclust::seed;
use miclust::simharness::{run_cell, CellCoords, CellResult, ExperimentGrid};
use miclust::stability::{
    between_instability, bootstrap_instability, pooled_instability, pooled_instability_datasets, BetweenNormalization,
    BootstrapConfig,
};
use rand::Rng;

const BIN: &str = env!("CARGO_BIN_EXE_miclust");

/// Every total instability computed anywhere in the suite.
#[derive(Default)]
struct Suite {
    totals: Vec<(String, f64)>,
    desk: Option<DeskCells>,
}

impl Suite {
    fn record(&mut self, source: &str, t: f64) {
        self.totals.push((source.to_string(), t));
    }
}

struct DeskCells {
    m1: CellResult,
    m20: CellResult,
    tau01_m20: CellResult,
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn kmeans(k: usize) -> ClustererSpec {
    ClustererSpec::Kmeans(KMeansConfig::new(k))
}

// ---------------------------------------------------------------------------

fn consensus_vs_exact(_: &mut Suite) -> Verdict {
    let mut rng = seed::rng(20_240_601);
    let (mut saom_hits, mut nmf_within, mut nmf_hits) = (0, 0, 0);
    let instances = 100;
    for inst in 0..instances {
        let n = rng.random_range(3..=8);
        let m = [3, 5][inst % 2];
        let k = [2, 3][(inst / 2) % 2];
        let parts: Vec<Partition> = (0..m)
            .map(|_| Partition::new((0..n).map(|_| rng.random_range(0..k)).collect(), k).unwrap())
            .collect();
        let prob = ConsensusProblem::new(parts, k).unwrap();
        let opt = consensus_exact(&prob).unwrap().objective;
        let saom = consensus_saom(&prob, &AnnealSchedule::default(), inst as u64).unwrap().objective;
        let nmf = consensus_nmf(&prob, &NmfConfig::default(), inst as u64).unwrap().objective;
        saom_hits += usize::from(saom == opt);
        nmf_within += usize::from(nmf <= 2 * opt);
        nmf_hits += usize::from(nmf == opt);
    }
    verdict(
        saom_hits * 100 >= 90 * instances && nmf_within == instances,
        format!("SAOM optimal {saom_hits}/{instances}; NMF <= 2x optimum {nmf_within}/{instances} (optimal {nmf_hits})"),
    )
}

fn no_missing_equivalence(suite: &mut Suite) -> Verdict {
    let data = generate_mixture(&MixtureSpec::new(60, 0.3), 5).unwrap().data;
    let inc = data.to_incomplete();
    let mut ok = true;
    let mut checked = 0;
    for (k, c_pairs) in [(2, 20), (3, 10)] {
        let clusterer = kmeans(k);
        let cfg = BootstrapConfig::new(77).with_pairs(c_pairs);
        let direct = bootstrap_instability(&data, &clusterer, &cfg).unwrap();
        suite.record("no-missing direct", direct);
        for m in [1, 2, 5, 20] {
            for stack in [impute_gaussian(&inc, m, 3).unwrap(), impute_hotdeck(&inc, m, 3).unwrap()] {
                let r = pooled_instability(&stack, &clusterer, &cfg).unwrap();
                suite.record("no-missing pooled", r.t);
                ok &= r.b == 0.0 && r.t.to_bits() == direct.to_bits();
                checked += 1;
            }
        }
    }
    verdict(ok, format!("{checked} stacks (M in 1,2,5,20; two imputers; K=2,3): B = 0 and T bit-equal to direct"))
}

fn bounds_and_degenerate(suite: &mut Suite) -> Verdict {
    // Extra sweep over small random configurations, including K = 1.
    let mut rng = seed::rng(31);
    let mut k1_zero = true;
    let mut sum_exact = true;
    for case in 0..24u64 {
        let n = rng.random_range(12..=40);
        let k = rng.random_range(1..=4);
        let m = rng.random_range(1..=6);
        let tau = [0.0, 0.1, 0.3, 0.5][case as usize % 4];
        let data = generate_mixture(&MixtureSpec::new(n, 0.6), case).unwrap().data;
        let inc = ampute_mcar(&data, tau, case).unwrap();
        let stack = impute_gaussian(&inc, m, case).unwrap();
        let cfg = BootstrapConfig::new(case).with_pairs(5);
        for clusterer in [
            ClustererSpec::Kmeans(KMeansConfig { k, n_init: 10, max_iter: 50 }),
            ClustererSpec::Hclust { k, beta: -0.1 },
        ] {
            let r = pooled_instability(&stack, &clusterer, &cfg).unwrap();
            suite.record("sweep", r.t);
            sum_exact &= r.t == r.u_bar + r.b;
            if k == 1 {
                k1_zero &= r.t == 0.0;
            }
        }
        let one = pooled_instability(&stack, &kmeans(1), &cfg).unwrap();
        suite.record("sweep K=1", one.t);
        k1_zero &= one.t == 0.0 && one.u_bar == 0.0 && one.b == 0.0;
    }
    let grid = ExperimentGrid {
        n_values: vec![30],
        rho_values: vec![0.3],
        tau_values: vec![0.3],
        m_values: vec![3],
        s_replicates: 3,
        c_pairs: 5,
        clusterer: kmeans(1),
        ..ExperimentGrid::desk(3)
    };
    let cell = run_cell(&grid.cells()[0], &grid).unwrap();
    for r in &cell.replicates {
        suite.record("smoke cell K=1", r.t);
        k1_zero &= r.t == 0.0 && r.full_t == 0.0;
    }
    let total = suite.totals.len();
    let out_of_range: Vec<&(String, f64)> = suite.totals.iter().filter(|(_, t)| !(0.0..=2.0).contains(t)).collect();
    let max = suite.totals.iter().map(|x| x.1).fold(0.0, f64::max);
    verdict(
        out_of_range.is_empty() && k1_zero && sum_exact,
        format!(
            "{total} T values across the suite, max {max:.4}, out of [0, 2]: {}; K=1 => T=0: {k1_zero}; T = U + B exact: {sum_exact}",
            out_of_range.len()
        ),
    )
}

fn m_robustness(suite: &mut Suite) -> Verdict {
    let data = generate_mixture(&MixtureSpec::new(50, 0.3), 2024).unwrap().data;
    let inc = ampute_mcar(&data, 0.3, 2025).unwrap();
    let clusterer = kmeans(2);
    let replicates = 30u64;
    let mut means: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
    for m in [2usize, 50] {
        let mut acc = [0.0; 2];
        for r in 0..replicates {
            let stack = impute_gaussian(&inc, m, 10_000 + r).unwrap();
            let cfg = BootstrapConfig::new(20_000 + r);
            let a = pooled_instability_datasets(stack.completed(), &clusterer, &cfg).unwrap();
            suite.record("M-robustness", a.report.t);
            acc[0] += a.report.t;
            let (b_distinct, _) = between_instability(&a.partitions, BetweenNormalization::DistinctPairs).unwrap();
            acc[1] += a.report.u_bar + b_distinct;
        }
        means.insert(m, acc.map(|x| x / replicates as f64));
    }
    let gap = (means[&2][0] - means[&50][0]).abs();
    let gap_distinct = (means[&2][1] - means[&50][1]).abs();
    verdict(
        gap <= 0.05,
        format!(
            "mean T(M=2) = {:.4}, mean T(M=50) = {:.4}, gap {gap:.4} (limit 0.05); \
             with B over distinct pairs: {:.4} vs {:.4}, gap {gap_distinct:.4}",
            means[&2][0], means[&50][0], means[&2][1], means[&50][1]
        ),
    )
}

fn desk_cell(tau: f64, m: usize) -> CellResult {
    let grid = ExperimentGrid {
        n_values: vec![50],
        rho_values: vec![0.3],
        tau_values: vec![tau],
        m_values: vec![m],
        s_replicates: 50,
        ..ExperimentGrid::desk(2026)
    };
    let coords = CellCoords {
        n: 50,
        rho: 0.3,
        tau,
        mechanism: Mechanism::Mcar,
        imputer: Imputer::gaussian().id().to_string(),
        m,
    };
    run_cell(&coords, &grid).unwrap()
}

fn record_cell(suite: &mut Suite, c: &CellResult) {
    for r in &c.replicates {
        suite.record("desk cell", r.t);
        suite.record("desk cell full", r.full_t);
        if let Some(t) = r.cca_t {
            suite.record("desk cell cca", t);
        }
    }
}

fn mi_beats_si(suite: &mut Suite) -> Verdict {
    let desk = DeskCells {
        m1: desk_cell(0.5, 1),
        m20: desk_cell(0.5, 20),
        tau01_m20: desk_cell(0.1, 20),
    };
    for c in [&desk.m1, &desk.m20, &desk.tau01_m20] {
        record_cell(suite, c);
    }
    let (a1, a20) = (desk.m1.solvers[0].ari_mean, desk.m20.solvers[0].ari_mean);
    let v = verdict(
        a20 - a1 >= 0.10,
        format!(
            "mean ARI M=20 {a20:.4} vs M=1 {a1:.4}, gap {:.4} (need >= 0.10); full data {:.4}",
            a20 - a1,
            desk.m20.full_ari_mean
        ),
    );
    suite.desk = Some(desk);
    v
}

fn instability_ordering(suite: &mut Suite) -> Verdict {
    let desk = suite.desk.as_ref().expect("desk cells computed by the previous criterion");
    let (t_mi, t_full) = (desk.m20.t_mean, desk.m20.full_t_mean);
    let (b_lo, b_hi) = (desk.tau01_m20.b_mean, desk.m20.b_mean);
    verdict(
        t_mi > t_full && b_hi > b_lo,
        format!("mean T: MI {t_mi:.4} > full {t_full:.4}; mean B: tau=0.1 {b_lo:.4} < tau=0.5 {b_hi:.4}"),
    )
}

fn scalar_rubin(_: &mut Suite) -> Verdict {
    let e = ScalarEstimates::new(vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
    let plain = pool_variance(&e, false);
    let corrected = pool_variance(&e, true);
    let worked = (plain.t, plain.u_bar, plain.b) == (3.0, 1.0, 2.0) && corrected.t == 4.0;
    let mut rng = seed::rng(7);
    let mut in_range = 0;
    let trials = 1000;
    for _ in 0..trials {
        let m = rng.random_range(1..=20);
        let q = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let u = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
        let e = ScalarEstimates::new(q, u).unwrap();
        let ok = [false, true].iter().all(|&c| {
            let v = pool_variance(&e, c);
            let r = v.ratio();
            (0.0..=1.0).contains(&r) && v.t >= v.u_bar && v.b >= 0.0
        });
        in_range += usize::from(ok);
    }
    verdict(
        worked && in_range == trials,
        format!("(t, u_bar, b) = ({}, {}, {}), corrected t = {}; b/t in [0, 1] for {in_range}/{trials}", plain.t, plain.u_bar, plain.b, corrected.t),
    )
}

/// Pair counts by enumerating all unordered pairs `i < j`.
fn pair_counts(p: &[usize], q: &[usize]) -> (u64, u64, u64, u64) {
    let (mut both, mut only_p, mut only_q, mut pairs) = (0, 0, 0, 0);
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            pairs += 1;
            match (p[i] == p[j], q[i] == q[j]) {
                (true, true) => both += 1,
                (true, false) => only_p += 1,
                (false, true) => only_q += 1,
                (false, false) => {}
            }
        }
    }
    (both, only_p, only_q, pairs)
}

fn metric_oracles(_: &mut Suite) -> Verdict {
    let mut rng = seed::rng(8);
    let trials = 1000;
    let mut agree = 0;
    for _ in 0..trials {
        let n = rng.random_range(2..=12);
        let kp = rng.random_range(1..=5);
        let kq = rng.random_range(1..=5);
        let lp: Vec<usize> = (0..n).map(|_| rng.random_range(0..kp)).collect();
        let lq: Vec<usize> = (0..n).map(|_| rng.random_range(0..kq)).collect();
        let (p, q) = (Partition::new(lp.clone(), kp).unwrap(), Partition::new(lq.clone(), kq).unwrap());
        let (both, only_p, only_q, pairs) = pair_counts(&lp, &lq);
        // Ordered pairs on which the two relations disagree.
        let mirkin = 2 * (only_p + only_q);
        let dis = mirkin as f64 / (n * n) as f64;
        let (a, sp, sq, total) = (both as f64, (both + only_p) as f64, (both + only_q) as f64, pairs as f64);
        let expected = sp * sq / total;
        let max = 0.5 * (sp + sq);
        let ari = if max - expected == 0.0 {
            if mirkin == 0 { 1.0 } else { 0.0 }
        } else {
            (a - expected) / (max - expected)
        };
        let ok = mirkin_distance(&p, &q).unwrap() == mirkin
            && disagreement(&p, &q).unwrap().to_bits() == dis.to_bits()
            && adjusted_rand_index(&p, &q).unwrap().to_bits() == ari.to_bits();
        agree += usize::from(ok);
    }
    verdict(agree == trials, format!("{agree}/{trials} random pairs (n <= 12) match the pair-enumeration oracles exactly"))
}

fn run_cli(args: &[&str], cwd: &Path) -> (bool, String) {
    let out = Command::new(BIN).args(args).current_dir(cwd).output().expect("spawn CLI");
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr))
}

fn animals_choose_k(suite: &mut Suite) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (ok, log) = run_cli(
        &[
            "choose-k", "--input", "@animals", "--k-range", "2..5", "--m", "50", "--imputer", "hotdeck", "--method", "hclust",
            "--seed", "4", "--out", "out",
        ],
        dir.path(),
    );
    let elapsed = start.elapsed();
    if !ok {
        return verdict(false, format!("choose-k failed: {log}"));
    }
    let table = std::fs::read_to_string(dir.path().join("out/choose_k.csv")).unwrap();
    let ts: Vec<(usize, f64)> = table
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    for &(_, t) in &ts {
        suite.record("animals choose-k", t);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/choose_k.json")).unwrap()).unwrap();
    let rec = summary["recommended_k"].as_u64();
    let pass = ts.len() == 4 && ts.iter().all(|&(_, t)| (0.0..=2.0).contains(&t)) && rec.is_some() && elapsed < Duration::from_secs(120);
    let listing: Vec<String> = ts.iter().map(|(k, t)| format!("T({k}) = {t:.4}")).collect();
    verdict(pass, format!("{}; recommended K = {}; {:.1}s", listing.join(", "), rec.unwrap_or(0), elapsed.as_secs_f64()))
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn cli_determinism(_: &mut Suite) -> Verdict {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let data = generate_mixture(&MixtureSpec::new(30, 0.3), 9).unwrap().data;
    data.save_csv(&w.join("data.csv")).unwrap();
    let ampute_args = ["ampute", "--input", "data.csv", "--tau", "0.2", "--seed", "5", "--out", "setup_amp"];
    let (ok, log) = run_cli(&ampute_args, w);
    assert!(ok, "{log}");
    let (ok, log) = run_cli(&["impute", "--input", "setup_amp/incomplete.csv", "--m", "4", "--seed", "5", "--out", "setup_stack"], w);
    assert!(ok, "{log}");
    let (ok, log) = run_cli(&["cluster", "--stack", "setup_stack", "--k", "2", "--seed", "5", "--out", "setup_parts"], w);
    assert!(ok, "{log}");
    std::fs::write(
        w.join("grid.json"),
        r#"{"n_values":[20],"rho_values":[0.3],"tau_values":[0.2],"m_values":[2],"s_replicates":2,"c_pairs":3,
            "clusterer":{"method":"kmeans","k":2,"n_init":5},"solvers":["nmf","saom"],"base_seed":3}"#,
    )
    .unwrap();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("ampute", ampute_args[..7].to_vec()),
        ("ampute mar", vec!["ampute", "--input", "data.csv", "--mechanism", "mar", "--tau", "0.3", "--seed", "5"]),
        ("impute gaussian", vec!["impute", "--input", "setup_amp/incomplete.csv", "--m", "4", "--seed", "5"]),
        ("impute hotdeck", vec!["impute", "--input", "@animals", "--imputer", "hotdeck", "--m", "3", "--seed", "5"]),
        ("cluster kmeans", vec!["cluster", "--input", "data.csv", "--k", "3", "--seed", "5"]),
        ("cluster stack", vec!["cluster", "--stack", "setup_stack", "--k", "2", "--method", "hclust", "--seed", "5"]),
        ("consensus nmf", vec!["consensus", "--partitions", "setup_parts/partitions.csv", "--solver", "nmf", "--seed", "5"]),
        ("consensus saom", vec!["consensus", "--partitions", "setup_parts/partitions.csv", "--solver", "saom", "--seed", "5"]),
        ("instability", vec!["instability", "--stack", "setup_stack", "--k", "2", "--c-pairs", "5", "--seed", "5"]),
        (
            "pipeline",
            vec!["pipeline", "--input", "setup_amp/incomplete.csv", "--m", "3", "--k", "2", "--c-pairs", "5", "--seed", "5"],
        ),
        (
            "choose-k",
            vec!["choose-k", "--input", "@animals", "--imputer", "hotdeck", "--method", "hclust", "--m", "5", "--seed", "5"],
        ),
        ("simulate", vec!["simulate", "--config", "grid.json"]),
        ("rubin pool", vec!["rubin", "pool", "--q", "0,2", "--u", "1,1"]),
    ];
    let mut differing = Vec::new();
    for (name, args) in &commands {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = format!("run{rep}_{}", name.replace(' ', "_"));
            let mut full: Vec<&str> = args.clone();
            full.extend(["--out", out.as_str()]);
            let (ok, log) = run_cli(&full, w);
            if !ok {
                return verdict(false, format!("{name} failed: {log}"));
            }
            runs.push((log, read_tree(&w.join(&out))));
        }
        if runs[0] != runs[1] || runs[0].1.is_empty() {
            differing.push(*name);
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} commands rerun with the same seed; differing outputs: {:?}", commands.len(), differing),
    )
}

type Criterion = (u8, &'static str, fn(&mut Suite) -> Verdict);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "consensus solvers vs exact optimum", consensus_vs_exact),
        (2, "no-missing equivalence", no_missing_equivalence),
        (4, "M-robustness of instability", m_robustness),
        (5, "MI beats single imputation", mi_beats_si),
        (6, "instability ordering", instability_ordering),
        (7, "scalar Rubin's rules", scalar_rubin),
        (8, "metric oracles", metric_oracles),
        (9, "animals choose-k", animals_choose_k),
        (10, "CLI determinism", cli_determinism),
        // Last, so that it sees every T computed above.
        (3, "bounds and degenerate cases", bounds_and_degenerate),
    ];
    // Optional criterion numbers on the command line select a subset.
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut suite = Suite::default();
    let mut lines = BTreeMap::new();
    for (id, name, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(|| check(&mut suite))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let line = format!(
            "criterion {id:>2} {} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        eprintln!("{line}");
        lines.insert(id, (v.pass, line));
    }
    println!();
    for (_, line) in lines.values() {
        println!("{line}");
    }
    let passed = lines.values().filter(|(p, _)| *p).count();
    println!("acceptance: {passed}/{} criteria pass", lines.len());
    if passed < lines.len() && std::env::var("MICLUST_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
