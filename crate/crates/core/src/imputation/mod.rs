//! Missing-data machinery: amputation (MCAR / MAR masks) and multiple
//! imputation into an [`ImputationStack`].

mod amputation;
mod gaussian;
mod hotdeck;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use amputation::{ampute, ampute_mar, ampute_mcar, mar_intercept, std_normal_cdf, Mechanism};
pub use gaussian::GaussianConfig;

pub use crate::dataset::IncompleteDataset;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seed::{self, STREAM_IMPUTE};

/// Default number of imputed copies.
pub const DEFAULT_M: usize = 50;

/// Imputation procedure. Every copy is produced from its own derived seed,
/// so the stack does not depend on the order copies are generated in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "imputer", rename_all = "lowercase")]
pub enum Imputer {
    /// Bootstrap, multivariate-normal moments, conditional Gaussian draws.
    Gaussian(GaussianConfig),
    /// Bayesian-bootstrap hot deck for categorical columns.
    Hotdeck,
}

impl Imputer {
    pub fn gaussian() -> Self {
        Imputer::Gaussian(GaussianConfig::default())
    }

    pub fn id(&self) -> &'static str {
        match self {
            Imputer::Gaussian(_) => "gaussian",
            Imputer::Hotdeck => "hotdeck",
        }
    }

    /// `m` completed copies of `inc`.
    pub fn impute(&self, inc: &IncompleteDataset, m: usize, seed: u64, execution: Execution) -> Result<ImputationStack> {
        if m == 0 {
            return Err(Error::Config("number of imputations must be at least 1".into()));
        }
        if let Imputer::Gaussian(_) = self {
            gaussian::check_continuous(inc)?;
        }
        let seeds: Vec<u64> = (0..m).map(|c| seed::derive(seed, &[STREAM_IMPUTE, c as u64])).collect();
        let completed = execution.try_map(m, |c| {
            let copy = if inc.missing_count() == 0 {
                inc.complete_with(|_, _| unreachable!("no missing cell"))
            } else {
                match self {
                    Imputer::Gaussian(cfg) => gaussian::impute_one(inc, cfg, seeds[c]),
                    Imputer::Hotdeck => hotdeck::impute_one(inc, seeds[c]),
                }
            };
            copy.map_err(|e| Error::ImputedCopy {
                copy: c,
                source: Box::new(e),
            })
        })?;
        Ok(ImputationStack {
            completed,
            imputer_id: self.id().to_string(),
            source_mask: inc.mask().to_vec(),
            seeds,
        })
    }
}

impl std::str::FromStr for Imputer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Imputer::gaussian()),
            "hotdeck" => Ok(Imputer::Hotdeck),
            other => Err(Error::Config(format!("unknown imputer {other:?} (expected gaussian or hotdeck)"))),
        }
    }
}

pub fn impute_gaussian(inc: &IncompleteDataset, m: usize, seed: u64) -> Result<ImputationStack> {
    Imputer::gaussian().impute(inc, m, seed, Execution::default())
}

pub fn impute_hotdeck(inc: &IncompleteDataset, m: usize, seed: u64) -> Result<ImputationStack> {
    Imputer::Hotdeck.impute(inc, m, seed, Execution::default())
}

/// The `M` completed copies of one incomplete dataset, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationStack {
    completed: Vec<Dataset>,
    imputer_id: String,
    source_mask: Vec<bool>,
    seeds: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StackManifest {
    imputer: String,
    m: usize,
    n: usize,
    p: usize,
    mask_sha256: String,
    /// `[row, column]` of every missing cell, zero-based.
    missing_cells: Vec<[usize; 2]>,
    seeds: Vec<u64>,
    files: Vec<String>,
}

impl ImputationStack {
    pub fn completed(&self) -> &[Dataset] {
        &self.completed
    }

    pub fn m(&self) -> usize {
        self.completed.len()
    }

    pub fn imputer_id(&self) -> &str {
        &self.imputer_id
    }

    pub fn source_mask(&self) -> &[bool] {
        &self.source_mask
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    /// Hex SHA-256 of the mask, one byte (0/1) per cell in row-major order.
    pub fn mask_digest(&self) -> String {
        mask_digest(&self.source_mask)
    }

    /// Writes `imputed_001.csv`, ... and `stack.json` into `dir`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.m());
        for (c, d) in self.completed.iter().enumerate() {
            let name = format!("imputed_{:03}.csv", c + 1);
            d.save_csv(&dir.join(&name))?;
            files.push(name);
        }
        let first = &self.completed[0];
        let manifest = StackManifest {
            imputer: self.imputer_id.clone(),
            m: self.m(),
            n: first.n(),
            p: first.p(),
            mask_sha256: self.mask_digest(),
            missing_cells: (0..self.source_mask.len())
                .filter(|&c| self.source_mask[c])
                .map(|c| [c / first.p(), c % first.p()])
                .collect(),
            seeds: self.seeds.clone(),
            files,
        };
        std::fs::write(dir.join("stack.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    /// Reads a directory written by [`save_dir`](Self::save_dir).
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let manifest: StackManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("stack.json"))?)?;
        let completed = manifest
            .files
            .iter()
            .map(|f| Dataset::load_csv(&dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        if completed.is_empty() || completed.iter().any(|d| d.n() != manifest.n || d.p() != manifest.p) {
            return Err(Error::Data("stack files do not match their manifest".into()));
        }
        let (n, p) = (manifest.n, manifest.p);
        let mut source_mask = vec![false; n * p];
        for &[i, j] in &manifest.missing_cells {
            if i >= n || j >= p {
                return Err(Error::Data(format!("missing cell ({i}, {j}) outside the {n} x {p} table")));
            }
            source_mask[i * p + j] = true;
        }
        if mask_digest(&source_mask) != manifest.mask_sha256 {
            return Err(Error::Data("stack mask does not match its recorded digest".into()));
        }
        Ok(Self {
            completed,
            imputer_id: manifest.imputer,
            source_mask,
            seeds: manifest.seeds,
        })
    }
}

pub fn mask_digest(mask: &[bool]) -> String {
    let bytes: Vec<u8> = mask.iter().map(|&m| m as u8).collect();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
