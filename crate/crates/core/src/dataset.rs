//! Complete and incomplete numeric tables plus their CSV encoding.
//!
//! CSV files carry a header row. A leading column whose cells are not all
//! numeric (or whose header is empty) is kept as row identifiers. Missing
//! cells are written as `NA` and read from either `NA` or an empty field.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
}

/// Fully observed `n × p` table, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
    kinds: Vec<ColumnKind>,
    names: Vec<String>,
    row_ids: Option<Vec<String>>,
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn detect_kinds(n: usize, p: usize, values: &[f64]) -> Vec<ColumnKind> {
    (0..p)
        .map(|j| {
            let binary = (0..n)
                .map(|i| values[i * p + j])
                .filter(|v| !v.is_nan())
                .all(|v| v == 0.0 || v == 1.0);
            if binary {
                ColumnKind::Binary
            } else {
                ColumnKind::Continuous
            }
        })
        .collect()
}

impl Dataset {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Data("ragged rows".into()));
        }
        Self::from_flat(n, p, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Data(format!("dataset must be non-empty, got {n}x{p}")));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("complete dataset contains missing or non-finite cells".into()));
        }
        let kinds = detect_kinds(n, p, &values);
        Ok(Self {
            n,
            p,
            values,
            kinds,
            names: default_names(p),
            row_ids: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    pub fn with_row_ids(mut self, ids: Option<Vec<String>>) -> Result<Self> {
        if let Some(ids) = &ids {
            if ids.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    actual: ids.len(),
                });
            }
        }
        self.row_ids = ids;
        Ok(self)
    }

    pub fn with_kinds(mut self, kinds: Vec<ColumnKind>) -> Result<Self> {
        if kinds.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: kinds.len(),
            });
        }
        self.kinds = kinds;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.p)
    }

    /// New dataset made of the given rows (repetitions allowed).
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            n: idx.len(),
            p: self.p,
            values,
            kinds: self.kinds.clone(),
            names: self.names.clone(),
            row_ids: self
                .row_ids
                .as_ref()
                .map(|ids| idx.iter().map(|&i| ids[i].clone()).collect()),
        }
    }

    /// Number of distinct rows (bitwise comparison).
    pub fn distinct_rows(&self) -> usize {
        let mut keys: Vec<Vec<u64>> = self
            .rows()
            .map(|r| r.iter().map(|v| v.to_bits()).collect())
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }

    pub fn to_incomplete(&self) -> IncompleteDataset {
        IncompleteDataset {
            n: self.n,
            p: self.p,
            values: self.values.clone(),
            mask: vec![false; self.n * self.p],
            kinds: self.kinds.clone(),
            names: self.names.clone(),
            row_ids: self.row_ids.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_table(w, &self.names, self.row_ids.as_deref(), self.n, self.p, |i, j| {
            Some(self.get(i, j))
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        IncompleteDataset::read_csv(r)?.into_complete()
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// `n × p` table with a missingness mask (`true` = missing).
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteDataset {
    n: usize,
    p: usize,
    /// Missing cells hold NaN.
    values: Vec<f64>,
    mask: Vec<bool>,
    kinds: Vec<ColumnKind>,
    names: Vec<String>,
    row_ids: Option<Vec<String>>,
}

impl IncompleteDataset {
    /// Masks the cells of `d` flagged in `mask` (row-major, `n·p` long).
    pub fn from_mask(d: &Dataset, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != d.n * d.p {
            return Err(Error::DimensionMismatch {
                expected: d.n * d.p,
                actual: mask.len(),
            });
        }
        let values = d
            .values
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { f64::NAN } else { v })
            .collect();
        let inc = Self {
            n: d.n,
            p: d.p,
            values,
            mask,
            kinds: d.kinds.clone(),
            names: d.names.clone(),
            row_ids: d.row_ids.clone(),
        };
        inc.validate()?;
        Ok(inc)
    }

    /// Rows with `None` for missing cells.
    pub fn from_options(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if n == 0 || p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(Error::Data("incomplete dataset must be a non-empty rectangle".into()));
        }
        let cells: Vec<Option<f64>> = rows.into_iter().flatten().collect();
        let mask: Vec<bool> = cells.iter().map(|c| c.is_none()).collect();
        let values: Vec<f64> = cells.iter().map(|c| c.unwrap_or(f64::NAN)).collect();
        let kinds = detect_kinds(n, p, &values);
        let inc = Self {
            n,
            p,
            values,
            mask,
            kinds,
            names: default_names(p),
            row_ids: None,
        };
        inc.validate()?;
        Ok(inc)
    }

    fn validate(&self) -> Result<()> {
        if self.values.iter().zip(&self.mask).any(|(v, &m)| !m && !v.is_finite()) {
            return Err(Error::Data("observed cell is not finite".into()));
        }
        if let Some(j) = (0..self.p).find(|&j| (0..self.n).all(|i| self.is_missing(i, j))) {
            return Err(Error::Data(format!("column {} is entirely missing", self.names[j])));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.p + j]
    }

    /// Observed value, or `None` when missing.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (!self.is_missing(i, j)).then(|| self.values[i * self.p + j])
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn row_mask(&self, i: usize) -> &[bool] {
        &self.mask[i * self.p..(i + 1) * self.p]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        self.missing_count() as f64 / (self.n * self.p) as f64
    }

    pub fn with_kinds(mut self, kinds: Vec<ColumnKind>) -> Result<Self> {
        if kinds.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: kinds.len(),
            });
        }
        self.kinds = kinds;
        Ok(self)
    }

    /// Completed copy using `fill(i, j)` for every missing cell.
    pub fn complete_with(&self, mut fill: impl FnMut(usize, usize) -> f64) -> Result<Dataset> {
        let mut values = self.values.clone();
        for i in 0..self.n {
            for j in 0..self.p {
                if self.is_missing(i, j) {
                    values[i * self.p + j] = fill(i, j);
                }
            }
        }
        let d = Dataset {
            n: self.n,
            p: self.p,
            values,
            kinds: self.kinds.clone(),
            names: self.names.clone(),
            row_ids: self.row_ids.clone(),
        };
        if d.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("imputed value is not finite".into()));
        }
        Ok(d)
    }

    /// Fails unless no cell is missing.
    pub fn into_complete(self) -> Result<Dataset> {
        if self.missing_count() > 0 {
            return Err(Error::Data(format!(
                "expected complete data, found {} missing cells",
                self.missing_count()
            )));
        }
        Ok(Dataset {
            n: self.n,
            p: self.p,
            values: self.values,
            kinds: self.kinds,
            names: self.names,
            row_ids: self.row_ids,
        })
    }

    /// Rows with no missing cell, plus their original indices.
    pub fn complete_rows(&self) -> (Vec<usize>, Vec<f64>) {
        let idx: Vec<usize> = (0..self.n)
            .filter(|&i| !self.row_mask(i).iter().any(|&m| m))
            .collect();
        let values = idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        (idx, values)
    }

    pub(crate) fn subset_dataset(&self, idx: &[usize], values: Vec<f64>) -> Result<Dataset> {
        let d = Dataset::from_flat(idx.len(), self.p, values)?
            .with_names(self.names.clone())?
            .with_kinds(self.kinds.clone())?;
        d.with_row_ids(
            self.row_ids
                .as_ref()
                .map(|ids| idx.iter().map(|&i| ids[i].clone()).collect()),
        )
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_table(w, &self.names, self.row_ids.as_deref(), self.n, self.p, |i, j| {
            self.get(i, j)
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
        if records.is_empty() {
            return Err(Error::Data("csv has no data rows".into()));
        }
        let is_missing = |s: &str| s.is_empty() || s.eq_ignore_ascii_case("na");
        let first_is_ids = header.first().is_some_and(|h| h.is_empty())
            || records.iter().any(|r| {
                r.get(0)
                    .is_some_and(|s| !is_missing(s) && s.parse::<f64>().is_err())
            });
        let offset = usize::from(first_is_ids);
        let p = header.len().saturating_sub(offset);
        if p == 0 {
            return Err(Error::Data("csv has no value columns".into()));
        }
        let mut rows = Vec::with_capacity(records.len());
        let mut ids = Vec::new();
        for (line, rec) in records.iter().enumerate() {
            if rec.len() != header.len() {
                return Err(Error::Data(format!(
                    "row {} has {} fields, header has {}",
                    line + 2,
                    rec.len(),
                    header.len()
                )));
            }
            if first_is_ids {
                ids.push(rec[0].to_string());
            }
            let row = rec
                .iter()
                .skip(offset)
                .enumerate()
                .map(|(j, s)| {
                    if is_missing(s) {
                        Ok(None)
                    } else {
                        s.parse::<f64>().map(Some).map_err(|_| {
                            Error::Data(format!(
                                "row {}, column {:?}: cannot parse {s:?}",
                                line + 2,
                                header[j + offset]
                            ))
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let mut inc = Self::from_options(rows)?;
        inc.names = header[offset..].to_vec();
        inc.row_ids = first_is_ids.then_some(ids);
        Ok(inc)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn write_table<W: Write>(
    w: W,
    names: &[String],
    row_ids: Option<&[String]>,
    n: usize,
    p: usize,
    cell: impl Fn(usize, usize) -> Option<f64>,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut head: Vec<&str> = Vec::with_capacity(p + 1);
    if row_ids.is_some() {
        head.push("");
    }
    head.extend(names.iter().map(String::as_str));
    wr.write_record(&head)?;
    for i in 0..n {
        let mut rec: Vec<String> = Vec::with_capacity(p + 1);
        if let Some(ids) = row_ids {
            rec.push(ids[i].clone());
        }
        rec.extend((0..p).map(|j| cell(i, j).map_or_else(|| "NA".to_string(), fmt_value)));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
