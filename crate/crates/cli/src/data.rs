use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use silofair::scenario::Margins;
use silofair::{Dataset, DatasetSpec, Error, Regime, Result};

/// Default directory for relative `--data` paths.
pub const DATA_DIR_ENV: &str = "SILOFAIR_DATA_DIR";

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Score CSV; relative paths that do not exist are looked up in `$SILOFAIR_DATA_DIR`.
    #[arg(long, required_unless_present = "synthetic")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "decile_score")]
    pub score_column: String,
    #[arg(long, default_value = "race")]
    pub group_column: String,
    /// Comma-separated groups to keep; all groups when omitted.
    #[arg(long, value_delimiter = ',')]
    pub groups: Vec<String>,
    /// Replace each score `z` by `z - U`, `U ~ Uniform(0, 1)`, seeded by `--seed`.
    #[arg(long)]
    pub jitter: bool,
    /// Use the built-in jittered decile generator instead of a file.
    #[arg(long, conflicts_with = "data")]
    pub synthetic: bool,
}

pub fn resolve(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            return PathBuf::from(dir).join(path);
        }
    }
    path.to_path_buf()
}

impl DataArgs {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        if self.synthetic {
            return Dataset::synthetic_deciles(seed);
        }
        let path = self.data.as_deref().ok_or_else(|| Error::InvalidParameter("no --data given".into()))?;
        Dataset::load(&DatasetSpec {
            path: resolve(path),
            score_column: self.score_column.clone(),
            group_column: self.group_column.clone(),
            whitelist: self.groups.clone(),
            jitter: self.jitter,
            jitter_seed: seed,
        })
    }
}

fn malformed(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::MalformedInput(format!("{}: {e}", path.display()))
}

/// Reads `row_id,silo` rows; every dataset row must appear exactly once.
pub fn read_assignment(path: &Path, n: usize) -> Result<(Vec<usize>, usize)> {
    #[derive(Deserialize)]
    struct Row {
        row_id: usize,
        silo: usize,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(path, e))?;
    let mut silo_of: Vec<Option<usize>> = vec![None; n];
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| malformed(path, e))?;
        let slot = silo_of
            .get_mut(row.row_id)
            .ok_or_else(|| Error::LengthMismatch(format!("row id {} but the dataset has {n} rows", row.row_id)))?;
        if slot.replace(row.silo).is_some() {
            return Err(Error::LengthMismatch(format!("row id {} assigned twice", row.row_id)));
        }
    }
    let assignment = silo_of
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::LengthMismatch(format!("row id {i} has no silo"))))
        .collect::<Result<Vec<_>>>()?;
    let d = assignment.iter().max().map_or(0, |m| m + 1);
    Ok((assignment, d))
}

pub fn write_assignment<W: std::io::Write>(assignment: &[usize], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["row_id", "silo"]).map_err(io)?;
    for (i, s) in assignment.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Scenario file, e.g.
///
/// ```toml
/// regime = "positive"
/// rho = 0.8
/// d = 5
/// seed = 7
/// margins = "random"   # or a CSV with a `silo` column and one column per group
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub regime: String,
    #[serde(default)]
    pub rho: f64,
    pub d: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_margins")]
    pub margins: String,
}

fn default_margins() -> String {
    "random".into()
}

impl ScenarioConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| malformed(path, e))
    }

    pub fn regime(&self) -> Result<Regime> {
        self.regime.parse()
    }

    /// `None` for a random baseline, else the table read from the margins file.
    pub fn margins(&self, base: &Path, labels: &[String]) -> Result<Option<Margins>> {
        if self.margins.eq_ignore_ascii_case("random") {
            return Ok(None);
        }
        let path = base.join(&self.margins);
        read_margins(&path, labels, self.d).map(Some)
    }
}

/// Reads a `silo,<group>,...` table into `margins[silo][group]`.
pub fn read_margins(path: &Path, labels: &[String], d: usize) -> Result<Margins> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(path, e))?;
    let headers = reader.headers().map_err(|e| malformed(path, e))?.clone();
    let columns: BTreeMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let silo_col = *columns.get("silo").ok_or_else(|| malformed(path, "missing column \"silo\""))?;
    let group_cols = labels
        .iter()
        .map(|l| {
            columns
                .get(l.as_str())
                .copied()
                .ok_or_else(|| Error::MarginMismatch(format!("margins file has no column for group {l:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = vec![None; d];
    for record in reader.records() {
        let record = record.map_err(|e| malformed(path, e))?;
        let int = |i: usize| -> Result<u64> {
            let raw = record.get(i).unwrap_or("").trim();
            raw.parse().map_err(|_| malformed(path, format!("{raw:?} is not a count")))
        };
        let silo = int(silo_col)? as usize;
        let row = group_cols.iter().map(|&c| int(c)).collect::<Result<Vec<_>>>()?;
        let slot = table
            .get_mut(silo)
            .ok_or_else(|| Error::MarginMismatch(format!("silo {silo} outside 0..{d}")))?;
        *slot = Some(row);
    }
    table
        .into_iter()
        .enumerate()
        .map(|(j, r)| r.ok_or_else(|| Error::MarginMismatch(format!("no margins for silo {j}"))))
        .collect()
}
