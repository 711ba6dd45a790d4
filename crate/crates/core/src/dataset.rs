//! Score datasets read from CSV, plus synthetic two-group generators.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::central::GroupedSample;
use crate::error::{Error, Result};
use crate::scenario::rng::{derive_seed, stream};
use crate::scenario::sample_beta;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub score_column: String,
    pub group_column: String,
    /// Groups to keep; empty keeps every group.
    #[serde(default)]
    pub whitelist: Vec<String>,
    /// Replace each score `z` by `z - U` with `U ~ Uniform(0, 1)`.
    #[serde(default)]
    pub jitter: bool,
    #[serde(default)]
    pub jitter_seed: u64,
}

/// Scores with a group index per row; `labels[g]` names group `g`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scores: Vec<f64>,
    pub groups: Vec<usize>,
    pub labels: Vec<String>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<(String, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dataset("no rows".into()));
        }
        let mut labels: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
        labels.sort();
        labels.dedup();
        let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let groups = rows.iter().map(|r| index[r.0.as_str()]).collect();
        let scores = rows.iter().map(|r| r.1).collect();
        Ok(Self { scores, groups, labels })
    }

    pub fn load(spec: &DatasetSpec) -> Result<Self> {
        let file = std::fs::File::open(&spec.path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", spec.path.display()))))?;
        Self::read(file, spec)
    }

    /// Reads a headed CSV, keeps whitelisted groups and optionally jitters.
    pub fn read<R: Read>(reader: R, spec: &DatasetSpec) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
        let headers = csv.headers().map_err(|e| Error::MalformedInput(e.to_string()))?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Dataset(format!("missing column {name:?}")))
        };
        let (zi, gi) = (column(&spec.score_column)?, column(&spec.group_column)?);
        let mut rows = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (line, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::MalformedInput(e.to_string()))?;
            let group = record.get(gi).unwrap_or("").trim().to_string();
            if !spec.whitelist.is_empty() && !spec.whitelist.contains(&group) {
                continue;
            }
            let raw = record.get(zi).unwrap_or("").trim();
            let z: f64 = raw.parse().map_err(|_| {
                Error::MalformedInput(format!("row {}: score {raw:?} is not a number", line + 2))
            })?;
            if !z.is_finite() {
                return Err(Error::MalformedInput(format!("row {}: non-finite score", line + 2)));
            }
            seen.insert(group.clone());
            rows.push((group, z));
        }
        if let Some(missing) = spec.whitelist.iter().find(|w| !seen.contains(*w)) {
            return Err(Error::Dataset(format!("group {missing:?} does not occur in the data")));
        }
        if rows.is_empty() {
            return Err(Error::Dataset("no rows left after filtering".into()));
        }
        let mut ds = Self::from_rows(rows)?;
        if spec.jitter {
            ds.jitter(spec.jitter_seed);
        }
        Ok(ds)
    }

    /// `z <- z - U`, one uniform per row in file order.
    pub fn jitter(&mut self, seed: u64) {
        let mut rng = stream(derive_seed(seed, "jitter", &[]));
        for z in &mut self.scores {
            *z -= rng.random::<f64>();
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_groups(&self) -> usize {
        self.labels.len()
    }

    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> = self.labels.iter().map(|l| (l.clone(), 0)).collect();
        for &g in &self.groups {
            *counts.get_mut(&self.labels[g]).expect("known label") += 1;
        }
        counts
    }

    pub fn by_group(&self) -> BTreeMap<String, Vec<f64>> {
        let mut out: BTreeMap<String, Vec<f64>> = self.labels.iter().map(|l| (l.clone(), Vec::new())).collect();
        for (&z, &g) in self.scores.iter().zip(&self.groups) {
            out.get_mut(&self.labels[g]).expect("known label").push(z);
        }
        out
    }

    pub fn grouped_sample(&self) -> Result<GroupedSample> {
        GroupedSample::new(self.by_group())
    }

    /// Per-silo group scores for an assignment with silo indices in `0..d`.
    pub fn split(&self, assignment: &[usize], d: usize) -> Result<Vec<BTreeMap<String, Vec<f64>>>> {
        if assignment.len() != self.len() {
            return Err(Error::LengthMismatch(format!(
                "{} assignments for {} rows",
                assignment.len(),
                self.len()
            )));
        }
        let mut silos = vec![BTreeMap::<String, Vec<f64>>::new(); d];
        for ((&z, &g), &s) in self.scores.iter().zip(&self.groups).zip(assignment) {
            let silo = silos
                .get_mut(s)
                .ok_or_else(|| Error::InvalidParameter(format!("silo index {s} outside 0..{d}")))?;
            silo.entry(self.labels[g].clone()).or_default().push(z);
        }
        Ok(silos)
    }

    /// Two Beta-distributed groups of the given sizes.
    pub fn synthetic_beta(groups: &[(&str, usize, f64, f64)], seed: u64) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, &(label, n, a, b)) in groups.iter().enumerate() {
            let draws = sample_beta(a, b, n, derive_seed(seed, "synthetic", &[i as u64]))?;
            rows.extend(draws.into_iter().map(|z| (label.to_string(), z)));
        }
        Self::from_rows(rows)
    }

    /// Jittered decile scores `ceil(10 B) - U` with `B` Beta-distributed per
    /// group, sized like a two-group recidivism cohort.
    pub fn synthetic_deciles(seed: u64) -> Result<Self> {
        let mut ds = Self::synthetic_beta(&[("A", 3696, 1.6, 1.4), ("B", 2454, 1.0, 2.2)], seed)?;
        for z in &mut ds.scores {
            *z = (*z * 10.0).ceil().clamp(1.0, 10.0);
        }
        ds.jitter(derive_seed(seed, "decile-jitter", &[]));
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(whitelist: &[&str], jitter: bool) -> DatasetSpec {
        DatasetSpec {
            path: PathBuf::new(),
            score_column: "score".into(),
            group_column: "race".into(),
            whitelist: whitelist.iter().map(|s| s.to_string()).collect(),
            jitter,
            jitter_seed: 5,
        }
    }

    const CSV: &str = "id,race,score\n1,A,3\n2,B,7\n3,C,1\n4,A,10\n";

    #[test]
    fn filter_and_count() {
        let ds = Dataset::read(CSV.as_bytes(), &spec(&["A", "B"], false)).unwrap();
        assert_eq!(ds.labels, vec!["A", "B"]);
        assert_eq!(ds.scores, vec![3.0, 7.0, 10.0]);
        assert_eq!(ds.counts()["A"], 2);
        let all = Dataset::read(CSV.as_bytes(), &spec(&[], false)).unwrap();
        assert_eq!(all.n_groups(), 3);
    }

    #[test]
    fn jitter_is_seeded() {
        let a = Dataset::read(CSV.as_bytes(), &spec(&["A", "B"], true)).unwrap();
        let b = Dataset::read(CSV.as_bytes(), &spec(&["A", "B"], true)).unwrap();
        assert_eq!(a, b);
        for (z, raw) in a.scores.iter().zip([3.0, 7.0, 10.0]) {
            assert!(*z <= raw && *z > raw - 1.0);
        }
    }

    #[test]
    fn read_errors() {
        let code = |text: &str, s: DatasetSpec| Dataset::read(text.as_bytes(), &s).unwrap_err().code();
        assert_eq!(code("id,race\n1,A\n", spec(&[], false)), "dataset");
        assert_eq!(code(CSV, spec(&["Z"], false)), "dataset");
        assert_eq!(code("race,score\nA,x\n", spec(&[], false)), "malformed-input");
        assert_eq!(code("race,score\nA,1,2\n", spec(&[], false)), "malformed-input");
        assert_eq!(code("race,score\n", spec(&[], false)), "dataset");
    }

    #[test]
    fn split_partitions_rows() {
        let ds = Dataset::read(CSV.as_bytes(), &spec(&[], false)).unwrap();
        let silos = ds.split(&[0, 1, 1, 0], 2).unwrap();
        assert_eq!(silos[0]["A"], vec![3.0, 10.0]);
        assert_eq!(silos[1]["B"], vec![7.0]);
        assert!(!silos[0].contains_key("B"));
        assert!(ds.split(&[0, 2, 0, 0], 2).is_err());
    }

    #[test]
    fn synthetic_deciles_shape() {
        let ds = Dataset::synthetic_deciles(1).unwrap();
        assert_eq!(ds.counts()["A"], 3696);
        assert_eq!(ds.counts()["B"], 2454);
        assert!(ds.scores.iter().all(|&z| (0.0..10.0).contains(&z)));
    }
}
