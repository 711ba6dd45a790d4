//! The one-shot federated audit.
//!
//! Silos call [`client_summarize`] on their local scores and ship the
//! resulting [`SiloMessage`]. The server runs [`server_audit`] on all messages:
//! it mixes the silo sketches of each group into a group-level step-CDF,
//! inverts the mixtures on the grid, and compares the resulting curves
//! against their barycenter (`G_p`) and their pooled mixture (`H_p`).

mod wire;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::central::{grid_disparity, pooled_heterogeneity};
use crate::distances::{grid_cost, pointwise_barycenter};
use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, Power};
use crate::par::Execution;
use crate::sketch::{build_sketch, mixture_step_cdf, quantiles_on_grid, GridSpec, QuantileSketch, StepCdf};

pub use wire::{decode_message, encode_message, from_json, to_json, MAGIC};

/// Count and sketch for one group inside a silo message.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupEntry {
    pub label: String,
    pub sketch: QuantileSketch,
}

impl GroupEntry {
    pub fn count(&self) -> u64 {
        self.sketch.count()
    }
}

/// One silo's release: a count and a quantile sketch per locally present group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "wire::MessageDoc", into = "wire::MessageDoc")]
pub struct SiloMessage {
    silo_id: String,
    grid: GridSpec,
    groups: Vec<GroupEntry>,
}

impl SiloMessage {
    /// Validates that labels are unique and every sketch uses `grid`.
    /// Entries are stored sorted by label.
    pub fn new(silo_id: impl Into<String>, grid: GridSpec, mut groups: Vec<GroupEntry>) -> Result<Self> {
        groups.sort_by(|a, b| a.label.cmp(&b.label));
        for pair in groups.windows(2) {
            if pair[0].label == pair[1].label {
                return Err(Error::DuplicateGroup(pair[0].label.clone()));
            }
        }
        for entry in &groups {
            grid.ensure_same(entry.sketch.grid())?;
        }
        Ok(Self {
            silo_id: silo_id.into(),
            grid,
            groups,
        })
    }

    pub fn silo_id(&self) -> &str {
        &self.silo_id
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn groups(&self) -> &[GroupEntry] {
        &self.groups
    }

    pub fn group(&self, label: &str) -> Option<&GroupEntry> {
        self.groups
            .binary_search_by(|e| e.label.as_str().cmp(label))
            .ok()
            .map(|i| &self.groups[i])
    }

    pub fn total_count(&self) -> u64 {
        self.groups.iter().map(GroupEntry::count).sum()
    }
}

/// Builds a silo's message. Groups with no local scores are left out.
pub fn client_summarize(
    silo_id: impl Into<String>,
    scores: &BTreeMap<String, Vec<f64>>,
    grid: GridSpec,
) -> Result<SiloMessage> {
    let silo_id = silo_id.into();
    let mut groups = Vec::new();
    for (label, values) in scores {
        if values.is_empty() {
            continue;
        }
        groups.push(GroupEntry {
            label: label.clone(),
            sketch: build_sketch(values, grid)?,
        });
    }
    if groups.is_empty() {
        return Err(Error::EmptySilo(silo_id));
    }
    SiloMessage::new(silo_id, grid, groups)
}

/// Count-derived weights: `alpha_s = n_s/n`, `pi_{j|s} = n_{j,s}/n_s` and the
/// silo shares `beta_j = n_j/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditWeights {
    pub alpha: BTreeMap<String, f64>,
    pub pi: BTreeMap<String, BTreeMap<String, f64>>,
    pub beta: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub silo: String,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditMetadata {
    /// Number of silos.
    pub d: usize,
    /// Smallest positive `(silo, group)` count.
    pub n_min: u64,
    pub n: u64,
    pub group_counts: BTreeMap<String, u64>,
    /// Cells backed by a single observation.
    pub degenerate_cells: Vec<Cell>,
    /// Groups absent from a silo (treated as `pi_{j|s} = 0`).
    pub missing_cells: Vec<Cell>,
}

/// Server output of the federated audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub p: Power,
    pub grid: GridSpec,
    pub g_hat: f64,
    pub h_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_mix: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v1_mix: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v1_bar: Option<f64>,
    pub weights: AuditWeights,
    /// Mixture quantiles `q^x_{s,l}` per group.
    pub mixture_quantiles: BTreeMap<String, Vec<f64>>,
    /// Within-group barycenters of the silo sketches, `q*_{s,l}`.
    pub within_group_barycenters: BTreeMap<String, Vec<f64>>,
    /// Barycenter of the mixture curves, `q^{x*}_l`.
    pub barycenter_quantiles: Vec<f64>,
    pub metadata: AuditMetadata,
}

struct GroupView<'a> {
    label: String,
    alpha: f64,
    /// `(pi_{j|s}, sketch)` over silos holding the group, in silo order.
    parts: Vec<(f64, &'a QuantileSketch)>,
}

struct GroupResult {
    mixture: StepCdf,
    mixture_q: Vec<f64>,
    within: Vec<f64>,
}

/// Algorithm 1 end to end, using the default execution mode.
pub fn server_audit(messages: &[SiloMessage], p: Power) -> Result<AuditReport> {
    server_audit_with(messages, p, Execution::default())
}

/// Same as [`server_audit`]; per-group mixtures are built under `exec`.
pub fn server_audit_with(messages: &[SiloMessage], p: Power, exec: Execution) -> Result<AuditReport> {
    let first = messages.first().ok_or(Error::NoMessages)?;
    let grid = first.grid;
    let mut silos: Vec<&SiloMessage> = messages.iter().collect();
    silos.sort_by(|a, b| a.silo_id.cmp(&b.silo_id));
    for pair in silos.windows(2) {
        if pair[0].silo_id == pair[1].silo_id {
            return Err(Error::DuplicateSilo(pair[0].silo_id.clone()));
        }
    }
    for m in &silos {
        grid.ensure_same(&m.grid)?;
    }

    let labels: BTreeSet<&str> = silos
        .iter()
        .flat_map(|m| m.groups.iter().map(|e| e.label.as_str()))
        .collect();
    if labels.len() < 2 {
        return Err(Error::TooFewGroups(labels.len()));
    }

    let mut group_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut silo_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut n_min = u64::MAX;
    let mut degenerate_cells = Vec::new();
    let mut missing_cells = Vec::new();
    for m in &silos {
        for &label in &labels {
            match m.group(label) {
                Some(e) if e.count() > 0 => {
                    *group_counts.entry(label.to_string()).or_default() += e.count();
                    *silo_counts.entry(m.silo_id.clone()).or_default() += e.count();
                    n_min = n_min.min(e.count());
                    if e.sketch.is_degenerate() {
                        degenerate_cells.push(Cell {
                            silo: m.silo_id.clone(),
                            group: label.to_string(),
                        });
                    }
                }
                _ => missing_cells.push(Cell {
                    silo: m.silo_id.clone(),
                    group: label.to_string(),
                }),
            }
        }
    }
    for &label in &labels {
        if !group_counts.contains_key(label) {
            return Err(Error::UnknownGroupWeights(label.to_string()));
        }
    }
    let n: u64 = group_counts.values().sum();

    let mut views = Vec::with_capacity(labels.len());
    let mut alpha = BTreeMap::new();
    let mut pi = BTreeMap::new();
    for &label in &labels {
        let n_s = group_counts[label];
        let a = n_s as f64 / n as f64;
        let mut parts = Vec::new();
        let mut pi_s = BTreeMap::new();
        for m in &silos {
            if let Some(e) = m.group(label).filter(|e| e.count() > 0) {
                let w = e.count() as f64 / n_s as f64;
                pi_s.insert(m.silo_id.clone(), w);
                parts.push((w, &e.sketch));
            }
        }
        alpha.insert(label.to_string(), a);
        pi.insert(label.to_string(), pi_s);
        views.push(GroupView {
            label: label.to_string(),
            alpha: a,
            parts,
        });
    }
    let beta = silo_counts
        .iter()
        .map(|(s, c)| (s.clone(), *c as f64 / n as f64))
        .collect();

    let results: Vec<Result<GroupResult>> = exec.map(&views, |v| {
        let mixture = mixture_step_cdf(&v.parts, &grid)?;
        let mixture_q = quantiles_on_grid(&mixture, &grid).into_values();
        let curves: Vec<(f64, &[f64])> = v.parts.iter().map(|(w, s)| (*w, s.values())).collect();
        let within = pointwise_barycenter(&curves, grid.k(), p)?;
        Ok(GroupResult {
            mixture,
            mixture_q,
            within,
        })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let curves: Vec<(f64, &[f64])> = views
        .iter()
        .zip(&results)
        .map(|(v, r)| (v.alpha, r.mixture_q.as_slice()))
        .collect();
    let (g_hat, bary) = grid_disparity(&curves, &grid, p)?;
    let cdfs: Vec<(f64, &StepCdf)> = views.iter().zip(&results).map(|(v, r)| (v.alpha, &r.mixture)).collect();
    let (h_hat, _) = pooled_heterogeneity(&cdfs, p)?;

    let h = grid.cell_width();
    let weighted = |f: &dyn Fn(&GroupResult) -> f64| -> f64 {
        views
            .iter()
            .zip(&results)
            .map(|(v, r)| v.alpha * f(r))
            .collect::<CompensatedSum>()
            .value()
    };
    let v_mix = weighted(&|r| grid_cost(&r.mixture_q, &r.within, h, p));
    let v_bar = weighted(&|r| grid_cost(&r.within, &bary, h, p));
    let (mut report_v, mut report_v1) = ((None, None, None), (None, None));
    match p {
        Power::Two => {
            let r = weighted(&|g| {
                let acc: CompensatedSum = (0..grid.k())
                    .map(|l| (g.mixture_q[l] - g.within[l]) * (g.within[l] - bary[l]))
                    .collect();
                2.0 * h * acc.value()
            });
            report_v = (Some(v_mix), Some(v_bar), Some(r));
        }
        Power::One => report_v1 = (Some(v_mix), Some(v_bar)),
    }

    let mut mixture_quantiles = BTreeMap::new();
    let mut within_group_barycenters = BTreeMap::new();
    for (v, r) in views.into_iter().zip(results) {
        mixture_quantiles.insert(v.label.clone(), r.mixture_q);
        within_group_barycenters.insert(v.label, r.within);
    }

    Ok(AuditReport {
        p,
        grid,
        g_hat,
        h_hat,
        v_mix: report_v.0,
        v_bar: report_v.1,
        r: report_v.2,
        v1_mix: report_v1.0,
        v1_bar: report_v1.1,
        weights: AuditWeights { alpha, pi, beta },
        mixture_quantiles,
        within_group_barycenters,
        barycenter_quantiles: bary,
        metadata: AuditMetadata {
            d: silos.len(),
            n_min,
            n,
            group_counts,
            degenerate_cells,
            missing_cells,
        },
    })
}
