//! Monte Carlo sweeps over sketch size, silo count and allocation regime.
//!
//! Every replication draws a baseline allocation for each `d`, derives the
//! regime allocations from it (same contingency table), sketches every silo
//! at every `k` and runs the `p = 2` federated audit. Replications run under
//! an [`Execution`] mode and are aggregated in a fixed order, so tables are
//! identical for any thread count.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::communication_budget;
use crate::central::u_hat;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Power;
use crate::par::Execution;
use crate::protocol::{client_summarize, server_audit_with};
use crate::scenario::rng::derive_seed;
use crate::scenario::{allocate_copula, allocate_random, contingency_table, dependence_diagnostics, Regime};
use crate::sketch::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ks: Vec<usize>,
    pub ds: Vec<usize>,
    pub regimes: Vec<Regime>,
    pub rho: f64,
    pub replications: usize,
    /// Relative error target for `p_ok`.
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub base_seed: u64,
    /// Grid size of the centralized reference `U_2`.
    #[serde(default = "default_reference_k")]
    pub reference_k: usize,
}

fn default_tau() -> f64 {
    0.01
}

fn default_reference_k() -> usize {
    2001
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("k list must be nonempty and positive".into());
        }
        if self.ds.is_empty() || self.ds.contains(&0) {
            return bad("d list must be nonempty and positive".into());
        }
        if self.regimes.is_empty() {
            return bad("no regimes".into());
        }
        if self.replications == 0 {
            return bad("zero replications".into());
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau = {} is not in (0, 1)", self.tau));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho = {} is not in [0, 1)", self.rho));
        }
        if self.reference_k == 0 {
            return bad("reference k must be positive".into());
        }
        Ok(())
    }
}

/// One federated estimate for a single replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Draw {
    pub d: usize,
    pub regime: Regime,
    pub replication: usize,
    pub k: usize,
    pub g_hat: f64,
    pub abs_error: f64,
    pub pearson: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub d: usize,
    pub regime: Regime,
    pub k: usize,
    pub budget: u64,
    pub replications: usize,
    pub reference_u2: f64,
    pub central_u2_k: f64,
    pub mae: f64,
    pub mean_g: f64,
    pub q05_g: f64,
    pub median_g: f64,
    pub q95_g: f64,
    pub p_ok: f64,
    pub mean_abs_spearman: f64,
    pub mean_abs_pearson: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct K95Row {
    pub d: usize,
    pub regime: Regime,
    pub tau: f64,
    /// Smallest `k` in the list with `p_ok >= 0.95`, if any.
    pub k95: Option<usize>,
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub groups: usize,
    pub reference_u2: f64,
    pub convergence: Vec<ConvergenceRow>,
    pub k95: Vec<K95Row>,
    pub draws: Vec<Draw>,
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn replicate(ds: &Dataset, spec: &SweepSpec, ks: &[usize], d: usize, rep: usize, reference: f64) -> Result<Vec<Draw>> {
    let n_groups = ds.n_groups();
    let base_seed = derive_seed(spec.base_seed, "baseline", &[d as u64, rep as u64]);
    let baseline = allocate_random(ds.len(), d, base_seed)?;
    let margins = contingency_table(&ds.groups, &baseline, d, n_groups)?;
    let mut draws = Vec::new();
    for &regime in &spec.regimes {
        let assignment = match regime {
            Regime::Random => baseline.clone(),
            _ => {
                let seed = derive_seed(spec.base_seed, "copula", &[d as u64, rep as u64, regime as u64]);
                allocate_copula(&ds.scores, &ds.groups, &margins, spec.rho, regime, seed)?
            }
        };
        let dep = if d > 1 {
            dependence_diagnostics(&ds.scores, &assignment)?
        } else {
            crate::scenario::Dependence { pearson: 0.0, spearman: 0.0 }
        };
        let silos = ds.split(&assignment, d)?;
        for &k in ks {
            let grid = GridSpec::new(k)?;
            let messages = silos
                .iter()
                .enumerate()
                .filter(|(_, s)| !s.is_empty())
                .map(|(j, s)| client_summarize(format!("silo{j:03}"), s, grid))
                .collect::<Result<Vec<_>>>()?;
            let report = server_audit_with(&messages, Power::Two, Execution::Sequential)?;
            draws.push(Draw {
                d,
                regime,
                replication: rep,
                k,
                g_hat: report.g_hat,
                abs_error: (report.g_hat - reference).abs(),
                pearson: dep.pearson,
                spearman: dep.spearman,
            });
        }
    }
    Ok(draws)
}

/// Share of draws with relative error at most `tau`.
pub fn p_ok(draws: &[&Draw], reference: f64, tau: f64) -> f64 {
    let ok = draws.iter().filter(|d| d.abs_error <= tau * reference).count();
    ok as f64 / draws.len() as f64
}

pub fn run_sweep(ds: &Dataset, spec: &SweepSpec, exec: Execution) -> Result<SweepResult> {
    spec.validate()?;
    let pooled = ds.grouped_sample()?;
    let reference = u_hat(&pooled, GridSpec::new(spec.reference_k)?, Power::Two)?;
    let mut ks = spec.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let central: Vec<f64> = ks
        .iter()
        .map(|&k| u_hat(&pooled, GridSpec::new(k)?, Power::Two))
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, usize)> = spec
        .ds
        .iter()
        .flat_map(|&d| (0..spec.replications).map(move |r| (d, r)))
        .collect();
    let results = exec.map(&tasks, |&(d, r)| replicate(ds, spec, &ks, d, r, reference));
    let mut draws = Vec::new();
    for r in results {
        draws.extend(r?);
    }
    draws.sort_by_key(|x| (x.d, x.regime, x.k, x.replication));

    let groups = ds.n_groups() as u64;
    let mut convergence = Vec::new();
    let mut k95 = Vec::new();
    for &d in &spec.ds {
        for &regime in &spec.regimes {
            let mut first_ok = None;
            for (ki, &k) in ks.iter().enumerate() {
                let cell: Vec<&Draw> = draws.iter().filter(|x| x.d == d && x.regime == regime && x.k == k).collect();
                let mut g: Vec<f64> = cell.iter().map(|x| x.g_hat).collect();
                g.sort_by(f64::total_cmp);
                let ok = p_ok(&cell, reference, spec.tau);
                if ok >= 0.95 && first_ok.is_none() {
                    first_ok = Some(k);
                }
                convergence.push(ConvergenceRow {
                    d,
                    regime,
                    k,
                    budget: communication_budget(d as u64, k as u64, groups),
                    replications: cell.len(),
                    reference_u2: reference,
                    central_u2_k: central[ki],
                    mae: mean(cell.iter().map(|x| x.abs_error)),
                    mean_g: mean(g.iter().copied()),
                    q05_g: quantile(&g, 0.05),
                    median_g: quantile(&g, 0.5),
                    q95_g: quantile(&g, 0.95),
                    p_ok: ok,
                    mean_abs_spearman: mean(cell.iter().map(|x| x.spearman.abs())),
                    mean_abs_pearson: mean(cell.iter().map(|x| x.pearson.abs())),
                });
            }
            k95.push(K95Row {
                d,
                regime,
                tau: spec.tau,
                k95: first_ok,
                budget: first_ok.map(|k| communication_budget(d as u64, k as u64, groups)),
            });
        }
    }
    Ok(SweepResult {
        spec: spec.clone(),
        groups: ds.n_groups(),
        reference_u2: reference,
        convergence,
        k95,
        draws,
    })
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "d",
        "regime",
        "k",
        "budget",
        "replications",
        "reference_u2",
        "central_u2_k",
        "mae",
        "mean_g",
        "q05_g",
        "median_g",
        "q95_g",
        "p_ok",
        "mean_abs_spearman",
        "mean_abs_pearson",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.d.to_string(),
            r.regime.to_string(),
            r.k.to_string(),
            r.budget.to_string(),
            r.replications.to_string(),
            fmt_f64(r.reference_u2),
            fmt_f64(r.central_u2_k),
            fmt_f64(r.mae),
            fmt_f64(r.mean_g),
            fmt_f64(r.q05_g),
            fmt_f64(r.median_g),
            fmt_f64(r.q95_g),
            fmt_f64(r.p_ok),
            fmt_f64(r.mean_abs_spearman),
            fmt_f64(r.mean_abs_pearson),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_k95_csv<W: Write>(rows: &[K95Row], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["d", "regime", "tau", "k95", "budget"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.d.to_string(),
            r.regime.to_string(),
            fmt_f64(r.tau),
            r.k95.map(|k| k.to_string()).unwrap_or_default(),
            r.budget.map(|b| b.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_draws_csv<W: Write>(rows: &[Draw], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["d", "regime", "replication", "k", "g_hat", "abs_error", "pearson", "spearman"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.d.to_string(),
            r.regime.to_string(),
            r.replication.to_string(),
            r.k.to_string(),
            fmt_f64(r.g_hat),
            fmt_f64(r.abs_error),
            fmt_f64(r.pearson),
            fmt_f64(r.spearman),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}
