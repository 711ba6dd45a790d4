use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use silofair::scenario::contingency_table;
use silofair::sweep::{write_convergence_csv, write_draws_csv, write_k95_csv};
use silofair::{
    allocate_random, bounds::bounds_report, central_audit, client_summarize, decode_message, dependence_diagnostics,
    encode_message, protocol::{from_json, to_json}, run_sweep, server_audit_with, AllocationScenario, BoundInputs, Error,
    Regime, Result, SiloMessage, SweepSpec,
};

use crate::data::{read_assignment, write_assignment, DataArgs, ScenarioConfig};
use crate::output::{create, emit, print_json};
use crate::{BoundsArgs, FederateArgs, Global, SimulateArgs, SketchArgs, SweepArgs};

fn out_dir(g: &Global) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn note(path: Option<PathBuf>) {
    if let Some(p) = path {
        eprintln!("wrote {}", p.display());
    }
}

pub fn ingest(g: &Global, a: &DataArgs) -> Result<()> {
    let ds = a.load(g.seed)?;
    let report = json!({
        "n": ds.len(),
        "counts": ds.counts(),
        "jitter": a.jitter || a.synthetic,
        "seed": g.seed,
    });
    note(emit(&report, g.format, g.out.as_deref(), "ingest")?);
    Ok(())
}

pub fn audit(g: &Global, a: &DataArgs) -> Result<()> {
    let ds = a.load(g.seed)?;
    let report = central_audit(&ds.grouped_sample()?, g.grid()?, g.power()?)?;
    note(emit(&report, g.format, g.out.as_deref(), "audit")?);
    Ok(())
}

#[derive(Serialize)]
struct SketchSummary {
    silo_id: String,
    path: PathBuf,
    counts: BTreeMap<String, u64>,
}

pub fn sketch(g: &Global, a: &SketchArgs) -> Result<()> {
    let grid = g.grid()?;
    let ds = a.data.load(g.seed)?;
    let (assignment, d) = match &a.assignment {
        Some(path) => read_assignment(path, ds.len())?,
        None => (allocate_random(ds.len(), a.silos, g.seed)?, a.silos),
    };
    let dir = out_dir(g);
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for (j, scores) in ds.split(&assignment, d)?.into_iter().enumerate() {
        if scores.is_empty() {
            eprintln!("silo {j} received no rows, skipping");
            continue;
        }
        let id = format!("silo{j}");
        let msg = client_summarize(id.clone(), &scores, grid)?;
        let path = dir.join(format!("{id}.fqs"));
        std::fs::write(&path, encode_message(&msg)?)?;
        if a.json_mirror {
            std::fs::write(dir.join(format!("{id}.json")), to_json(&msg) + "\n")?;
        }
        let counts = msg.groups().iter().map(|e| (e.label.clone(), e.count())).collect();
        written.push(SketchSummary { silo_id: id, path, counts });
    }
    let report = json!({ "grid": grid, "silos": written });
    print_json(&report)?;
    Ok(())
}

fn message_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|p| p.extension().is_some_and(|e| e == "fqs"));
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::NoMessages);
    }
    Ok(files)
}

fn read_message(path: &Path) -> Result<SiloMessage> {
    let bytes = std::fs::read(path)?;
    let tag = |e: Error| match e {
        Error::MalformedMessage(m) => Error::MalformedMessage(format!("{}: {m}", path.display())),
        other => other,
    };
    if path.extension().is_some_and(|e| e == "json") {
        let text = String::from_utf8(bytes).map_err(|_| Error::MalformedMessage("not UTF-8".into()))?;
        from_json(&text).map_err(tag)
    } else {
        decode_message(&bytes).map_err(tag)
    }
}

pub fn federate(g: &Global, a: &FederateArgs) -> Result<()> {
    let messages = message_files(&a.inputs)?.iter().map(|p| read_message(p)).collect::<Result<Vec<_>>>()?;
    let report = server_audit_with(&messages, g.power()?, g.execution())?;
    note(emit(&report, g.format, g.out.as_deref(), "federate")?);
    Ok(())
}

pub fn bounds(g: &Global, a: &BoundsArgs) -> Result<()> {
    let inputs = BoundInputs {
        n_min: a.n_min,
        k: g.grid_k as u64,
        d: a.d,
        groups: a.groups,
        delta: a.delta,
        m_eps: a.m_eps,
        eps: g.trim_eps,
    };
    let n = a.n.unwrap_or(a.n_min.saturating_mul(a.d).saturating_mul(a.groups));
    let report = bounds_report(inputs, n, a.multiplier)?;
    note(emit(&report, g.format, g.out.as_deref(), "bounds")?);
    Ok(())
}

pub fn simulate(g: &Global, a: &SimulateArgs) -> Result<()> {
    let ds = a.data.load(g.seed)?;
    let scenario = match &a.config {
        Some(path) => {
            let cfg = ScenarioConfig::read(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            AllocationScenario {
                regime: cfg.regime()?,
                rho: cfg.rho,
                d: cfg.d,
                seed: cfg.seed.unwrap_or(g.seed),
                margins: cfg.margins(base, &ds.labels)?,
            }
        }
        None => AllocationScenario {
            regime: a.regime.parse()?,
            rho: a.rho,
            d: a.silos,
            seed: g.seed,
            margins: None,
        },
    };
    let assignment = scenario.allocate(&ds.scores, &ds.groups, ds.n_groups())?;
    let dependence = dependence_diagnostics(&ds.scores, &assignment)?;
    let table = contingency_table(&ds.groups, &assignment, scenario.d, ds.n_groups())?;
    let margins: Vec<BTreeMap<&str, u64>> = table
        .iter()
        .map(|row| ds.labels.iter().map(String::as_str).zip(row.iter().copied()).collect())
        .collect();
    let report = json!({ "scenario": scenario, "dependence": dependence, "margins": margins });
    match &g.out {
        Some(dir) => {
            let mut w = create(dir, "assignment.csv")?;
            write_assignment(&assignment, &mut w)?;
            w.flush()?;
            eprintln!("wrote {}", dir.join("assignment.csv").display());
            note(emit(&report, g.format, Some(dir), "simulate")?);
        }
        None => {
            let mut buf = Vec::new();
            write_assignment(&assignment, &mut buf)?;
            crate::output::print(std::str::from_utf8(&buf).expect("ascii csv"))?;
            eprintln!("{}", serde_json::to_string(&report).expect("report serializes"));
        }
    }
    Ok(())
}

pub fn sweep(g: &Global, a: &SweepArgs) -> Result<()> {
    let ds = a.data.load(g.seed)?;
    let regimes = a.regimes.iter().map(|r| r.parse()).collect::<Result<Vec<Regime>>>()?;
    let spec = SweepSpec {
        ks: a.ks.clone(),
        ds: a.ds.clone(),
        regimes,
        rho: a.rho,
        replications: a.replications,
        tau: a.tau,
        base_seed: g.seed,
        reference_k: a.reference_k,
    };
    let result = run_sweep(&ds, &spec, g.execution())?;
    let dir = out_dir(g);
    let mut w = create(&dir, "convergence.csv")?;
    write_convergence_csv(&result.convergence, &mut w)?;
    w.flush()?;
    let mut w = create(&dir, "k95.csv")?;
    write_k95_csv(&result.k95, &mut w)?;
    w.flush()?;
    let mut w = create(&dir, "draws.csv")?;
    write_draws_csv(&result.draws, &mut w)?;
    w.flush()?;
    let files = ["convergence.csv", "k95.csv", "draws.csv"].map(|f| dir.join(f));
    let report = json!({
        "spec": spec,
        "groups": result.groups,
        "reference_u2": result.reference_u2,
        "k95": result.k95,
        "files": files,
    });
    print_json(&report)?;
    Ok(())
}
