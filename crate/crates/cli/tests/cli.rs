use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_silofair"));
    cmd.env_remove("SILOFAIR_DATA_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Three groups, integer deciles, some ties.
fn write_scores(dir: &Path) -> PathBuf {
    let mut text = String::from("id,race,decile_score\n");
    for i in 0..300u32 {
        let race = ["A", "B", "C"][(i % 3) as usize];
        let score = 1 + (i * 7 + i / 3) % 10;
        text.push_str(&format!("{i},{race},{score}\n"));
    }
    let path = dir.join("scores.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

#[test]
fn sketch_then_federate_matches_audit() {
    let tmp = TempDir::new().unwrap();
    let data = write_scores(tmp.path());
    let data = data.to_str().unwrap();
    let msgs = tmp.path().join("msgs");
    let base = ["--grid-k", "25", "--seed", "9"];
    for p in ["1", "2"] {
        let audit = ok_json(&[&base[..], &["--p", p, "audit", "--data", data, "--jitter"]].concat());
        let summary = ok_json(
            &[&base[..], &["--out", msgs.to_str().unwrap(), "sketch", "--data", data, "--jitter"]].concat(),
        );
        assert_eq!(summary["silos"].as_array().unwrap().len(), 1);
        let fed = ok_json(&[&base[..], &["--p", p, "federate", msgs.to_str().unwrap()]].concat());
        assert!(close(fed["g_hat"].as_f64().unwrap(), audit["u_p"].as_f64().unwrap()));
        assert!(close(fed["h_hat"].as_f64().unwrap(), audit["h_p"].as_f64().unwrap()));
        for (label, alpha) in audit["alpha"].as_object().unwrap() {
            assert!(close(fed["weights"]["alpha"][label].as_f64().unwrap(), alpha.as_f64().unwrap()));
        }
        assert_eq!(fed["metadata"]["d"], 1);
    }
}

#[test]
fn five_silos_partition_the_counts() {
    let tmp = TempDir::new().unwrap();
    let data = write_scores(tmp.path());
    let msgs = tmp.path().join("five");
    let summary = ok_json(&[
        "--grid-k",
        "10",
        "--out",
        msgs.to_str().unwrap(),
        "sketch",
        "--data",
        data.to_str().unwrap(),
        "--silos",
        "5",
        "--json-mirror",
    ]);
    let mut totals = std::collections::BTreeMap::<String, u64>::new();
    for silo in summary["silos"].as_array().unwrap() {
        for (label, n) in silo["counts"].as_object().unwrap() {
            *totals.entry(label.clone()).or_default() += n.as_u64().unwrap();
        }
    }
    assert_eq!(totals.values().collect::<Vec<_>>(), vec![&100, &100, &100]);

    let from_binary = ok_json(&["federate", msgs.to_str().unwrap()]);
    let mirrors: Vec<String> = (0..5).map(|j| msgs.join(format!("silo{j}.json")).display().to_string()).collect();
    let mut args = vec!["federate"];
    args.extend(mirrors.iter().map(String::as_str));
    assert_eq!(ok_json(&args), from_binary);
}

#[test]
fn corrupted_message_exits_3() {
    let tmp = TempDir::new().unwrap();
    let data = write_scores(tmp.path());
    let msgs = tmp.path().join("m");
    ok_json(&["--out", msgs.to_str().unwrap(), "sketch", "--data", data.to_str().unwrap(), "--silos", "2"]);
    let target = msgs.join("silo1.fqs");
    let mut bytes = std::fs::read(&target).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&target, bytes).unwrap();
    let out = run(&["federate", msgs.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed-message"));
    assert_eq!(code(&run(&["federate", tmp.path().join("missing.fqs").to_str().unwrap()])), 3);
}

#[test]
fn validation_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let data = write_scores(tmp.path());
    let data = data.to_str().unwrap();
    assert_eq!(code(&run(&["--grid-k", "0", "audit", "--data", data])), 2);
    assert_eq!(code(&run(&["--trim-eps", "0.7", "audit", "--data", data])), 2);
    assert_eq!(code(&run(&["audit", "--data", data, "--groups", "A,Z"])), 2);
    assert_eq!(code(&run(&["--p", "3", "audit", "--data", data])), 2);
    assert_eq!(code(&run(&["bounds", "--n-min", "100"])), 2);
    assert_eq!(code(&run(&["sweep", "--synthetic", "--replications", "0"])), 2);
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "race,decile_score\nA,high\n").unwrap();
    assert_eq!(code(&run(&["audit", "--data", bad.to_str().unwrap()])), 3);
}

#[test]
fn audit_of_constant_groups() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("c.csv");
    std::fs::write(&path, "g,z\nx,0\nx,0\ny,1\ny,1\n").unwrap();
    let report = ok_json(&[
        "--grid-k",
        "8",
        "audit",
        "--data",
        path.to_str().unwrap(),
        "--score-column",
        "z",
        "--group-column",
        "g",
    ]);
    assert_eq!(report["u_p"], 0.25);
    assert_eq!(report["w_p"], 1.0);
    assert_eq!(report["mean_gap"], 1.0);
}

#[test]
fn data_dir_resolves_relative_paths() {
    let tmp = TempDir::new().unwrap();
    write_scores(tmp.path());
    let out = bin().args(["ingest", "--data", "scores.csv"]).env("SILOFAIR_DATA_DIR", tmp.path()).output().unwrap();
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n"], 300);
}

#[test]
fn csv_format_is_key_value() {
    let tmp = TempDir::new().unwrap();
    let data = write_scores(tmp.path());
    let out = run(&["--format", "csv", "ingest", "--data", data.to_str().unwrap(), "--groups", "A,B"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "key,value\ncounts.A,100\ncounts.B,100\njitter,false\nn,200\nseed,0\n");
}

#[test]
fn simulate_respects_config_margins() {
    let tmp = TempDir::new().unwrap();
    let data = write_scores(tmp.path());
    std::fs::write(tmp.path().join("margins.csv"), "silo,A,B,C\n0,10,50,30\n1,90,50,70\n").unwrap();
    let cfg = tmp.path().join("scenario.toml");
    std::fs::write(&cfg, "regime = \"positive\"\nrho = 0.9\nd = 2\nseed = 4\nmargins = \"margins.csv\"\n").unwrap();
    let out_dir = tmp.path().join("sim");
    let args = [
        "--out",
        out_dir.to_str().unwrap(),
        "simulate",
        "--data",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(report["margins"][0]["A"], 10);
    assert_eq!(report["margins"][1]["C"], 70);
    assert!(report["dependence"]["spearman"].as_f64().unwrap() > 0.3);
    let first = std::fs::read(out_dir.join("assignment.csv")).unwrap();
    assert!(run(&args).status.success());
    assert_eq!(std::fs::read(out_dir.join("assignment.csv")).unwrap(), first);

    std::fs::write(&cfg, "regime = \"sideways\"\nd = 2\n").unwrap();
    assert_eq!(code(&run(&args)), 2);
    std::fs::write(&cfg, "regime = [\n").unwrap();
    assert_eq!(code(&run(&args)), 3);
}

#[test]
fn assignment_file_drives_sketch() {
    let tmp = TempDir::new().unwrap();
    let data = write_scores(tmp.path());
    // group C only in silo 0
    let mut text = String::from("row_id,silo\n");
    for i in 0..300 {
        text.push_str(&format!("{i},{}\n", if i % 3 == 2 { 0 } else { i % 2 }));
    }
    let assignment = tmp.path().join("assign.csv");
    std::fs::write(&assignment, &text).unwrap();
    let msgs = tmp.path().join("m");
    let summary = ok_json(&[
        "--out",
        msgs.to_str().unwrap(),
        "sketch",
        "--data",
        data.to_str().unwrap(),
        "--assignment",
        assignment.to_str().unwrap(),
    ]);
    assert!(summary["silos"][1]["counts"].get("C").is_none());
    let fed = ok_json(&["federate", msgs.to_str().unwrap()]);
    assert_eq!(fed["weights"]["pi"]["C"]["silo0"], 1.0);

    std::fs::write(&assignment, "row_id,silo\n0,0\n").unwrap();
    let short = run(&["sketch", "--data", data.to_str().unwrap(), "--assignment", assignment.to_str().unwrap()]);
    assert_eq!(code(&short), 2);
}

#[test]
fn sweep_is_deterministic_across_execution_modes() {
    let tmp = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for extra in [&[][..], &["--sequential"][..]] {
        let dir = tmp.path().join(format!("sweep{}", extra.len()));
        let mut args = vec!["--seed", "5", "--out", dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        args.extend([
            "sweep",
            "--synthetic",
            "--ks",
            "5,20",
            "--ds",
            "1,3",
            "--replications",
            "4",
            "--reference-k",
            "201",
        ]);
        assert!(run(&args).status.success());
        let files: Vec<Vec<u8>> =
            ["convergence.csv", "k95.csv", "draws.csv"].iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    let convergence = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert!(!convergence.contains('\r'));
    // budget column is 2d(k+1) for two groups
    for line in convergence.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (d, k, budget): (u64, u64, u64) = (f[0].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap());
        assert_eq!(budget, 2 * d * (k + 1));
    }
}
