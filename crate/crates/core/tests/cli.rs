use std::fs;

use ringflow::cli::run;
use ringflow::config::ConfigDoc;

fn ringflow(args: &[&str]) -> i32 {
    run(std::iter::once("ringflow").chain(args.iter().copied()))
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn output_header_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let again = dir.path().join("again.csv");
    let code = ringflow(&["eta-scan", "--M", "4", "--etas", "0.4,0.2,0.1", "--T1", "3", "-o", first.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&first).unwrap();
    let doc = ConfigDoc::parse_prefixed(&text, "# ").unwrap();
    assert_eq!(doc.section("system").unwrap().get("M"), Some("4"));

    // the echoed header is itself a valid config file
    let cfg = dir.path().join("replay.conf");
    fs::write(&cfg, doc.render()).unwrap();
    assert_eq!(ringflow(&["eta-scan", "--config", cfg.to_str().unwrap(), "-o", again.to_str().unwrap()]), 0);
    assert_eq!(text, fs::read_to_string(&again).unwrap());
    assert_eq!(body(&text).len(), 4);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "[system]\nM = 4\neta = 0.5\nT1 = 2\nT2 = 1\n[coupling]\nkind = delta_pair\nc = 0.5\nx1 = 1\n").unwrap();
    let out = dir.path().join("out.json");
    let code = ringflow(&["exact-current", "--config", cfg.to_str().unwrap(), "--eta", "0.25", "--format", "json", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["result"]["eta"], 0.25);
    assert_eq!(v["result"]["m"], 4);
    assert!(v["config"].as_str().unwrap().contains("eta = 2.5"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let o = out.to_str().unwrap();
    assert_eq!(ringflow(&["--help"]), 0);
    assert_eq!(ringflow(&["exact-current", "--eta", "x"]), 1);
    // α₂ = iα₁ at n = 1 violates non-degeneracy
    let table = dir.path().join("t.csv");
    fs::write(&table, "n,re1,im1,re2,im2\n0,1,0,0.5,0\n1,1,0,0,1\n2,1,0,0.3,0.2\n").unwrap();
    assert_eq!(
        ringflow(&["validate", "--coupling", "table", "--table", table.to_str().unwrap(), "--n-max", "2", "-o", o]),
        2
    );
    assert_eq!(ringflow(&["validate", "-o", o]), 0);
    // η = 0 leaves the field undamped: no stationary covariance
    assert_eq!(ringflow(&["exact-current", "--eta", "0", "-o", o]), 3);
}

#[test]
fn every_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let o = out.to_str().unwrap();
    for args in [
        vec!["m-scan", "--ms", "2,4", "--eta", "0.3"],
        vec!["series-current", "--n-max", "4096"],
        vec!["example-scan", "--points", "5", "--n-max", "2000"],
        vec!["decompose", "--M", "3"],
        vec!["simulate", "--M", "2", "--sample-time", "2000", "--burn-in", "10", "--dt", "0.5"],
    ] {
        let mut full = args.clone();
        full.extend(["-o", o]);
        assert_eq!(ringflow(&full), 0, "{args:?}");
        assert!(body(&fs::read_to_string(&out).unwrap()).len() >= 2, "{args:?}");
    }
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let out = dir.path().join("o.csv");
    let code = ringflow(&[
        "simulate", "--M", "2", "--sample-time", "500", "--burn-in", "1", "--dt", "0.5", "--trajectory",
        traj.to_str().unwrap(), "--trajectory-steps", "100", "--thin", "10", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&traj).unwrap();
    let rows = body(&text);
    assert_eq!(rows[0], "t,current,energy");
    // t = 0 plus every 10th of 100 steps
    assert_eq!(rows.len(), 12);
    assert!(rows[1].starts_with("0,"));
}
