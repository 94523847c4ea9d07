//! Exit codes and output files of the command-line front end.

use std::fs;
use std::path::Path;

use cmalab::cli::{run, EXIT_CASCADE, EXIT_CONFIG, EXIT_CRASH, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY_FAILED};
use cmalab::grid::GridField;

fn invoke(cmd: &str, dir: &Path, config: &str) -> i32 {
    let cfg = dir.join("run.conf");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    run(["cmalab", cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"])
}

#[test]
fn solve_reproduces_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let code = invoke("solve", dir.path(), "problem = radial:g=t\ngrid.nodes = 7\nsolver.tol = 1e-10\n");
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(dir.path().join("out/solution.field")).unwrap();
    assert!(text.starts_with("# cmalab "));
    let u = GridField::from_text(&text).unwrap();
    let g = *u.grid();
    let mask = cmalab::grid::BallMask::new(&g, [0.0; 4], 0.9).unwrap();
    for &i in mask.interior() {
        let p = g.coord_flat(i);
        let q: f64 = p.iter().map(|v| v * v).sum();
        assert!((u.at(i) - q).abs() <= 1e-9);
    }
    let diag = fs::read_to_string(dir.path().join("out/diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().nth(1), Some("iter,residual,step,clamps"));
}

#[test]
fn zero_rhs_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let code = invoke("solve", dir.path(), "boundary = radial:g=t\nrhs = const:0\ngrid.nodes = 7\n");
    assert_eq!(code, EXIT_SOLVER);
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("solve", dir.path(), "problem = radial:g=t\nrhs = file:missing.field\n"), EXIT_CONFIG);
    assert_eq!(invoke("solve", dir.path(), "problem = radial:g=t\nnot a line\n"), EXIT_CONFIG);
    let missing = dir.path().join("nope.conf");
    let out = dir.path().join("o");
    assert_eq!(
        run(["cmalab", "solve", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_CONFIG
    );
    assert_eq!(run(["cmalab", "frobnicate"]), EXIT_CONFIG);
}

#[test]
fn shallow_cascade_exits_3_with_partial_json() {
    let dir = tempfile::tempdir().unwrap();
    let code = invoke("cascade", dir.path(), "problem = radial:g=t\ncascade.depth = 2\ncascade.nodes = 15\n");
    assert_eq!(code, EXIT_CASCADE);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/cascade_0_0_0_0.json")).unwrap()).unwrap();
    assert_eq!(json["partial"], true);
    assert!(json["error"].as_str().unwrap().contains("3 correction levels"));
    assert!(json["provenance"]["config_sha256"].is_string());
}

#[test]
fn trivial_cascade_sits_at_the_tolerance_floor() {
    let dir = tempfile::tempdir().unwrap();
    let code = invoke("cascade", dir.path(), "problem = radial:g=t\ncascade.depth = 3\ncascade.nodes = 15\nsolver.tol = 1e-10\n");
    assert_eq!(code, EXIT_OK);
    let csv = fs::read_to_string(dir.path().join("out/cascade_0_0_0_0.csv")).unwrap();
    let mut lines = csv.lines().skip(1);
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "v_c0").unwrap();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let v: f64 = r.split(',').nth(col).unwrap().parse().unwrap();
        assert!(v <= 1e-9, "{v}");
    }
}

#[test]
fn verify_crash_and_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        invoke("verify", dir.path(), "problem = radial:g=t\nverify.pogorelov = pogorelov:n=5,beta=0.6667\n"),
        EXIT_CRASH
    );
    let code = invoke(
        "verify",
        dir.path(),
        "problem = radial:g=t\nverify.nodes = 7\nverify.pairs = 1\nverify.reverse_pair = true\ncascade.depth = 3\ncascade.nodes = 15\n",
    );
    assert_eq!(code, EXIT_VERIFY_FAILED);
    let ledger = fs::read_to_string(dir.path().join("out/ledger.csv")).unwrap();
    let reversed = ledger.lines().find(|l| l.starts_with("comparison_reversed,")).unwrap();
    assert!(reversed.contains(",false,"));
    assert!(ledger.lines().filter(|l| l.starts_with("comparison,")).all(|l| l.contains(",true,")));
}
