//! Driving the command-line front end in-process: a solve from a config file.

use std::fs;

pub fn main() {
    let dir = std::env::temp_dir().join("cmalab-example");
    fs::create_dir_all(&dir).expect("temp dir");
    let config = dir.join("trivial.conf");
    fs::write(&config, "problem = radial:g=t\ngrid.nodes = 7\nsolver.tol = 1e-10\n").expect("config");
    let out = dir.join("out");
    let code = cmalab::cli::run([
        "cmalab",
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    println!("exit code {code}");
    print!("{}", fs::read_to_string(out.join("diagnostics.csv")).expect("diagnostics written"));
}
