//! Every example runs to completion.

#[path = "../examples/grid_fields.rs"]
mod grid_fields;

#[path = "../examples/complex_hessian.rs"]
mod complex_hessian;

#[path = "../examples/dirichlet_solve.rs"]
mod dirichlet_solve;

#[path = "../examples/radial_presets.rs"]
mod radial_presets;

#[path = "../examples/pogorelov.rs"]
mod pogorelov;

#[path = "../examples/estimates_ledger.rs"]
mod estimates_ledger;

#[path = "../examples/cli_run.rs"]
mod cli_run;

#[path = "../examples/frozen_cascade.rs"]
mod frozen_cascade;

#[path = "../examples/extrapolate_w.rs"]
mod extrapolate_w;

#[path = "../examples/holder_pairs.rs"]
mod holder_pairs;

#[test]
fn grid_fields_runs() {
    grid_fields::main().unwrap();
}

#[test]
fn complex_hessian_runs() {
    complex_hessian::main().unwrap();
}

#[test]
fn dirichlet_solve_runs() {
    dirichlet_solve::main().unwrap();
}

#[test]
fn radial_presets_runs() {
    radial_presets::main().unwrap();
}

#[test]
fn pogorelov_runs() {
    pogorelov::main().unwrap();
}

#[test]
fn estimates_ledger_runs() {
    estimates_ledger::main().unwrap();
}

#[test]
fn cli_run_runs() {
    cli_run::main();
}

#[test]
fn frozen_cascade_runs() {
    frozen_cascade::main().unwrap();
}

#[test]
fn extrapolate_w_runs() {
    extrapolate_w::main().unwrap();
}

#[test]
fn holder_pairs_runs() {
    holder_pairs::main().unwrap();
}
