//! Empirical checks of the a priori estimates, collected into a ledger.

use cmalab::estimates::{check_c11_values, check_ellipticity_window, check_third_order, comparison_suite, ledger_csv};
use cmalab::grid::{norm, BallMask, Grid4, GridField};
use cmalab::ops::complex_hessian;
use cmalab::solver::SolverOptions;

pub fn main() -> cmalab::Result<()> {
    let mut ledger = Vec::new();
    for case in comparison_suite(3, 11, 0.9, 7, &SolverOptions::new(1e-10, 50))? {
        ledger.push(case.verdict);
    }
    ledger.push(check_c11_values(&[2.0, 2.1, 2.05], 3.0)?);

    let grid = Grid4::centered([1.5, 0.0, 0.0, 0.0], 0.1, 15)?;
    let u = GridField::from_fn(grid, |p| norm(p).powi(4))?;
    let outer = BallMask::new(&grid, [1.5, 0.0, 0.0, 0.0], 0.6)?;
    let inner = BallMask::new(&grid, [1.5, 0.0, 0.0, 0.0], 0.3)?;
    ledger.push(check_third_order(&u, &inner, &outer)?);
    ledger.push(check_ellipticity_window(&complex_hessian(&u)?, 0.25, 40.0)?);
    print!("{}", ledger_csv(&ledger));
    Ok(())
}
