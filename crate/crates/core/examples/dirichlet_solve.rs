//! Damped Newton solve of det(u_{i j̄}) = 8‖z‖⁴ with boundary values ‖z‖⁴,
//! and the second-order error decay under halving of h.

use cmalab::grid::FieldSource;
use cmalab::presets::{RadialProfile, RadialSolution};
use cmalab::solver::{solve_with, DirichletProblem, SolverOptions};
use cmalab::grid::{BallMask, Grid4};

pub fn main() -> cmalab::Result<()> {
    let exact = RadialSolution::new(RadialProfile::Quartic, [0.0; 4]);
    let center = [1.5, 0.0, 0.0, 0.0];
    let opts = SolverOptions::new(1e-10, 50);
    let mut prev: Option<f64> = None;
    for n in [7, 13] {
        let grid = Grid4::centered(center, 1.8 / (n - 1) as f64, n + 2)?;
        let mask = BallMask::new(&grid, center, 0.9)?;
        let problem = DirichletProblem::from_sources(mask.clone(), &exact.rhs(), &exact, 1.0)?;
        let res = solve_with(&problem, &opts)?;
        let mut err: f64 = 0.0;
        for &i in mask.interior() {
            err = err.max((res.solution.at(i) - exact.value_at(&grid.coord_flat(i))?).abs());
        }
        print!(
            "h = {:.4}: {} unknowns, {} Newton steps, residual {:.2e}, sup error {:.3e}",
            grid.h(),
            mask.interior().len(),
            res.iterations,
            res.residual,
            err
        );
        match prev {
            Some(e) => println!(", ratio {:.2}", e / err),
            None => println!(),
        }
        prev = Some(err);
    }
    Ok(())
}
