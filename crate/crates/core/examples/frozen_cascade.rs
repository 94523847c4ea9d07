//! The frozen right-hand-side cascade at the singular point of
//! f = 1 + ½‖z‖^{1/2}: barrier bound per level and decay of the corrections.

use cmalab::cascade::{run_cascade, BallSystem};
use cmalab::presets::{RadialProfile, RadialSolution};
use cmalab::solver::SolverOptions;

pub fn main() -> cmalab::Result<()> {
    let u = RadialSolution::new(RadialProfile::holder(1.0, 0.5, 0.5)?, [0.0; 4]);
    let system = BallSystem::new([0.0; 4], 0.5, 0.5, 4, 15)?;
    let cas = run_cascade(&u, &u.rhs(), &system, 0.7, &SolverOptions::new(1e-10, 50))?;
    for s in &cas.report.solves {
        println!("level {}: |u_k − u| = {:.3e} ≤ {:.3e}", s.k, s.barrier, s.barrier_bound);
    }
    for l in &cas.report.levels {
        println!("v_{}: C⁰ {:.3e}  C² {:.3e}  Schauder {:.4}", l.k, l.v_c0, l.v_c2, l.schauder);
    }
    let fits = cas.report.fits.as_ref().expect("complete cascade has fits");
    if let (Some(c0), Some(c2)) = (fits.c0, fits.c2) {
        println!("decay exponents: C⁰ {:.3} (expect ≈ 2.5), C² {:.3} (expect ≈ 0.5)", c0.exponent, c2.exponent);
    }
    Ok(())
}
