//! Limit second derivatives w from the cascade, against the closed form and
//! a direct solve at double resolution.

use cmalab::cascade::{direct_second_derivatives, relative_w_error, run_cascade, BallSystem};
use cmalab::presets::{RadialProfile, RadialSolution};
use cmalab::solver::SolverOptions;

pub fn main() -> cmalab::Result<()> {
    let u = RadialSolution::new(RadialProfile::holder(1.0, 0.5, 0.5)?, [0.0; 4]);
    let x0 = [0.15, 0.1, 0.0, 0.0];
    let opts = SolverOptions::new(1e-10, 50);
    let system = BallSystem::new(x0, 0.5, 0.5, 4, 15)?;
    let cas = run_cascade(&u, &u.rhs(), &system, 0.7, &opts)?;
    let w = cas.report.w.as_ref().expect("complete cascade has limits");
    let exact = u.real_hessian(&x0).complex_entries();
    let direct = direct_second_derivatives(&u, &u.rhs(), x0, system.d / 2.0, system.nodes, &opts)?;
    println!("w_11̄ = {:.6}, w_22̄ = {:.6}, w_11 = {:.6}", w.w.w11b, w.w.w22b, w.w.w11);
    println!("tail estimate {:.3e}, non-Cauchy: {}", w.tail, w.non_cauchy);
    println!("relative error against the closed form: {:.3e}", relative_w_error(&w.w, &exact));
    println!("relative error against the direct solve: {:.3e}", relative_w_error(&w.w, &direct));
    Ok(())
}
