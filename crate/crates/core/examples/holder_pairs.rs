//! Two-point Hölder estimator on a short seeded pair schedule.

use cmalab::cascade::{holder_estimate, holder_pair, pair_schedule, run_cascade, BallSystem, HolderSetup};
use cmalab::presets::{RadialProfile, RadialSolution};
use cmalab::solver::SolverOptions;

pub fn main() -> cmalab::Result<()> {
    let u = RadialSolution::new(RadialProfile::holder(1.0, 0.5, 0.5)?, [0.0; 4]);
    let setup = HolderSetup {
        system: BallSystem::new([0.0; 4], 0.5, 0.5, 5, 15)?,
        alpha: 0.5,
        gamma: 0.7,
        opts: SolverOptions::new(1e-10, 50),
        lambda: 1.0,
        f_holder: 0.5,
    };
    let f = u.rhs();
    let cx = run_cascade(&u, &f, &setup.system, setup.gamma, &setup.opts)?;
    let mut records = Vec::new();
    for (_, y) in pair_schedule([0.0; 4], setup.system.d, 5, 3) {
        let cy = run_cascade(&u, &f, &setup.system.recentered(y), setup.gamma, &setup.opts)?;
        let r = holder_pair(&cx, &cy, &f, &setup)?;
        println!("dist {:.4}  case {:<3} quotient {:.4}", r.dist, r.case.label(), r.quotient);
        records.push(r);
    }
    let est = holder_estimate(&records, setup.alpha)?;
    println!("fitted exponent {:.3} ± {:.3}", est.exponent, 1.96 * est.std_error);
    Ok(())
}
