//! Radial closed-form solutions and the Hölder right-hand side.

use cmalab::grid::{Grid4, GridField};
use cmalab::ops::{complex_hessian, ma_determinant, modulus_of_continuity};
use cmalab::presets::{holder_rhs, radial_solution, RadialProfile};

pub fn main() -> cmalab::Result<()> {
    let grid = Grid4::centered([0.6, 0.0, 0.0, 0.0], 0.05, 13)?;
    for profile in [RadialProfile::Linear { a: 2.0 }, RadialProfile::Quartic, RadialProfile::holder(1.0, 0.5, 0.5)?] {
        let (u, f) = radial_solution(profile, &grid)?;
        let h = complex_hessian(&u)?;
        let err = h
            .nodes()
            .iter()
            .zip(ma_determinant(&h))
            .map(|(&i, d)| (d - f.at(i)).abs())
            .fold(0.0, f64::max);
        println!("{profile:?}: max |det − f| = {err:.3e}");
    }
    let g = Grid4::centered([0.0; 4], 0.05, 13)?;
    let f: GridField = holder_rhs(&g, 1.0, 0.5, [0.0; 4], 0.5)?;
    for r in [0.1, 0.2, 0.3] {
        println!("ω_f({r}, 0) = {:.5}", modulus_of_continuity(&f, [0.0; 4], r)?);
    }
    Ok(())
}
