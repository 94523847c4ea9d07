//! Complex Hessian, Monge-Ampère determinant and interior norms of a sampled field.

use cmalab::grid::{norm, BallMask, Grid4, GridField};
use cmalab::ops::{complex_hessian, ma_determinant, norms};

pub fn main() -> cmalab::Result<()> {
    let grid = Grid4::centered([1.5, 0.0, 0.0, 0.0], 0.05, 21)?;
    // u = ‖z‖⁴ has det(u_{i j̄}) = 8‖z‖⁴
    let u = GridField::from_fn(grid, |p| norm(p).powi(4))?;
    let h = complex_hessian(&u)?;
    let dets = ma_determinant(&h);
    let worst = h
        .nodes()
        .iter()
        .zip(&dets)
        .map(|(&i, d)| (d - 8.0 * norm(&grid.coord_flat(i)).powi(4)).abs())
        .fold(0.0, f64::max);
    let (lo, hi) = h.eigen_range();
    println!("{} Hessians, eigenvalues in [{lo:.4}, {hi:.4}]", h.len());
    println!("max |det − 8‖z‖⁴| = {worst:.3e} (second order in h = {})", grid.h());

    let mask = BallMask::new(&grid, [1.5, 0.0, 0.0, 0.0], 0.4)?;
    let r = norms(&u, &mask, 0.7, 200)?;
    println!("norms on the ball: C⁰ {:.4}, C¹ {:.4}, C^{{1,1}} {:.4}, sampled C^{{2,0.7}} {:.4}", r.c0, r.c1, r.c11, r.holder_value);
    Ok(())
}
