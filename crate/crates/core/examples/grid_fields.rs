//! Grids, ball masks and the field file format.

use cmalab::grid::{norm, resample, BallMask, Grid4, GridField};

pub fn main() -> cmalab::Result<()> {
    let grid = Grid4::centered([0.0; 4], 0.2, 11)?;
    let mask = BallMask::new(&grid, [0.0; 4], 0.8)?;
    println!(
        "{} nodes, h = {}, ball of radius {}: {} interior, {} boundary",
        grid.len(),
        grid.h(),
        mask.radius(),
        mask.interior().len(),
        mask.boundary().len()
    );

    let u = GridField::from_fn(grid, |p| norm(p).powi(2))?;
    let p = [0.13, -0.07, 0.31, 0.02];
    println!("multilinear interpolation of ‖z‖² at {p:?}: {:.6} (exact {:.6})", u.interpolate(&p)?, norm(&p).powi(2));

    let fine = Grid4::centered([0.0; 4], 0.1, 17)?;
    let v = resample(&u, &fine)?;
    println!("resampled onto h = {}: {} values", fine.h(), v.values().len());

    let text = u.to_text();
    let back = GridField::from_text(&text)?;
    assert_eq!(back, u);
    println!("field file round trip: {} lines, bit-identical", text.lines().count());
    Ok(())
}
