//! Falsifiable checks of the a priori estimates behind the cascade: the
//! comparison principle, interior `C^{1,1}` uniformity, interior third-order
//! stability and the ellipticity window of the complex Hessian.
//!
//! Each check returns an [`EstimateVerdict`]; verdicts append to one CSV ledger.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{dist, fmt17, BallMask, FnSource, Grid4, GridField};
use crate::ops::{HermitianField, NormReport};
use crate::solver::{solve_with, DirichletProblem, SolveResult, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateVerdict {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// Non-negative exactly when the check passes.
    pub margin: f64,
    pub pass: bool,
    /// Nodes, pairs or levels examined.
    pub nodes: usize,
    /// Grid spacing, when the check lives on one grid.
    pub h: Option<f64>,
    /// Largest eigenvalue, for the ellipticity window.
    pub measured_max: Option<f64>,
}

impl EstimateVerdict {
    pub const CSV_HEADER: &'static str = "estimate,measured,bound,margin,pass,nodes,h";

    fn new(name: &str, measured: f64, bound: f64, margin: f64, nodes: usize, h: Option<f64>) -> Self {
        EstimateVerdict {
            name: name.to_string(),
            measured,
            bound,
            margin,
            pass: margin >= 0.0,
            nodes,
            h,
            measured_max: None,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.name,
            fmt17(self.measured),
            fmt17(self.bound),
            fmt17(self.margin),
            self.pass,
            self.nodes,
            self.h.map(fmt17).unwrap_or_default()
        )
    }
}

/// Ledger text: header plus one row per verdict.
pub fn ledger_csv(verdicts: &[EstimateVerdict]) -> String {
    let mut s = String::from(EstimateVerdict::CSV_HEADER);
    s.push('\n');
    for v in verdicts {
        s.push_str(&v.csv_row());
        s.push('\n');
    }
    s
}

/// `10h²(1 + ‖f‖_{C⁰})`, the truncation-error scale.
pub fn comparison_slack(h: f64, rhs_sup: f64) -> f64 {
    10.0 * h * h * (1.0 + rhs_sup)
}

fn same_mask(a: &BallMask, b: &BallMask) -> bool {
    a.grid() == b.grid() && a.center() == b.center() && a.radius() == b.radius()
}

/// Comparison principle: `det a ≥ det b` and `a ≤ b` on the boundary give
/// `a ≤ b + slack` inside. Measured constant: the largest violation `max(a − b)⁺`.
pub fn check_comparison(
    a: (&DirichletProblem, &SolveResult),
    b: (&DirichletProblem, &SolveResult),
    slack: f64,
) -> Result<EstimateVerdict> {
    let (pa, ra) = a;
    let (pb, rb) = b;
    let mask = pa.mask();
    if !same_mask(mask, pb.mask()) {
        return Err(LabError::InvalidPair("solves live on different masks".into()));
    }
    for i in mask.stencil_halo() {
        let (ba, bb) = (pa.boundary().at(i), pb.boundary().at(i));
        if ba > bb {
            return Err(LabError::InvalidPair(format!(
                "boundary order violated at node {i}: {ba} > {bb}"
            )));
        }
    }
    for &i in mask.interior() {
        let (fa, fb) = (pa.rhs().at(i), pb.rhs().at(i));
        if fa < fb {
            return Err(LabError::InvalidPair(format!(
                "rhs order violated at node {i}: {fa} < {fb}"
            )));
        }
    }
    let worst = mask
        .interior()
        .iter()
        .map(|&i| ra.solution.at(i) - rb.solution.at(i))
        .fold(0.0f64, f64::max);
    Ok(EstimateVerdict::new(
        "comparison",
        worst,
        slack,
        slack - worst,
        mask.interior().len(),
        Some(mask.grid().h()),
    ))
}

/// Passes when every level's `C^{1,1}` value is at most `factor` times level 0's.
pub fn check_c11_uniform(reports: &[NormReport], factor: f64) -> Result<EstimateVerdict> {
    let values: Vec<f64> = reports.iter().map(|r| r.c11).collect();
    check_c11_values(&values, factor)
}

/// [`check_c11_uniform`] on bare per-level values.
pub fn check_c11_values(values: &[f64], factor: f64) -> Result<EstimateVerdict> {
    if values.len() < 2 {
        return Err(LabError::InvalidArgument(format!(
            "{} levels given, at least 2 needed",
            values.len()
        )));
    }
    let base = values[0];
    if !(base > 0.0) || values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::InvalidArgument(format!("level-0 C^{{1,1}} value {base} is not positive")));
    }
    let ratio = values.iter().fold(0.0f64, |m, v| m.max(v / base));
    Ok(EstimateVerdict::new("c11_uniform", ratio, factor, factor - ratio, values.len(), None))
}

/// Sup over `inner` of `|∇_h Δ_h u|`, with `Δ_h` the sum of the four axis
/// second differences. Every node used must lie in the closed `outer` ball.
/// Passes iff the value is finite; see [`third_order_stability`].
pub fn check_third_order(u: &GridField, inner: &BallMask, outer: &BallMask) -> Result<EstimateVerdict> {
    let g = *u.grid();
    if inner.grid() != &g || outer.grid() != &g {
        return Err(LabError::InvalidArgument("field and masks must share one grid".into()));
    }
    if dist(&inner.center(), &outer.center()) + inner.radius() >= outer.radius() {
        return Err(LabError::InvalidArgument(format!(
            "ball of radius {} is not strictly inside the ball of radius {}",
            inner.radius(),
            outer.radius()
        )));
    }
    if inner.interior().is_empty() {
        return Err(LabError::InsufficientInterior("inner ball has no interior node".into()));
    }
    let in_outer = outer.is_interior_lookup();
    let h = g.h();
    let lap = |i: usize| -> Option<f64> {
        if !in_outer[i] {
            return None;
        }
        let mut s = 0.0;
        for axis in 0..4 {
            let mut e = [0isize; 4];
            e[axis] = 1;
            let p = g.offset(i, e)?;
            e[axis] = -1;
            let m = g.offset(i, e)?;
            s += u.at(p) - 2.0 * u.at(i) + u.at(m);
        }
        Some(s / (h * h))
    };
    let mut sup: f64 = 0.0;
    for &i in inner.interior() {
        let mut norm2 = 0.0;
        for axis in 0..4 {
            let mut e = [0isize; 4];
            e[axis] = 1;
            let p = g.offset(i, e);
            e[axis] = -1;
            let m = g.offset(i, e);
            let (lp, lm) = match (p.and_then(lap), m.and_then(lap)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(LabError::InsufficientInterior(format!(
                        "node {i} of the inner ball needs Laplacians outside the outer ball"
                    )))
                }
            };
            norm2 += ((lp - lm) / (2.0 * h)).powi(2);
        }
        sup = sup.max(norm2.sqrt());
    }
    let margin = if sup.is_finite() { 0.0 } else { -1.0 };
    Ok(EstimateVerdict::new("third_order", sup, f64::INFINITY, margin, inner.interior().len(), Some(h)))
}

/// Passes when the fine-grid value differs from the coarse one by under 50%.
pub fn third_order_stability(coarse: &EstimateVerdict, fine: &EstimateVerdict) -> EstimateVerdict {
    let change = if coarse.measured > 0.0 {
        (fine.measured - coarse.measured).abs() / coarse.measured
    } else if fine.measured == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    EstimateVerdict::new(
        "third_order_stability",
        change,
        0.5,
        0.5 - change,
        coarse.nodes + fine.nodes,
        fine.h,
    )
}

/// Passes iff every eigenvalue lies in `[lower, upper]`. `measured` holds the
/// smallest eigenvalue, `measured_max` the largest.
pub fn check_ellipticity_window(h: &HermitianField, lower: f64, upper: f64) -> Result<EstimateVerdict> {
    if !(lower <= upper) {
        return Err(LabError::InvalidArgument(format!("empty window [{lower}, {upper}]")));
    }
    if h.mats().is_empty() {
        return Err(LabError::EmptyField("no Hessians to check".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in h.mats() {
        let (a, b) = m.eigenvalues();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let margin = (lo - lower).min(upper - hi);
    let mut v = EstimateVerdict::new("ellipticity_window", lo, lower, margin, h.mats().len(), Some(h.grid().h()));
    v.measured_max = Some(hi);
    Ok(v)
}

/// Result of one seeded ordered pair in [`comparison_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCase {
    pub index: usize,
    /// True when the verdict comes from the rerun at half the spacing.
    pub refined: bool,
    pub verdict: EstimateVerdict,
}

/// `count` seeded ordered pairs on `B(0, radius)` with `n` nodes per
/// diameter: `f_a ≥ f_b + λ/10`, `φ_a ≤ φ_b`. A failing pair is rerun at `h/2`.
pub fn comparison_suite(
    count: usize,
    seed: u64,
    radius: f64,
    n: usize,
    opts: &SolverOptions,
) -> Result<Vec<ComparisonCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = 1.0;
    let mut out = Vec::with_capacity(count);
    for index in 0..count {
        let beta: f64 = rng.gen_range(0.0..0.5);
        let tau: f64 = rng.gen_range(0.0..1.0);
        let shift: f64 = rng.gen_range(0.0..0.2);
        let mut p = [0.0; 4];
        let mut c = [0.0; 4];
        for j in 0..4 {
            p[j] = rng.gen_range(-0.5..0.5);
            c[j] = rng.gen_range(-0.3..0.3);
        }
        let fb = move |z: &[f64; 4]| lambda + beta * dist(z, &p).powi(2);
        let fa = move |z: &[f64; 4]| fb(z) + lambda / 10.0 + tau;
        let phi_a = move |z: &[f64; 4]| z.iter().map(|v| v * v).sum::<f64>() + z.iter().zip(&c).map(|(v, w)| v * w).sum::<f64>();
        let phi_b = move |z: &[f64; 4]| phi_a(z) + shift;

        let run = |n: usize| -> Result<EstimateVerdict> {
            let grid = Grid4::centered([0.0; 4], 2.0 * radius / (n - 1) as f64, n + 2)?;
            let mask = BallMask::new(&grid, [0.0; 4], radius)?;
            let pa = DirichletProblem::from_sources(mask.clone(), &FnSource(fa), &FnSource(phi_a), lambda)?;
            let pb = DirichletProblem::from_sources(mask, &FnSource(fb), &FnSource(phi_b), lambda)?;
            let ra = solve_with(&pa, opts)?;
            let rb = solve_with(&pb, opts)?;
            let sup = pa.rhs().max_abs().max(pb.rhs().max_abs());
            check_comparison((&pa, &ra), (&pb, &rb), comparison_slack(grid.h(), sup))
        };
        let coarse = run(n)?;
        let case = if coarse.pass {
            ComparisonCase { index, refined: false, verdict: coarse }
        } else {
            ComparisonCase { index, refined: true, verdict: run(2 * n - 1)? }
        };
        out.push(case);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{complex_hessian, Herm2};
    use crate::solver::solve;
    use num_complex::Complex64;

    fn quadratic_problem(c: f64, n: usize) -> DirichletProblem {
        let grid = Grid4::centered([0.0; 4], 1.8 / (n - 1) as f64, n + 2).unwrap();
        let mask = BallMask::new(&grid, [0.0; 4], 0.9).unwrap();
        let q = |z: &[f64; 4]| z.iter().map(|v| v * v).sum::<f64>();
        DirichletProblem::from_sources(mask, &FnSource(move |_: &[f64; 4]| c), &FnSource(q), 1.0).unwrap()
    }

    #[test]
    fn comparison_of_a_solve_with_itself_is_exact() {
        let p = quadratic_problem(1.0, 7);
        let r = solve(&p, 1e-10, 30).unwrap();
        let v = check_comparison((&p, &r), (&p, &r), 0.0).unwrap();
        assert!(v.pass);
        assert_eq!(v.measured, 0.0);
    }

    #[test]
    fn larger_determinant_lies_below() {
        let pa = quadratic_problem(4.0, 7);
        let pb = quadratic_problem(1.0, 7);
        let ra = solve(&pa, 1e-10, 30).unwrap();
        let rb = solve(&pb, 1e-10, 30).unwrap();
        let h = pa.mask().grid().h();
        let v = check_comparison((&pa, &ra), (&pb, &rb), comparison_slack(h, 4.0)).unwrap();
        assert!(v.pass, "{v:?}");
        // swapping the roles reverses the rhs order
        assert!(matches!(
            check_comparison((&pb, &rb), (&pa, &ra), 1.0),
            Err(LabError::InvalidPair(_))
        ));
    }

    #[test]
    fn c11_rule_arithmetic() {
        let vals = [1.0, 1.5, 2.2];
        let v3 = check_c11_values(&vals, 3.0).unwrap();
        assert!(v3.pass);
        assert!((v3.measured - 2.2).abs() < 1e-15);
        assert!(!check_c11_values(&vals, 2.0).unwrap().pass);
        assert!(check_c11_values(&[1.0], 3.0).is_err());
        assert!(check_c11_uniform(&[], 3.0).is_err());
    }

    #[test]
    fn third_order_of_quadratic_vanishes() {
        let g = Grid4::centered([0.0; 4], 0.1, 13).unwrap();
        let u = GridField::from_fn(g, |z| z.iter().map(|v| v * v).sum()).unwrap();
        let outer = BallMask::new(&g, [0.0; 4], 0.55).unwrap();
        let inner = BallMask::new(&g, [0.0; 4], 0.3).unwrap();
        let v = check_third_order(&u, &inner, &outer).unwrap();
        assert!(v.measured < 1e-9, "{}", v.measured);
    }

    #[test]
    fn third_order_of_quartic_is_48_r() {
        let g = Grid4::centered([0.0; 4], 0.1, 13).unwrap();
        let u = GridField::from_fn(g, |z| z.iter().map(|v| v * v).sum::<f64>().powi(2)).unwrap();
        let outer = BallMask::new(&g, [0.0; 4], 0.55).unwrap();
        let inner = BallMask::new(&g, [0.0; 4], 0.3).unwrap();
        let rmax = inner
            .interior()
            .iter()
            .map(|&i| dist(&g.coord_flat(i), &[0.0; 4]))
            .fold(0.0, f64::max);
        let v = check_third_order(&u, &inner, &outer).unwrap();
        assert!((v.measured - 48.0 * rmax).abs() < 1e-6 * v.measured, "{} vs {}", v.measured, 48.0 * rmax);
        assert!(check_third_order(&u, &outer, &inner).is_err());
    }

    #[test]
    fn ellipticity_window_examples() {
        let g = Grid4::centered([0.0; 4], 0.1, 5).unwrap();
        let id = Herm2 { a11: 1.0, a22: 1.0, a12: Complex64::new(0.0, 0.0) };
        let h = HermitianField::uniform(g, vec![0, 1, 2], id);
        assert!(check_ellipticity_window(&h, 0.5, 2.0).unwrap().pass);
        let d = Herm2 { a11: 0.1, a22: 1.0, a12: Complex64::new(0.0, 0.0) };
        let h = HermitianField::uniform(g, vec![0], d);
        let v = check_ellipticity_window(&h, 0.5, 2.0).unwrap();
        assert!(!v.pass);
        assert!((v.measured - 0.1).abs() < 1e-15);
        assert_eq!(v.measured_max, Some(1.0));
    }

    #[test]
    fn ellipticity_of_quadratic_solution() {
        let g = Grid4::centered([0.0; 4], 0.1, 9).unwrap();
        let u = GridField::from_fn(g, |z| z.iter().map(|v| v * v).sum()).unwrap();
        let v = check_ellipticity_window(&complex_hessian(&u).unwrap(), 0.99, 1.01).unwrap();
        assert!(v.pass && v.margin > 0.0);
    }

    #[test]
    fn ledger_has_fixed_columns() {
        let v = check_c11_values(&[1.0, 2.0], 3.0).unwrap();
        let text = ledger_csv(&[v]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "estimate,measured,bound,margin,pass,nodes,h");
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 7);
        assert!(row.starts_with("c11_uniform,") && row.ends_with(",true,2,"));
    }
}
