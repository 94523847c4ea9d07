//! Damped Newton solver for `det(u_{i j̄}) = f` on a ball mask with Dirichlet data.
//!
//! Each step linearizes the determinant around the current iterate with the
//! clamped inverse-transpose coefficients and backtracks on the sup residual.
//! The assembled stencil matrix is non-symmetric wherever the coefficients vary
//! (its symmetric part is not the Jacobian and stalls Newton), so large systems
//! go to restarted GMRES and small ones to dense LU.

use std::fmt::Write as _;

use crate::error::{LabError, Result};
use crate::grid::{dist, fmt17, BallMask, FieldSource, FnSource, GridField, Point};
use crate::linalg::{conjugate_gradient, dense_lu, dense_solve, gmres, Csr};
use crate::ops::{second_diffs, Herm2, STENCIL_OFFSETS};

const NONE: u32 = u32::MAX;

/// Dirichlet problem on a ball mask. Values of `boundary` at every
/// non-interior node touched by the stencil are the prescribed data.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    mask: BallMask,
    rhs: GridField,
    boundary: GridField,
    floor: f64,
    guess: Option<GridField>,
}

impl DirichletProblem {
    pub fn new(mask: BallMask, rhs: GridField, boundary: GridField, floor: f64) -> Result<Self> {
        if rhs.grid() != mask.grid() || boundary.grid() != mask.grid() {
            return Err(LabError::InvalidProblem(
                "rhs, boundary and mask must share one grid".into(),
            ));
        }
        if !(floor > 0.0) {
            return Err(LabError::InvalidProblem(format!(
                "lower bound λ must be positive (f ≥ λ > 0), got {floor}"
            )));
        }
        if mask.interior().is_empty() {
            return Err(LabError::InvalidProblem("mask has no interior nodes".into()));
        }
        for &i in mask.interior() {
            let v = rhs.at(i);
            if !(v >= floor) {
                return Err(LabError::InvalidProblem(format!(
                    "rhs {v} at node {i} violates f ≥ λ > 0 with λ = {floor}"
                )));
            }
        }
        Ok(DirichletProblem {
            mask,
            rhs,
            boundary,
            floor,
            guess: None,
        })
    }

    /// Interior values used as the starting iterate when the quadratic
    /// majorant fails to be plurisubharmonic on the grid.
    pub fn with_guess(mut self, guess: GridField) -> Result<Self> {
        if guess.grid() != self.mask.grid() {
            return Err(LabError::InvalidProblem("guess must live on the mask grid".into()));
        }
        self.guess = Some(guess);
        Ok(self)
    }

    /// Samples `rhs` and `boundary` sources on the mask's grid. The boundary
    /// source supplies the halo data and, on interior nodes, the fallback guess.
    pub fn from_sources(
        mask: BallMask,
        rhs: &dyn FieldSource,
        boundary: &dyn FieldSource,
        floor: f64,
    ) -> Result<Self> {
        let g = *mask.grid();
        let mut f = vec![0.0; g.len()];
        for &i in mask.interior() {
            f[i] = rhs.value_at(&g.coord_flat(i))?;
        }
        let bvals = halo_values(&mask, boundary)?;
        let mut guess = vec![0.0; g.len()];
        for &i in mask.interior() {
            guess[i] = boundary.value_at(&g.coord_flat(i))?;
        }
        DirichletProblem::new(mask, GridField::new(g, f)?, bvals, floor)?.with_guess(GridField::new(g, guess)?)
    }

    pub fn mask(&self) -> &BallMask {
        &self.mask
    }

    pub fn rhs(&self) -> &GridField {
        &self.rhs
    }

    pub fn boundary(&self) -> &GridField {
        &self.boundary
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }
}

/// Field that carries `source` on the stencil halo of `mask` and zero elsewhere.
pub fn halo_values(mask: &BallMask, source: &dyn FieldSource) -> Result<GridField> {
    let g = *mask.grid();
    let mut v = vec![0.0; g.len()];
    for i in mask.stencil_halo() {
        v[i] = source.value_at(&g.coord_flat(i))?;
    }
    GridField::new(g, v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Systems with at most this many unknowns use the dense direct path.
    pub dense_threshold: usize,
    pub max_linear_iter: usize,
    /// Krylov subspace size between GMRES restarts.
    pub gmres_restart: usize,
    pub max_backtracks: usize,
}

impl SolverOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        SolverOptions {
            tol,
            max_iter,
            dense_threshold: 1500,
            max_linear_iter: 5000,
            gmres_restart: 40,
            max_backtracks: 30,
        }
    }
}

/// One Newton iteration: residual before the step, accepted step length and
/// number of clamped nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub residual: f64,
    pub step: f64,
    pub clamps: usize,
}

/// Which starting iterate the Newton loop used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Majorant,
    SourceTrace,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: GridField,
    pub iterations: usize,
    pub residual: f64,
    pub min_eigenvalue: f64,
    pub clamp_count: usize,
    pub history: Vec<IterRecord>,
    pub start: Start,
}

impl SolveResult {
    /// Diagnostics as CSV rows `iter,residual,step,clamps`.
    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from("iter,residual,step,clamps\n");
        for r in &self.history {
            let _ = writeln!(s, "{},{},{},{}", r.iter, fmt17(r.residual), fmt17(r.step), r.clamps);
        }
        s
    }
}

/// Unknown numbering and stencil neighbour tables of one mask.
struct Layout {
    interior: Vec<usize>,
    /// For unknown `k`, the flat index of each of the 33 stencil nodes.
    stencil: Vec<[usize; 33]>,
    /// For unknown `k`, the unknown index of each stencil node, or `NONE`.
    unknown: Vec<[u32; 33]>,
    opposite: [usize; 33],
}

impl Layout {
    fn new(mask: &BallMask) -> Self {
        let g = mask.grid();
        let mut map = vec![NONE; g.len()];
        for (k, &i) in mask.interior().iter().enumerate() {
            map[i] = k as u32;
        }
        let deltas: Vec<isize> = STENCIL_OFFSETS.iter().map(|o| mask.flat_delta(o)).collect();
        let mut stencil = Vec::with_capacity(mask.interior().len());
        let mut unknown = Vec::with_capacity(mask.interior().len());
        for &i in mask.interior() {
            let mut s = [0usize; 33];
            let mut u = [NONE; 33];
            for o in 0..33 {
                let j = (i as isize + deltas[o]) as usize;
                s[o] = j;
                u[o] = map[j];
            }
            stencil.push(s);
            unknown.push(u);
        }
        let mut opposite = [0usize; 33];
        for (o, off) in STENCIL_OFFSETS.iter().enumerate() {
            let neg = [-off[0], -off[1], -off[2], -off[3]];
            opposite[o] = STENCIL_OFFSETS.iter().position(|x| *x == neg).unwrap();
        }
        Layout {
            interior: mask.interior().to_vec(),
            stencil,
            unknown,
            opposite,
        }
    }

    fn len(&self) -> usize {
        self.interior.len()
    }
}

/// Stencil weights of `Σ_ab M_ab ∂_a∂_b` in the order of [`STENCIL_OFFSETS`].
fn stencil_weights(m: &[[f64; 4]; 4], h2: f64) -> [f64; 33] {
    let mut w = [0.0; 33];
    let mut n = 1;
    let mut trace = 0.0;
    for a in 0..4 {
        w[n] = m[a][a] / h2;
        w[n + 1] = m[a][a] / h2;
        trace += m[a][a];
        n += 2;
    }
    w[0] = -2.0 * trace / h2;
    for a in 0..4 {
        for b in a + 1..4 {
            let c = m[a][b] / (2.0 * h2);
            w[n] = c;
            w[n + 1] = -c;
            w[n + 2] = -c;
            w[n + 3] = c;
            n += 4;
        }
    }
    w
}

/// Assembles `-A` on unknowns from per-row stencil weights, or its symmetric
/// part `-(A + Aᵀ)/2` when `symmetric` is set.
fn assemble(layout: &Layout, weights: &[[f64; 33]], symmetric: bool) -> Csr {
    let n = layout.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n * 33);
    let mut vals = Vec::with_capacity(n * 33);
    row_ptr.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(33);
    for k in 0..n {
        entries.clear();
        for o in 0..33 {
            let j = layout.unknown[k][o];
            if j == NONE {
                continue;
            }
            let j = j as usize;
            let a_kj = weights[k][o];
            let v = if symmetric {
                -0.5 * (a_kj + weights[j][layout.opposite[o]])
            } else {
                -a_kj
            };
            entries.push((j, v));
        }
        entries.sort_by_key(|e| e.0);
        for &(j, v) in entries.iter() {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Csr {
        n,
        row_ptr,
        cols,
        vals,
    }
}

/// Newton correction: exact LU on small systems, restarted GMRES otherwise.
fn solve_newton(layout: &Layout, weights: &[[f64; 33]], b: &[f64], rel_tol: f64, opts: &SolverOptions) -> Vec<f64> {
    let a = assemble(layout, weights, false);
    if a.n <= opts.dense_threshold {
        if let Some((x, _)) = dense_lu(&a, b) {
            return x;
        }
    }
    gmres(&a, b, rel_tol, opts.gmres_restart, opts.max_linear_iter).0
}

fn solve_linear(a: &Csr, b: &[f64], rel_tol: f64, opts: &SolverOptions) -> Vec<f64> {
    if a.n <= opts.dense_threshold {
        if let Some((x, _)) = dense_solve(a, b) {
            return x;
        }
    }
    conjugate_gradient(a, b, rel_tol, opts.max_linear_iter).0
}

/// Discrete harmonic extension of `data` (given on non-interior nodes) into the mask.
fn harmonic_extension(layout: &Layout, h: f64, data: &[f64], opts: &SolverOptions) -> Vec<f64> {
    // axis offsets occupy stencil slots 1..=8
    let h2 = h * h;
    let mut m = [[0.0; 4]; 4];
    for (a, row) in m.iter_mut().enumerate() {
        row[a] = 1.0;
    }
    let w = stencil_weights(&m, h2);
    let n = layout.len();
    let weights = vec![w; n];
    let a = assemble(layout, &weights, true);
    let mut b = vec![0.0; n];
    for k in 0..n {
        for o in 1..=8 {
            if layout.unknown[k][o] == NONE {
                b[k] += w[o] * data[layout.stencil[k][o]];
            }
        }
    }
    solve_linear(&a, &b, 1e-13, opts)
}

/// Per-unknown complex Hessians of the full-grid values `u`.
fn hessians(layout: &Layout, mask: &BallMask, u: &[f64]) -> Vec<Herm2> {
    let g = mask.grid();
    layout
        .interior
        .iter()
        .map(|&i| second_diffs(g, u, i).complex_hessian())
        .collect()
}

fn sup_residual(h: &[Herm2], f: &[f64]) -> f64 {
    h.iter()
        .zip(f)
        .map(|(m, f)| (m.det() - f).abs())
        .fold(0.0, f64::max)
}

/// Solves the problem to sup residual `tol` with default options.
pub fn solve(problem: &DirichletProblem, tol: f64, max_iter: usize) -> Result<SolveResult> {
    solve_with(problem, &SolverOptions::new(tol, max_iter))
}

pub fn solve_with(problem: &DirichletProblem, opts: &SolverOptions) -> Result<SolveResult> {
    if !(opts.tol > 0.0) {
        return Err(LabError::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let mask = &problem.mask;
    let g = *mask.grid();
    let h2 = g.h() * g.h();
    let layout = Layout::new(mask);
    let n = layout.len();
    let f: Vec<f64> = layout.interior.iter().map(|&i| problem.rhs.at(i)).collect();
    let x0 = mask.center();

    // initial iterate u⁰ = φ_u + A(q − φ_q) with q = |z − x0|² and φ the harmonic
    // extensions of the halo data; A starts at √max f + 1 and grows until u⁰ is a
    // discrete subsolution (λ_min(H(u⁰)) ≥ √max f + 1, hence det ≥ f)
    let fmax = f.iter().fold(0.0f64, |m, v| m.max(*v));
    let target = fmax.sqrt() + 1.0;
    let data = problem.boundary.values();
    let q: Vec<f64> = (0..g.len()).map(|i| dist(&g.coord_flat(i), &x0).powi(2)).collect();
    let extend = |values: &[f64]| {
        let phi = harmonic_extension(&layout, g.h(), values, opts);
        let mut full = values.to_vec();
        for (k, &i) in layout.interior.iter().enumerate() {
            full[i] = phi[k];
        }
        full
    };
    let phi_u = extend(data);
    let phi_q = extend(&q);
    let bump: Vec<f64> = q.iter().zip(&phi_q).map(|(a, b)| a - b).collect();
    let min_eig = |v: &[f64]| {
        hessians(&layout, mask, v)
            .iter()
            .map(|m| m.eigenvalues().0)
            .fold(f64::INFINITY, f64::min)
    };
    let (m_u, m_q) = (min_eig(&phi_u), min_eig(&bump));
    let mut a_quad = target;
    if m_q > 0.0 && m_u + a_quad * m_q < target {
        a_quad = (target - m_u) / m_q;
    }
    let mut u: Vec<f64> = phi_u.iter().zip(&bump).map(|(p, b)| p + a_quad * b).collect();
    let mut start = Start::Majorant;
    if min_eig(&u) <= 0.0 {
        // near an irregular boundary layer the majorant can leave the psh cone;
        // the interior trace of the boundary source is the fallback start
        if let Some(guess) = &problem.guess {
            let mut w = data.to_vec();
            for &i in &layout.interior {
                w[i] = guess.at(i);
            }
            if min_eig(&w) > 0.0 {
                u = w;
                start = Start::SourceTrace;
            }
        }
    }

    let mut history = Vec::new();
    let mut clamp_streak = 0;
    let mut hs = hessians(&layout, mask, &u);
    let mut residual = sup_residual(&hs, &f);
    let mut last_clamps = 0;
    for iter in 0..opts.max_iter {
        if residual <= opts.tol {
            break;
        }
        let scale = hs.iter().fold(0.0f64, |m, a| m.max(0.5 * a.trace().abs()));
        let eig_floor = 1e-8 * scale.max(f64::MIN_POSITIVE);
        let mut weights = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut clamps = 0;
        for k in 0..n {
            let (coef, clamped) = hs[k]
                .inverse_transpose(eig_floor)
                .expect("positive floor always yields coefficients");
            clamps += clamped as usize;
            weights.push(stencil_weights(&coef.real_operator(), h2));
            // det(H_c) · Σ B δ_{i j̄} = f − det(H)
            b.push(-(f[k] - hs[k].det()) * coef.det());
        }
        last_clamps = clamps;
        if 2 * clamps > n {
            clamp_streak += 1;
            if clamp_streak >= 3 {
                return Err(LabError::Degeneracy { clamped: clamps, nodes: n });
            }
        } else {
            clamp_streak = 0;
        }
        // linear accuracy only needs to reach the remaining distance to tol
        let rel_tol = (0.1 * opts.tol / residual).clamp(1e-10, 1e-2);
        let delta = solve_newton(&layout, &weights, &b, rel_tol, opts);

        let mut step = 1.0;
        let mut accepted = false;
        let mut trial = u.clone();
        for _ in 0..=opts.max_backtracks {
            for (k, &i) in layout.interior.iter().enumerate() {
                trial[i] = u[i] + step * delta[k];
            }
            let ht = hessians(&layout, mask, &trial);
            let rt = sup_residual(&ht, &f);
            if rt < residual {
                history.push(IterRecord {
                    iter,
                    residual,
                    step,
                    clamps,
                });
                std::mem::swap(&mut u, &mut trial);
                hs = ht;
                residual = rt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            history.push(IterRecord {
                iter,
                residual,
                step: 0.0,
                clamps,
            });
            return Err(LabError::NonConvergence {
                iterations: iter + 1,
                residual,
                history: history.iter().map(|r| r.residual).collect(),
            });
        }
    }
    history.push(IterRecord {
        iter: history.len(),
        residual,
        step: 0.0,
        clamps: last_clamps,
    });
    if residual > opts.tol {
        return Err(LabError::NonConvergence {
            iterations: opts.max_iter,
            residual,
            history: history.iter().map(|r| r.residual).collect(),
        });
    }
    let min_eigenvalue = hs.iter().map(|m| m.eigenvalues().0).fold(f64::INFINITY, f64::min);
    Ok(SolveResult {
        solution: GridField::new(g, u)?,
        iterations: history.len() - 1,
        residual,
        min_eigenvalue,
        clamp_count: last_clamps,
        history,
        start,
    })
}

/// Frozen right-hand side problem: `det = c` on the mask with boundary values
/// taken from `parent` on the stencil halo.
pub fn solve_frozen(
    parent: &dyn FieldSource,
    mask: &BallMask,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    solve_frozen_with(parent, mask, c, &SolverOptions::new(tol, max_iter))
}

pub fn solve_frozen_with(
    parent: &dyn FieldSource,
    mask: &BallMask,
    c: f64,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let problem = DirichletProblem::from_sources(mask.clone(), &FnSource(|_: &Point| c), parent, c)?;
    solve_with(&problem, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm, Grid4};

    fn sq(p: &Point) -> f64 {
        p.iter().map(|x| x * x).sum()
    }

    fn ball9() -> BallMask {
        let g = Grid4::new([-1.0; 4], 0.25, [9; 4]).unwrap();
        BallMask::new(&g, [0.0; 4], 0.9).unwrap()
    }

    fn sup_err(res: &SolveResult, mask: &BallMask, exact: impl Fn(&Point) -> f64) -> f64 {
        let g = mask.grid();
        mask.interior()
            .iter()
            .map(|&i| (res.solution.at(i) - exact(&g.coord_flat(i))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn stencil_weights_reproduce_quadratics() {
        // Σ M_ab ∂_a∂_b of a quadratic form p·Qp equals 2 tr(MQ).
        let m = Herm2 {
            a11: 1.3,
            a22: 0.7,
            a12: num_complex::Complex64::new(0.2, -0.1),
        }
        .real_operator();
        let q = [[1.0, 0.2, 0.0, 0.3], [0.2, 2.0, 0.1, 0.0], [0.0, 0.1, 0.5, 0.4], [0.3, 0.0, 0.4, 1.0]];
        let w = stencil_weights(&m, 0.01);
        let qf = |p: [f64; 4]| {
            let mut s = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    s += p[a] * q[a][b] * p[b];
                }
            }
            s
        };
        let mut lhs = 0.0;
        for (o, off) in STENCIL_OFFSETS.iter().enumerate() {
            let p = [0.1 * off[0] as f64, 0.1 * off[1] as f64, 0.1 * off[2] as f64, 0.1 * off[3] as f64];
            lhs += w[o] * qf(p);
        }
        let mut rhs = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                rhs += 2.0 * m[a][b] * q[b][a];
            }
        }
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn identity_solution_is_recovered() {
        let mask = ball9();
        let p = DirichletProblem::from_sources(mask.clone(), &FnSource(|_: &Point| 1.0), &FnSource(sq), 1.0).unwrap();
        let r = solve(&p, 1e-10, 30).unwrap();
        assert!(r.residual <= 1e-10);
        assert!(sup_err(&r, &mask, sq) <= 1e-9);
        assert!(r.min_eigenvalue > 0.0);
        for w in r.history.windows(2) {
            assert!(w[1].residual < w[0].residual);
        }
    }

    #[test]
    fn scaled_identity_solution_is_recovered() {
        let mask = ball9();
        let a = 2.5;
        let p = DirichletProblem::from_sources(
            mask.clone(),
            &FnSource(move |_: &Point| a * a),
            &FnSource(move |q: &Point| a * sq(q)),
            1.0,
        )
        .unwrap();
        let r = solve(&p, 1e-10, 30).unwrap();
        assert!(sup_err(&r, &mask, |q| a * sq(q)) <= 1e-8);
    }

    #[test]
    fn rhs_below_floor_is_invalid() {
        let mask = ball9();
        let e = DirichletProblem::from_sources(mask, &FnSource(|p: &Point| norm(p)), &FnSource(sq), 0.5)
            .unwrap_err();
        assert!(matches!(e, LabError::InvalidProblem(_)));
    }

    #[test]
    fn iteration_cap_reports_history() {
        let mask = ball9();
        let p = DirichletProblem::from_sources(mask, &FnSource(|_: &Point| 3.0), &FnSource(sq), 1.0).unwrap();
        match solve(&p, 1e-14, 1) {
            Err(LabError::NonConvergence { history, .. }) => assert!(!history.is_empty()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn frozen_examples() {
        let mask = ball9();
        let parent = FnSource(sq);
        let r = solve_frozen(&parent, &mask, 1.0, 1e-10, 30).unwrap();
        assert!(sup_err(&r, &mask, sq) <= 1e-9);
        // larger determinant with the same boundary lies strictly below
        let r4 = solve_frozen(&parent, &mask, 4.0, 1e-10, 30).unwrap();
        let g = mask.grid();
        for &i in mask.interior() {
            assert!(r4.solution.at(i) < sq(&g.coord_flat(i)));
        }
        let away = BallMask::new(&Grid4::new([5.0; 4], 0.25, [9; 4]).unwrap(), [6.0; 4], 0.9).unwrap();
        let gf = GridField::from_fn(*mask.grid(), sq).unwrap();
        assert!(matches!(
            solve_frozen(&gf, &away, 1.0, 1e-10, 30),
            Err(LabError::OutOfDomain(_))
        ));
    }

    #[test]
    fn determinism() {
        let mask = ball9();
        let f = FnSource(|p: &Point| 1.0 + 0.3 * p[0] * p[0]);
        let p = DirichletProblem::from_sources(mask, &f, &FnSource(sq), 1.0).unwrap();
        let a = solve(&p, 1e-10, 30).unwrap();
        let b = solve(&p, 1e-10, 30).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.history, b.history);
        assert!(a.diagnostics_csv().starts_with("iter,residual,step,clamps\n"));
    }
}
