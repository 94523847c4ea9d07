//! Multiscale cascade of frozen right-hand-side problems on nested balls.
//!
//! Level `k` solves `det(u_k) = f(x0)` on `B(x0, dρᵏ)` with boundary values of
//! the ambient solution. Each level has its own grid with a fixed number of
//! nodes per diameter, so every level sees the same discrete geometry. The
//! corrections `v_k = u_k − u_{k+1}` are measured at `x0` with derivatives
//! taken at each solution's native spacing, and on `B(x0, dρ^{k+2})` for the
//! weighted interior quantities.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{add_scaled, dist, fmt17, BallMask, FieldSource, Grid4, GridField, Point};
use crate::ops::{
    averaged_coefficients, complex_hessian_on, first_diffs, norms, second_diffs, ComplexSecond,
    SecondDiffs,
};
use crate::solver::{solve_frozen_with, solve_with, DirichletProblem, SolverOptions};

/// Sampled pairs for the Hölder seminorm of each correction.
const PAIR_BUDGET: usize = 64;
const QUADRATURE_POINTS: usize = 5;

/// The nested balls `B(x0, dρᵏ)`, `k = 0..=K`, and their level grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSystem {
    pub center: Point,
    pub d: f64,
    pub rho: f64,
    pub depth: usize,
    /// Grid nodes across one diameter (odd).
    pub nodes: usize,
}

impl BallSystem {
    pub fn new(center: Point, d: f64, rho: f64, depth: usize, nodes: usize) -> Result<Self> {
        if !(d > 0.0) {
            return Err(LabError::InvalidArgument(format!("base radius d = {d} must be positive")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(LabError::InvalidArgument(format!("ratio ρ = {rho} must lie in (0, 1)")));
        }
        if depth < 1 {
            return Err(LabError::InvalidArgument("depth K must be at least 1".into()));
        }
        // the stencils of B_{k+2} on the level-k lattice reach (√3 + √2)h_k from
        // x0 and must stay inside the level-(k+1) ball of radius (nodes − 1)h_k/4
        if nodes < 15 || nodes % 2 == 0 {
            return Err(LabError::InvalidArgument(format!(
                "nodes per diameter must be odd and ≥ 15, got {nodes}"
            )));
        }
        Ok(BallSystem {
            center,
            d,
            rho,
            depth,
            nodes,
        })
    }

    /// Defaults `ρ = 1/2`, `K = 4`, 17 nodes per diameter.
    pub fn standard(center: Point, d: f64) -> Result<Self> {
        BallSystem::new(center, d, 0.5, 4, 17)
    }

    pub fn recentered(&self, center: Point) -> Self {
        BallSystem { center, ..*self }
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.d * self.rho.powi(k as i32)
    }

    pub fn spacing(&self, k: usize) -> f64 {
        2.0 * self.radius(k) / (self.nodes - 1) as f64
    }

    /// Level grid: the ball plus two layers of nodes on every side.
    pub fn grid(&self, k: usize) -> Result<Grid4> {
        Grid4::centered(self.center, self.spacing(k), self.nodes + 4)
    }

    pub fn mask(&self, k: usize) -> Result<BallMask> {
        BallMask::new(&self.grid(k)?, self.center, self.radius(k))
    }
}

/// Per-solve diagnostics of `u_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub k: usize,
    pub radius: f64,
    pub h: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `sup_{B_k} |u_k − u|`.
    pub barrier: f64,
    /// `ω_f(dρᵏ, x0)`.
    pub omega: f64,
    /// `(dρᵏ)² ω + 20 h²`.
    pub barrier_bound: f64,
    /// Eigenvalue range of the complex Hessian on `B_{k+1}`.
    pub ell_min: f64,
    pub ell_max: f64,
    /// Sup of second differences on `B_{k+1}`.
    pub c11: f64,
}

/// Per-level measurements of the correction `v_k = u_k − u_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub k: usize,
    pub radius: f64,
    pub h: f64,
    /// `|v_k(x0)|`, the sup over `B_{k+4}`.
    pub v_c0: f64,
    pub v_c1: f64,
    /// Sup of second differences of `v_k` on `B_{k+2}`.
    pub v_c2: f64,
    /// Second differences at `x0` alone; zero by symmetry at a radial anchor.
    pub v_c2_center: f64,
    /// Sampled `C^{2,γ}` seminorm on `B_{k+2}`.
    pub v_holder: f64,
    /// Sup of `|v_k|` on `B_{k+2}`.
    pub v_c0_wide: f64,
    pub omega: f64,
    /// `sup |Σ b^{i j̄} v_{k;i j̄}|` on `B_{k+2}` with averaged coefficients.
    pub eq_residual: f64,
    pub eq_relative: f64,
    /// Weighted interior norm over `C⁰`, both on `B_{k+2}`.
    pub schauder: f64,
}

impl LevelRecord {
    pub const CSV_HEADER: &'static str =
        "k,radius,h,v_c0,v_c1,v_c2,v_holder,v_c0_wide,v_c2_center,omega,eq_residual,eq_relative,schauder";

    fn csv_row(&self) -> String {
        let vals = [
            self.radius,
            self.h,
            self.v_c0,
            self.v_c1,
            self.v_c2,
            self.v_holder,
            self.v_c0_wide,
            self.v_c2_center,
            self.omega,
            self.eq_residual,
            self.eq_relative,
            self.schauder,
        ];
        let mut s = self.k.to_string();
        for v in vals {
            s.push(',');
            s.push_str(&fmt17(v));
        }
        s
    }
}

/// Least-squares fit `value ≈ c·ρ^{s k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub constant: f64,
    /// Root-mean-square residual of the fit in natural log.
    pub residual: f64,
    pub first_level: usize,
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fits {
    pub c0: Option<DecayFit>,
    pub c1: Option<DecayFit>,
    pub c2: Option<DecayFit>,
    pub holder: Option<DecayFit>,
}

/// Limit second derivatives at the center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WExtrapolation {
    /// Partial sum at depth K: the complex second derivatives of `u_K` at `x0`.
    pub w: ComplexSecond,
    /// Partial sums `S_j`, `j = 0..=K`.
    pub partial_sums: Vec<ComplexSecond>,
    /// Estimated size of the neglected tail `Σ_{k ≥ K} ‖v_k‖_{C²}`.
    pub tail: f64,
    /// Successive partial sums differ by more than twice the tail.
    pub non_cauchy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub system: BallSystem,
    pub gamma: f64,
    pub tol: f64,
    pub f_center: f64,
    pub levels: Vec<LevelRecord>,
    pub solves: Vec<SolveRecord>,
    /// Second differences of each `u_k` at `x0`, native spacing.
    pub center_second: Vec<[f64; 10]>,
    pub partial_sums: Vec<ComplexSecond>,
    pub fits: Option<Fits>,
    pub w: Option<WExtrapolation>,
    pub partial: bool,
}

impl CascadeReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(LevelRecord::CSV_HEADER);
        s.push('\n');
        for l in &self.levels {
            s.push_str(&l.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-solve rows `k,radius,h,iterations,residual,barrier,omega,barrier_bound,ell_min,ell_max,c11`.
    pub fn solves_csv(&self) -> String {
        let mut s =
            String::from("k,radius,h,iterations,residual,barrier,omega,barrier_bound,ell_min,ell_max,c11\n");
        for r in &self.solves {
            let _ = write!(s, "{},{},{},{}", r.k, fmt17(r.radius), fmt17(r.h), r.iterations);
            for v in [r.residual, r.barrier, r.omega, r.barrier_bound, r.ell_min, r.ell_max, r.c11] {
                s.push(',');
                s.push_str(&fmt17(v));
            }
            s.push('\n');
        }
        s
    }
}

/// A finished (or partially finished) cascade together with its level solutions.
#[derive(Debug, Clone)]
pub struct Cascade {
    pub report: CascadeReport,
    pub solutions: Vec<GridField>,
}

impl Cascade {
    pub fn system(&self) -> &BallSystem {
        &self.report.system
    }

    /// Native second differences of `u_k` at the center.
    pub fn center_diffs(&self, k: usize) -> SecondDiffs {
        let u = &self.solutions[k];
        let c = u.grid().nearest_node(&self.report.system.center).expect("center is a node");
        second_diffs(u.grid(), u.values(), c)
    }
}

/// Values of `field` at the nodes of `target`, injected where nodes coincide.
fn inject(field: &GridField, target: &Grid4) -> Result<GridField> {
    let g = field.grid();
    let tol = 1e-9 * g.h();
    let mut out = Vec::with_capacity(target.len());
    for i in 0..target.len() {
        let p = target.coord_flat(i);
        let v = match g.nearest_node(&p) {
            Some(j) if dist(&g.coord_flat(j), &p) <= tol => field.at(j),
            _ => field.interpolate(&p)?,
        };
        out.push(v);
    }
    GridField::new(*target, out)
}

fn log_linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64, f64)> {
    // returns (slope, intercept, slope standard error, rms residual)
    let n = xs.len();
    if n < 2 || ys.iter().any(|y| !y.is_finite()) {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = if n > 2 {
        (sse / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, intercept, se, (sse / n as f64).sqrt()))
}

/// Fits `values[k] ≈ c·ρ^{s k}` over `k ≥ first`. `None` when any value is not positive.
pub fn fit_decay(values: &[f64], rho: f64, first: usize) -> Option<DecayFit> {
    if values.len() < first + 2 {
        return None;
    }
    let used = &values[first..];
    if used.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let ks: Vec<f64> = (first..values.len()).map(|k| k as f64).collect();
    let logs: Vec<f64> = used.iter().map(|v| v.ln()).collect();
    let (slope, intercept, _, rms) = log_linear_fit(&ks, &logs)?;
    Some(DecayFit {
        exponent: slope / rho.ln(),
        constant: intercept.exp(),
        residual: rms,
        first_level: first,
        levels: used.len(),
    })
}

fn fits_of(levels: &[LevelRecord], rho: f64) -> Fits {
    let col = |f: fn(&LevelRecord) -> f64| levels.iter().map(f).collect::<Vec<_>>();
    Fits {
        c0: fit_decay(&col(|l| l.v_c0), rho, 1),
        c1: fit_decay(&col(|l| l.v_c1), rho, 1),
        c2: fit_decay(&col(|l| l.v_c2), rho, 1),
        holder: fit_decay(&col(|l| l.v_holder), rho, 1),
    }
}

/// Runs all levels; returns the cascade and, when a level fails, the error.
/// Failed runs keep every completed level and set `partial`.
pub fn run_cascade_partial(
    u: &dyn FieldSource,
    f: &dyn FieldSource,
    system: &BallSystem,
    gamma: f64,
    opts: &SolverOptions,
) -> (Cascade, Option<LabError>) {
    let mut cascade = Cascade {
        report: CascadeReport {
            system: *system,
            gamma,
            tol: opts.tol,
            f_center: f64::NAN,
            levels: Vec::new(),
            solves: Vec::new(),
            center_second: Vec::new(),
            partial_sums: Vec::new(),
            fits: None,
            w: None,
            partial: true,
        },
        solutions: Vec::new(),
    };
    let err = fill_cascade(&mut cascade, u, f, gamma, opts).err();
    (cascade, err)
}

/// Runs the cascade; any failure is reported as a cascade-aborted error.
pub fn run_cascade(
    u: &dyn FieldSource,
    f: &dyn FieldSource,
    system: &BallSystem,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<Cascade> {
    match run_cascade_partial(u, f, system, gamma, opts) {
        (c, None) => Ok(c),
        (_, Some(e)) => Err(e),
    }
}

fn fill_cascade(
    cascade: &mut Cascade,
    u: &dyn FieldSource,
    f: &dyn FieldSource,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<()> {
    let system = cascade.report.system;
    let depth = system.depth;
    if depth < 3 {
        return Err(LabError::FitImpossible(format!(
            "depth K = {depth} gives fewer than 3 correction levels"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(LabError::InvalidArgument(format!("γ = {gamma} must lie in (0, 1)")));
    }
    let x0 = system.center;
    let abort = |level: usize, completed: usize, e: LabError| LabError::CascadeAborted {
        level,
        completed,
        reason: e.to_string(),
    };
    let fc = f.value_at(&x0).map_err(|e| abort(0, 0, e))?;
    cascade.report.f_center = fc;

    for k in 0..=depth {
        let rec = solve_level(u, f, &system, k, fc, opts).map_err(|e| abort(k, k, e))?;
        cascade.report.solves.push(rec.0);
        cascade.report.center_second.push(rec.2.entries());
        cascade.report.partial_sums.push(rec.2.complex_entries());
        cascade.solutions.push(rec.1);
        if k > 0 {
            let lvl = correction_level(cascade, k - 1, gamma).map_err(|e| abort(k, k, e))?;
            cascade.report.levels.push(lvl);
        }
    }
    let fits = fits_of(&cascade.report.levels, system.rho);
    cascade.report.fits = Some(fits);
    cascade.report.w = Some(extrapolate_w(&cascade.report)?);
    cascade.report.partial = false;
    Ok(())
}

fn solve_level(
    u: &dyn FieldSource,
    f: &dyn FieldSource,
    system: &BallSystem,
    k: usize,
    fc: f64,
    opts: &SolverOptions,
) -> Result<(SolveRecord, GridField, SecondDiffs)> {
    let mask = system.mask(k)?;
    let g = *mask.grid();
    let res = solve_frozen_with(u, &mask, fc, opts)?;
    let sol = res.solution;
    let x0 = system.center;
    let r = system.radius(k);
    let h = g.h();

    let mut barrier: f64 = 0.0;
    for &i in mask.interior() {
        barrier = barrier.max((sol.at(i) - u.value_at(&g.coord_flat(i))?).abs());
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in mask.closure() {
        let v = f.value_at(&g.coord_flat(i))?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let omega = hi - lo;

    let inner: Vec<usize> = mask
        .interior()
        .iter()
        .copied()
        .filter(|&i| dist(&g.coord_flat(i), &x0) < r / 2.0)
        .collect();
    let (mut ell_min, mut ell_max, mut c11) = (f64::INFINITY, 0.0f64, 0.0f64);
    for &i in &inner {
        let d = second_diffs(&g, sol.values(), i);
        let (a, b) = d.complex_hessian().eigenvalues();
        ell_min = ell_min.min(a);
        ell_max = ell_max.max(b);
        c11 = c11.max(d.max_abs());
    }
    let c = g.nearest_node(&x0).expect("center lies on its level grid");
    let center = second_diffs(&g, sol.values(), c);
    Ok((
        SolveRecord {
            k,
            radius: r,
            h,
            iterations: res.iterations,
            residual: res.residual,
            barrier,
            omega,
            barrier_bound: r * r * omega + 20.0 * h * h,
            ell_min,
            ell_max,
            c11,
        },
        sol,
        center,
    ))
}

fn correction_level(cascade: &Cascade, k: usize, gamma: f64) -> Result<LevelRecord> {
    let system = cascade.report.system;
    let x0 = system.center;
    let (uk, uk1) = (&cascade.solutions[k], &cascade.solutions[k + 1]);
    let (gk, gk1) = (uk.grid(), uk1.grid());
    let (ck, ck1) = (gk.nearest_node(&x0).unwrap(), gk1.nearest_node(&x0).unwrap());

    let v_c0 = (uk.at(ck) - uk1.at(ck1)).abs();
    let (d1k, d1k1) = (first_diffs(gk, uk.values(), ck), first_diffs(gk1, uk1.values(), ck1));
    let v_c1 = (0..4).fold(0.0f64, |m, a| m.max((d1k[a] - d1k1[a]).abs()));
    let v_c2_center = cascade.center_diffs(k).max_abs_diff(&cascade.center_diffs(k + 1));

    // B_{k+2} on the level-k lattice: radius two cells
    let h = gk.h();
    let sub = Grid4::centered(x0, h, 5)?;
    let a = inject(uk, &sub)?;
    let b = inject(uk1, &sub)?;
    let v: Vec<f64> = a.values().iter().zip(b.values()).map(|(p, q)| p - q).collect();
    let v = GridField::new(sub, v)?;
    let mask = BallMask::new(&sub, x0, 2.0 * h)?;
    let nr = norms(&v, &mask, gamma, PAIR_BUDGET)?;

    let ha = complex_hessian_on(&a, mask.interior())?;
    let hb = complex_hessian_on(&b, mask.interior())?;
    let hv = complex_hessian_on(&v, mask.interior())?;
    let coef = averaged_coefficients(&ha, &hb, QUADRATURE_POINTS)?;
    let (mut eq_residual, mut eq_scale) = (0.0f64, 0.0f64);
    for (bm, dm) in coef.mats().iter().zip(hv.mats()) {
        eq_residual = eq_residual.max(bm.contract(dm).abs());
        let dmax = dm.a11.abs().max(dm.a22.abs()).max(dm.a12.norm());
        eq_scale = eq_scale.max(bm.trace() * dmax);
    }
    Ok(LevelRecord {
        k,
        radius: system.radius(k),
        h,
        v_c0,
        v_c1,
        v_c2: nr.c11,
        v_c2_center,
        v_holder: nr.holder_value,
        v_c0_wide: nr.c0,
        omega: cascade.report.solves[k].omega,
        eq_residual,
        eq_relative: if eq_scale > 0.0 { eq_residual / eq_scale } else { 0.0 },
        schauder: if nr.c0 > 0.0 { nr.weighted_total() / nr.c0 } else { 0.0 },
    })
}

/// Partial sum at depth K with a geometric tail estimate from the `C²` decay fit.
pub fn extrapolate_w(report: &CascadeReport) -> Result<WExtrapolation> {
    let levels = &report.levels;
    if levels.len() < 3 || report.partial_sums.len() < levels.len() + 1 {
        return Err(LabError::FitImpossible(format!(
            "{} correction levels; at least 3 are needed",
            levels.len()
        )));
    }
    let depth = levels.len();
    let rho = report.system.rho;
    let c2: Vec<f64> = levels.iter().map(|l| l.v_c2).collect();
    let tail = match fit_decay(&c2, rho, 1) {
        Some(fit) if fit.exponent > 0.0 => {
            let q = rho.powf(fit.exponent);
            fit.constant * q.powi(depth as i32) / (1.0 - q)
        }
        _ => c2.iter().fold(0.0, |m: f64, v| m.max(*v)),
    };
    let sums = report.partial_sums[..=depth].to_vec();
    let last_step = sums[depth].sub(&sums[depth - 1]).max_abs();
    Ok(WExtrapolation {
        w: sums[depth],
        non_cauchy: last_step > 2.0 * tail + 1e-12,
        partial_sums: sums,
        tail,
    })
}

/// Which branch of the two-point argument a pair falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairCase {
    Identical,
    /// `‖x − y‖ ≥ d/16`.
    Far,
    /// `ρ^{k+5} d ≤ ‖x − y‖ < ρ^{k+4} d`.
    Near { k: usize },
    /// Near pair whose level exceeds the cascade depth.
    Truncated { needed: usize, available: usize },
}

impl PairCase {
    pub fn label(&self) -> &'static str {
        match self {
            PairCase::Identical => "0",
            PairCase::Far => "1",
            PairCase::Near { .. } => "2",
            PairCase::Truncated { .. } => "2-truncated",
        }
    }
}

/// One sampled pair of the two-point Hölder estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub x: Point,
    pub y: Point,
    pub dist: f64,
    pub case: PairCase,
    /// `max |w(x) − w(y)|` over the six complex entries.
    pub dw: f64,
    pub quotient: f64,
    pub i1: Option<f64>,
    pub i2: Option<f64>,
    pub i3: Option<f64>,
    /// `(16/d)^γ (|w(x)| + |w(y)|)` for far pairs.
    pub case1_bound: Option<f64>,
    /// Sup of `û_k − ũ_k` on `B(x, ρ^{k+2}d) ∩ B(y, ρ^{k+2}d)`.
    pub sup_diff: Option<f64>,
    pub log_f_diff: f64,
    pub log_f_bound: f64,
}

impl PairRecord {
    pub const CSV_HEADER: &'static str =
        "x,y,dist,case,I1,I2,I3,quotient,dw,case1_bound,sup_diff,log_f_diff,log_f_bound";

    pub fn csv_row(&self) -> String {
        let pt = |p: &Point| p.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(" ");
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            pt(&self.x),
            pt(&self.y),
            fmt17(self.dist),
            self.case.label(),
            opt(self.i1),
            opt(self.i2),
            opt(self.i3),
            fmt17(self.quotient),
            fmt17(self.dw),
            opt(self.case1_bound),
            opt(self.sup_diff),
            fmt17(self.log_f_diff),
            fmt17(self.log_f_bound)
        )
    }
}

/// Parameters of the two-point estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderSetup {
    /// Template ball system; its center is replaced by each point.
    pub system: BallSystem,
    pub alpha: f64,
    pub gamma: f64,
    pub opts: SolverOptions,
    /// Lower bound `λ` of `f`.
    pub lambda: f64,
    /// Hölder constant of `f` for exponent `α`: `|f(x) − f(y)| ≤ L‖x − y‖^α`.
    pub f_holder: f64,
}

/// Level `k` with `ρ^{k+5} d ≤ δ < ρ^{k+4} d`.
pub fn near_level(delta: f64, d: f64, rho: f64) -> usize {
    let j = ((delta / d).ln() / rho.ln()).floor();
    (j.max(4.0) - 4.0) as usize
}

/// Full two-point estimate for `(x, y)`, running both cascades.
pub fn holder_two_point(
    u: &dyn FieldSource,
    f: &dyn FieldSource,
    x: Point,
    y: Point,
    setup: &HolderSetup,
) -> Result<PairRecord> {
    let cx = run_cascade(u, f, &setup.system.recentered(x), setup.gamma, &setup.opts)?;
    let cy = if x == y {
        cx.clone()
    } else {
        run_cascade(u, f, &setup.system.recentered(y), setup.gamma, &setup.opts)?
    };
    holder_pair(&cx, &cy, f, setup)
}

/// Two-point record from precomputed cascades at `x` and `y`.
pub fn holder_pair(cx: &Cascade, cy: &Cascade, f: &dyn FieldSource, setup: &HolderSetup) -> Result<PairRecord> {
    let (x, y) = (cx.system().center, cy.system().center);
    let (wx, wy) = match (&cx.report.w, &cy.report.w) {
        (Some(a), Some(b)) => (a.w, b.w),
        _ => return Err(LabError::FitImpossible("cascade has no limit values".into())),
    };
    let delta = dist(&x, &y);
    let dw = wx.sub(&wy).max_abs();
    let (fx, fy) = (f.value_at(&x)?, f.value_at(&y)?);
    let mut rec = PairRecord {
        x,
        y,
        dist: delta,
        case: PairCase::Identical,
        dw,
        quotient: 0.0,
        i1: None,
        i2: None,
        i3: None,
        case1_bound: None,
        sup_diff: None,
        log_f_diff: (fx.ln() - fy.ln()).abs(),
        log_f_bound: setup.f_holder / setup.lambda * delta.powf(setup.alpha),
    };
    if delta == 0.0 {
        return Ok(rec);
    }
    rec.quotient = dw / delta.powf(setup.alpha);
    let sys = setup.system;
    if delta >= sys.d / 16.0 {
        rec.case = PairCase::Far;
        rec.case1_bound = Some((16.0 / sys.d).powf(setup.gamma) * (wx.max_abs() + wy.max_abs()));
        return Ok(rec);
    }
    let k = near_level(delta, sys.d, sys.rho);
    let available = cx.solutions.len().min(cy.solutions.len()).saturating_sub(1);
    if k > available {
        rec.case = PairCase::Truncated { needed: k, available };
        return Ok(rec);
    }
    rec.case = PairCase::Near { k };
    let ux = cx.center_diffs(k).complex_entries();
    let uy = cy.center_diffs(k).complex_entries();
    rec.i1 = Some(wx.sub(&ux).max_abs());
    rec.i2 = Some(wy.sub(&uy).max_abs());
    rec.i3 = Some(uy.sub(&ux).max_abs());

    let (tx, ty) = (&cx.solutions[k], &cy.solutions[k]);
    let r = sys.radius(k + 2);
    let g = tx.grid();
    let mut sup: f64 = 0.0;
    let mut any = false;
    for i in 0..g.len() {
        let p = g.coord_flat(i);
        if dist(&p, &x) < r && dist(&p, &y) < r {
            sup = sup.max((ty.interpolate(&p)? - tx.at(i)).abs());
            any = true;
        }
    }
    rec.sup_diff = any.then_some(sup);
    Ok(rec)
}

/// `count` pairs `(anchor, anchor + δ u)` with δ geometric from `d/2` down to
/// `d/64` and seeded unit directions `u`.
pub fn pair_schedule(anchor: Point, d: f64, count: usize, seed: u64) -> Vec<(Point, Point)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distances = 10.min(count.max(1));
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let level = j % distances;
        let t = if distances > 1 {
            level as f64 / (distances - 1) as f64
        } else {
            0.0
        };
        let delta = d / 2.0 * 2f64.powf(-5.0 * t);
        let mut u = [0.0; 4];
        loop {
            for c in u.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
            let n = u.iter().map(|c| c * c).sum::<f64>().sqrt();
            if n > 0.1 && n <= 1.0 {
                u.iter_mut().for_each(|c| *c /= n);
                break;
            }
        }
        out.push((anchor, add_scaled(&anchor, &u, delta)));
    }
    out
}

/// `count` seeded centers in `B(anchor, spread)`, the anchor excluded.
pub fn seeded_centers(anchor: Point, spread: f64, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut u = [0.0; 4];
        for c in u.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let n = u.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            out.push(add_scaled(&anchor, &u, spread));
        }
    }
    out
}

/// Reference for the extrapolated limits: a direct solve of `det = f` with the
/// true `f` on `B(x0, radius)` at `nodes` per diameter, and central complex
/// second differences of it at `x0`.
pub fn direct_second_derivatives(
    u: &dyn FieldSource,
    f: &dyn FieldSource,
    x0: Point,
    radius: f64,
    nodes: usize,
    opts: &SolverOptions,
) -> Result<ComplexSecond> {
    let grid = Grid4::centered(x0, 2.0 * radius / (nodes - 1) as f64, nodes + 4)?;
    let mask = BallMask::new(&grid, x0, radius)?;
    let mut floor = f64::INFINITY;
    for &i in mask.interior() {
        floor = floor.min(f.value_at(&grid.coord_flat(i))?);
    }
    let problem = DirichletProblem::from_sources(mask, f, u, floor)?;
    let res = solve_with(&problem, opts)?;
    let c = grid.nearest_node(&x0).expect("center is a node");
    Ok(second_diffs(&grid, res.solution.values(), c).complex_entries())
}

/// `max |a − b| / max |b|` over the six complex second derivatives.
pub fn relative_w_error(a: &ComplexSecond, b: &ComplexSecond) -> f64 {
    a.sub(b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}

/// Regression summary of sampled pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub alpha: f64,
    pub pairs: usize,
    pub fitted_pairs: usize,
    pub max_quotient: f64,
    /// Slope of `log |w(x) − w(y)|` against `log ‖x − y‖`.
    pub exponent: f64,
    pub std_error: f64,
    /// Normal 95% interval of the slope.
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn holder_estimate(pairs: &[PairRecord], alpha: f64) -> Result<HolderEstimate> {
    let used: Vec<&PairRecord> = pairs
        .iter()
        .filter(|p| p.dist > 0.0 && p.dw > 0.0 && !matches!(p.case, PairCase::Truncated { .. }))
        .collect();
    let xs: Vec<f64> = used.iter().map(|p| p.dist.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.dw.ln()).collect();
    let (slope, _, se, _) = log_linear_fit(&xs, &ys).ok_or_else(|| {
        LabError::FitImpossible(format!("{} usable pairs at distinct distances", used.len()))
    })?;
    let max_quotient = pairs.iter().map(|p| p.quotient).fold(0.0, f64::max);
    Ok(HolderEstimate {
        alpha,
        pairs: pairs.len(),
        fitted_pairs: used.len(),
        max_quotient,
        exponent: slope,
        std_error: se,
        ci_low: slope - 1.96 * se,
        ci_high: slope + 1.96 * se,
    })
}
