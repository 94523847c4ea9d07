//! Closed-form reference solutions and data generators.
//!
//! Radial profiles `u = g(‖z − a‖²)` have `det(u_{i j̄}) = g′(g′ + t g″)` on C².
//! The Hölder profile inverts that identity for `f = λ + c‖z − a‖^α`:
//! `g′(t)² = λ + c t^{α/2} / (1 + α/4)`, so the manufactured data has an exact
//! solution and the cascade can run against it without a global solve.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{dist, FieldSource, Grid4, GridField, Point};
use crate::ops::{gauss_legendre, SecondDiffs};

/// Profile `g` of a radial solution `u = g(t)`, `t = ‖z − a‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProfile {
    /// `g(t) = A t`.
    Linear { a: f64 },
    /// `g(t) = t²`.
    Quartic,
    /// Exact solution for `f = λ + c‖z − a‖^α`.
    Holder { lambda: f64, c: f64, alpha: f64 },
}

impl RadialProfile {
    pub fn holder(lambda: f64, c: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(LabError::InvalidArgument(format!("α = {alpha} must lie in (0, 1)")));
        }
        if !(lambda > 0.0) || !(c >= 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "need λ > 0 and c ≥ 0, got λ = {lambda}, c = {c}"
            )));
        }
        Ok(RadialProfile::Holder { lambda, c, alpha })
    }

    /// Closed interval of `t` on which the profile is strictly plurisubharmonic.
    pub fn validity(&self) -> (f64, f64) {
        match *self {
            RadialProfile::Linear { .. } | RadialProfile::Holder { .. } => (0.0, f64::INFINITY),
            // g′ = 2t vanishes at the origin
            RadialProfile::Quartic => (f64::MIN_POSITIVE, f64::INFINITY),
        }
    }

    pub fn g(&self, t: f64) -> f64 {
        match *self {
            RadialProfile::Linear { a } => a * t,
            RadialProfile::Quartic => t * t,
            RadialProfile::Holder { lambda, c, alpha } => {
                if t <= 0.0 {
                    return 0.0;
                }
                // s = w^m turns ∫₀ᵗ √(λ + c′ s^{α/2}) ds into a smooth integral in w
                let m = 4.0 / alpha;
                let cp = c / (1.0 + alpha / 4.0);
                let top = t.powf(1.0 / m);
                gauss_legendre(24)
                    .iter()
                    .map(|&(x, wt)| {
                        let w = x * top;
                        wt * (lambda + cp * w * w).sqrt() * m * w.powf(m - 1.0)
                    })
                    .sum::<f64>()
                    * top
            }
        }
    }

    pub fn dg(&self, t: f64) -> f64 {
        match *self {
            RadialProfile::Linear { a } => a,
            RadialProfile::Quartic => 2.0 * t,
            RadialProfile::Holder { lambda, c, alpha } => {
                (lambda + c / (1.0 + alpha / 4.0) * t.max(0.0).powf(alpha / 2.0)).sqrt()
            }
        }
    }

    /// `g″(t)`; infinite at `t = 0` for the Hölder profile.
    pub fn d2g(&self, t: f64) -> f64 {
        match *self {
            RadialProfile::Linear { .. } => 0.0,
            RadialProfile::Quartic => 2.0,
            RadialProfile::Holder { c, alpha, .. } => {
                if t <= 0.0 {
                    return if c > 0.0 { f64::INFINITY } else { 0.0 };
                }
                let cp = c / (1.0 + alpha / 4.0);
                cp * (alpha / 2.0) * t.powf(alpha / 2.0 - 1.0) / (2.0 * self.dg(t))
            }
        }
    }

    /// `det(u_{i j̄}) = g′(g′ + t g″)`.
    pub fn determinant(&self, t: f64) -> f64 {
        match *self {
            RadialProfile::Holder { lambda, c, alpha } => lambda + c * t.max(0.0).powf(alpha / 2.0),
            _ => {
                let d = self.dg(t);
                d * (d + t * self.d2g(t))
            }
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.validity();
        if t < lo || t > hi {
            return Err(LabError::InvalidProfile(format!(
                "t = {t} outside validity interval [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// `u = g(‖z − a‖²)` as a pointwise source with exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSolution {
    pub profile: RadialProfile,
    pub anchor: Point,
}

impl RadialSolution {
    pub fn new(profile: RadialProfile, anchor: Point) -> Self {
        RadialSolution { profile, anchor }
    }

    fn t(&self, p: &Point) -> f64 {
        dist(p, &self.anchor).powi(2)
    }

    pub fn u(&self, p: &Point) -> f64 {
        self.profile.g(self.t(p))
    }

    pub fn f(&self, p: &Point) -> f64 {
        self.profile.determinant(self.t(p))
    }

    /// Exact real Hessian `2g′δ_ab + 4g″ x_a x_b` with `x = p − a`.
    pub fn real_hessian(&self, p: &Point) -> SecondDiffs {
        let t = self.t(p);
        let d1 = self.profile.dg(t);
        let d2 = if t > 0.0 { self.profile.d2g(t) } else { 0.0 };
        let x: Vec<f64> = (0..4).map(|a| p[a] - self.anchor[a]).collect();
        let mut m = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] = 4.0 * d2 * x[a] * x[b] + if a == b { 2.0 * d1 } else { 0.0 };
            }
        }
        SecondDiffs(m)
    }

    /// Source view of the right-hand side `f`.
    pub fn rhs(&self) -> RhsSource<'_> {
        RhsSource(self)
    }
}

impl FieldSource for RadialSolution {
    fn value_at(&self, p: &Point) -> Result<f64> {
        Ok(self.u(p))
    }
}

/// The right-hand side of a [`RadialSolution`] as a [`FieldSource`].
pub struct RhsSource<'a>(&'a RadialSolution);

impl FieldSource for RhsSource<'_> {
    fn value_at(&self, p: &Point) -> Result<f64> {
        Ok(self.0.f(p))
    }
}

/// Samples `u = g(‖z‖²)` and `f = g′(g′ + t g″)` on every node of `grid`.
pub fn radial_solution(profile: RadialProfile, grid: &Grid4) -> Result<(GridField, GridField)> {
    radial_solution_about(profile, grid, [0.0; 4])
}

pub fn radial_solution_about(
    profile: RadialProfile,
    grid: &Grid4,
    anchor: Point,
) -> Result<(GridField, GridField)> {
    let sol = RadialSolution::new(profile, anchor);
    let mut u = Vec::with_capacity(grid.len());
    let mut f = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let p = grid.coord_flat(i);
        profile.check(sol.t(&p))?;
        u.push(sol.u(&p));
        f.push(sol.f(&p));
    }
    Ok((GridField::new(*grid, u)?, GridField::new(*grid, f)?))
}

/// `f(z) = λ + c‖z − a‖^α` sampled on `grid`.
pub fn holder_rhs(grid: &Grid4, lambda: f64, c: f64, anchor: Point, alpha: f64) -> Result<GridField> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::InvalidArgument(format!("α = {alpha} must lie in (0, 1)")));
    }
    GridField::from_fn(*grid, |p| lambda + c * dist(p, &anchor).powf(alpha))
}

/// Real Pogorelov example `u = (1 + x₁²)‖x′‖^{2β}` on ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct PogorelovInstance {
    pub n: usize,
    pub beta: f64,
    pub points: Vec<Vec<f64>>,
}

/// Which sign of the `(2β+1)x₁²` term the finite-difference determinant supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignVerdict {
    /// `(2β−1) − (2β+1)x₁²`, as displayed.
    Displayed,
    /// `(2β−1) + (2β+1)x₁²`.
    Opposite,
    /// No evaluation point discriminates between the two readings.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PogorelovPoint {
    pub x: Vec<f64>,
    pub fd_det: f64,
    pub closed_form: f64,
    pub fitted_form: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PogorelovReport {
    pub n: usize,
    pub beta: f64,
    pub h: f64,
    /// `c(n, β) = 2ⁿ βⁿ⁻¹`.
    pub c_closed: f64,
    /// `c` fitted from the finite-difference determinant at the first point.
    pub c_fitted: f64,
    pub points: Vec<PogorelovPoint>,
    pub max_rel_err: f64,
    pub sign: SignVerdict,
}

impl PogorelovInstance {
    pub fn new(n: usize, beta: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        if !(3..=4).contains(&n) {
            return Err(LabError::InvalidArgument(format!("dimension n = {n} must be 3 or 4")));
        }
        if !(beta >= 0.5) {
            return Err(LabError::InvalidArgument(format!("β = {beta} must be ≥ 1/2")));
        }
        if points.is_empty() || points.iter().any(|p| p.len() != n) {
            return Err(LabError::InvalidArgument(format!(
                "need at least one evaluation point of dimension {n}"
            )));
        }
        Ok(PogorelovInstance { n, beta, points })
    }

    /// Five points with `‖x′‖ ≥ 0.5` spread over `x₁ ∈ [0, 2]`.
    pub fn default_points(n: usize, beta: f64) -> Result<Self> {
        if !(3..=4).contains(&n) {
            return Err(LabError::InvalidArgument(format!("dimension n = {n} must be 3 or 4")));
        }
        let rows: [[f64; 4]; 5] = [
            [0.0, 0.5, 0.3, 0.2],
            [0.2, -0.4, 0.6, 0.1],
            [0.8, 0.7, 0.0, -0.3],
            [1.5, 0.3, -0.5, 0.4],
            [2.0, -0.6, 0.45, 0.0],
        ];
        let points = rows.iter().map(|r| r[..n].to_vec()).collect();
        PogorelovInstance::new(n, beta, points)
    }

    pub fn u(&self, x: &[f64]) -> f64 {
        let r2: f64 = x[1..].iter().map(|v| v * v).sum();
        (1.0 + x[0] * x[0]) * r2.powf(self.beta)
    }

    pub fn c_closed(&self) -> f64 {
        2f64.powi(self.n as i32) * self.beta.powi(self.n as i32 - 1)
    }

    /// Displayed form divided by `c`.
    fn shape(&self, x: &[f64], sign: f64) -> f64 {
        let (n, b) = (self.n as f64, self.beta);
        let r2: f64 = x[1..].iter().map(|v| v * v).sum();
        (1.0 + x[0] * x[0]).powf(n - 2.0)
            * ((2.0 * b - 1.0) + sign * (2.0 * b + 1.0) * x[0] * x[0])
            * r2.powf(b * n + 1.0 - n)
    }

    /// Determinant of the central-difference real Hessian at `x`.
    pub fn fd_determinant(&self, x: &[f64], h: f64) -> f64 {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        let at = |da: &[(usize, f64)]| {
            let mut y = x.to_vec();
            for &(a, s) in da {
                y[a] += s * h;
            }
            self.u(&y)
        };
        let u0 = self.u(x);
        for a in 0..n {
            m[(a, a)] = (at(&[(a, 1.0)]) - 2.0 * u0 + at(&[(a, -1.0)])) / (h * h);
            for b in a + 1..n {
                let v = (at(&[(a, 1.0), (b, 1.0)]) - at(&[(a, 1.0), (b, -1.0)])
                    - at(&[(a, -1.0), (b, 1.0)])
                    + at(&[(a, -1.0), (b, -1.0)]))
                    / (4.0 * h * h);
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        m.determinant()
    }
}

/// Compares the finite-difference determinant with the displayed closed form.
pub fn pogorelov_residual(instance: &PogorelovInstance, h: f64) -> Result<PogorelovReport> {
    if !(h > 0.0) {
        return Err(LabError::InvalidArgument(format!("spacing h = {h} must be positive")));
    }
    for p in &instance.points {
        let r = p[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < 2.0 * h {
            return Err(LabError::NearSingularity(format!(
                "point {p:?} lies {r} from {{x′ = 0}}, closer than 2h = {}",
                2.0 * h
            )));
        }
    }
    let c_closed = instance.c_closed();
    let fd: Vec<f64> = instance.points.iter().map(|p| instance.fd_determinant(p, h)).collect();
    let first_shape = instance.shape(&instance.points[0], -1.0);
    let c_fitted = if first_shape != 0.0 { fd[0] / first_shape } else { f64::NAN };

    let mut points = Vec::new();
    let mut max_rel_err: f64 = 0.0;
    let mut votes = (0, 0);
    for (p, &d) in instance.points.iter().zip(&fd) {
        let shape = instance.shape(p, -1.0);
        let closed = c_closed * shape;
        let rel = (d - closed).abs() / closed.abs().max(f64::MIN_POSITIVE);
        max_rel_err = max_rel_err.max(rel);
        // the two readings disagree in sign where (2β+1)x₁² > 2β−1
        let b = instance.beta;
        if (2.0 * b + 1.0) * p[0] * p[0] > 2.0 * b - 1.0 {
            if d < 0.0 {
                votes.0 += 1;
            } else if d > 0.0 {
                votes.1 += 1;
            }
        }
        points.push(PogorelovPoint {
            x: p.clone(),
            fd_det: d,
            closed_form: closed,
            fitted_form: c_fitted * shape,
            rel_err: rel,
        });
    }
    let sign = match votes {
        (a, 0) if a > 0 => SignVerdict::Displayed,
        (0, b) if b > 0 => SignVerdict::Opposite,
        _ => SignVerdict::Inconclusive,
    };
    Ok(PogorelovReport {
        n: instance.n,
        beta: instance.beta,
        h,
        c_closed,
        c_fitted,
        points,
        max_rel_err,
        sign,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BallMask;
    use crate::ops::{complex_hessian_on, ma_determinant, modulus_of_continuity};

    #[test]
    fn identity_profiles() {
        let g = Grid4::new([-1.0; 4], 0.25, [9; 4]).unwrap();
        let (u, f) = radial_solution(RadialProfile::Linear { a: 1.0 }, &g).unwrap();
        assert!(f.values().iter().all(|v| *v == 1.0));
        let p = g.coord_flat(17);
        assert_eq!(u.at(17), p.iter().map(|x| x * x).sum::<f64>());
        let (_, f) = radial_solution(RadialProfile::Linear { a: 3.0 }, &g).unwrap();
        assert!(f.values().iter().all(|v| *v == 9.0));
    }

    #[test]
    fn quartic_determinant_is_8t2() {
        for t in [0.1, 0.5, 2.0] {
            assert!((RadialProfile::Quartic.determinant(t) - 8.0 * t * t).abs() < 1e-14);
        }
        let g = Grid4::new([-1.0; 4], 0.25, [9; 4]).unwrap();
        assert!(matches!(
            radial_solution(RadialProfile::Quartic, &g),
            Err(LabError::InvalidProfile(_))
        ));
        let shifted = Grid4::new([0.5, -1.0, -1.0, -1.0], 0.25, [9; 4]).unwrap();
        assert!(radial_solution(RadialProfile::Quartic, &shifted).is_ok());
    }

    #[test]
    fn quartic_discrete_determinant_is_second_order() {
        // pointwise truncation error at a fixed node shrinks by 4 when h halves
        let p0 = [0.5, -0.3, 0.4, 0.6];
        let sol = RadialSolution::new(RadialProfile::Quartic, [0.0; 4]);
        let err = |h: f64| {
            let g = Grid4::centered(p0, h, 5).unwrap();
            let u = GridField::from_fn(g, |p| sol.u(p)).unwrap();
            let c = g.nearest_node(&p0).unwrap();
            let hm = complex_hessian_on(&u, &[c]).unwrap();
            (ma_determinant(&hm)[0] - sol.f(&p0)).abs()
        };
        let r = err(0.05) / err(0.025);
        assert!((3.8..=4.2).contains(&r), "ratio {r}");
    }

    #[test]
    fn holder_profile_matches_rhs() {
        let prof = RadialProfile::holder(1.0, 0.5, 0.5).unwrap();
        for t in [1e-6, 0.01, 0.3, 1.0] {
            // derivative of the quadrature g against the closed-form g′
            let e = 1e-6 * t;
            let num = (prof.g(t + e) - prof.g(t - e)) / (2.0 * e);
            assert!((num - prof.dg(t)).abs() < 1e-7 * prof.dg(t), "t={t}");
            let num2 = (prof.dg(t + e) - prof.dg(t - e)) / (2.0 * e);
            assert!((num2 - prof.d2g(t)).abs() < 1e-6 * prof.d2g(t).abs().max(1.0));
            let d = prof.dg(t) * (prof.dg(t) + t * prof.d2g(t));
            assert!((d - (1.0 + 0.5 * t.powf(0.25))).abs() < 1e-12);
        }
        assert_eq!(prof.g(0.0), 0.0);
        assert!(RadialProfile::holder(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn exact_hessian_matches_differences() {
        let sol = RadialSolution::new(RadialProfile::holder(1.0, 0.5, 0.5).unwrap(), [0.1, 0.0, -0.2, 0.0]);
        let p = [0.4, 0.3, 0.1, -0.2];
        let h = 1e-4;
        let g = Grid4::centered(p, h, 5).unwrap();
        let u = GridField::from_fn(g, |q| sol.u(q)).unwrap();
        let c = g.nearest_node(&p).unwrap();
        let d = crate::ops::second_diffs(&g, u.values(), c);
        assert!(d.max_abs_diff(&sol.real_hessian(&p)) < 1e-5);
        let det = sol.real_hessian(&p).complex_hessian().det();
        assert!((det - sol.f(&p)).abs() < 1e-12);
    }

    #[test]
    fn holder_rhs_properties() {
        let g = Grid4::new([-1.0; 4], 0.25, [9; 4]).unwrap();
        let f = holder_rhs(&g, 2.0, 0.0, [0.0; 4], 0.5).unwrap();
        assert!(f.values().iter().all(|v| *v == 2.0));
        let f = holder_rhs(&g, 1.0, 0.5, [0.0; 4], 0.5).unwrap();
        assert!(f.values().iter().all(|v| *v >= 1.0));
        assert_eq!(f.at(g.nearest_node(&[0.0; 4]).unwrap()), 1.0);
        // modulus at the anchor is c·r_max^α over the closed mask
        let r = 0.6;
        let omega = modulus_of_continuity(&f, [0.0; 4], r).unwrap();
        let mask = BallMask::new(&g, [0.0; 4], r).unwrap();
        let rmax = mask.closure().iter().map(|&i| crate::grid::norm(&g.coord_flat(i))).fold(0.0, f64::max);
        assert!((omega - 0.5 * rmax.sqrt()).abs() < 1e-14);
        assert!(matches!(holder_rhs(&g, 1.0, 0.5, [0.0; 4], 1.5), Err(LabError::InvalidArgument(_))));
    }

    #[test]
    fn pogorelov_two_thirds() {
        let inst = PogorelovInstance::default_points(3, 2.0 / 3.0).unwrap();
        let rep = pogorelov_residual(&inst, 1e-3).unwrap();
        assert!((rep.c_closed - 32.0 / 9.0).abs() < 1e-14);
        assert!(rep.max_rel_err < 1e-4, "{}", rep.max_rel_err);
        assert_eq!(rep.sign, SignVerdict::Displayed);
        // exponent 2(βn+1−n) vanishes, so det depends on x₁ alone
        for p in &rep.points {
            let a = p.x[0];
            let closed = -32.0 * (1.0 + a * a) * (7.0 * a * a - 1.0) / 27.0;
            assert!((p.closed_form - closed).abs() < 1e-12 * closed.abs().max(1.0));
        }
    }

    #[test]
    fn pogorelov_half_at_origin_and_permutation() {
        let inst = PogorelovInstance::new(3, 0.5, vec![vec![0.0, 0.6, 0.3]]).unwrap();
        let rep = pogorelov_residual(&inst, 1e-3).unwrap();
        assert_eq!(rep.points[0].closed_form, 0.0);
        assert!(rep.points[0].fd_det.abs() < 1e-4);
        let a = PogorelovInstance::new(4, 0.8, vec![vec![0.7, 0.5, 0.2, -0.4]]).unwrap();
        let b = PogorelovInstance::new(4, 0.8, vec![vec![0.7, -0.4, 0.5, 0.2]]).unwrap();
        let (ra, rb) = (pogorelov_residual(&a, 1e-3).unwrap(), pogorelov_residual(&b, 1e-3).unwrap());
        assert!((ra.points[0].fd_det - rb.points[0].fd_det).abs() < 1e-8);
        assert!(ra.max_rel_err < 1e-4);
        let near = PogorelovInstance::new(3, 0.6, vec![vec![1.0, 1e-3, 0.0]]).unwrap();
        assert!(matches!(pogorelov_residual(&near, 1e-3), Err(LabError::NearSingularity(_))));
    }
}
