//! Discrete complex differential operators and norm meters.
//!
//! The complex Hessian is realized from real central differences as
//! `u_{j k̄} = ¼[(∂_{x_j x_k} + ∂_{y_j y_k})u + i(∂_{x_j y_k} − ∂_{y_j x_k})u]`,
//! with the 3-point stencil for pure and the symmetric 4-point cross for
//! mixed second differences. Every formula is exact on real quadratics.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{dist, fmt17, BallMask, Grid4, GridField, Point};

/// Axis index of `x_s` and `y_s` for `s = 0, 1`.
const X: [usize; 2] = [0, 2];
const Y: [usize; 2] = [1, 3];

/// Node offsets of the second-difference stencil: centre, 8 axis and 24 diagonal neighbours.
pub const STENCIL_OFFSETS: [[isize; 4]; 33] = build_offsets();

const fn build_offsets() -> [[isize; 4]; 33] {
    let mut out = [[0isize; 4]; 33];
    let mut n = 1;
    let mut a = 0;
    while a < 4 {
        out[n][a] = 1;
        out[n + 1][a] = -1;
        n += 2;
        a += 1;
    }
    let mut a = 0;
    while a < 4 {
        let mut b = a + 1;
        while b < 4 {
            let signs = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
            let mut k = 0;
            while k < 4 {
                out[n][a] = signs[k].0;
                out[n][b] = signs[k].1;
                n += 1;
                k += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
}

/// Seed of the pair sampler used by [`norms`].
pub const PAIR_SEED: u64 = 0x5EED_CA5C_ADE0;

/// Real second differences at one node, stored symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondDiffs(pub [[f64; 4]; 4]);

impl SecondDiffs {
    /// Pure and mixed entries in a fixed order (`00,11,22,33,01,02,03,12,13,23`).
    pub fn entries(&self) -> [f64; 10] {
        let d = &self.0;
        [
            d[0][0], d[1][1], d[2][2], d[3][3], d[0][1], d[0][2], d[0][3], d[1][2], d[1][3],
            d[2][3],
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SecondDiffs) -> f64 {
        let a = self.entries();
        let b = other.entries();
        (0..10).fold(0.0, |m, k| m.max((a[k] - b[k]).abs()))
    }

    pub fn complex_hessian(&self) -> Herm2 {
        let d = &self.0;
        Herm2 {
            a11: 0.25 * (d[X[0]][X[0]] + d[Y[0]][Y[0]]),
            a22: 0.25 * (d[X[1]][X[1]] + d[Y[1]][Y[1]]),
            a12: Complex64::new(
                0.25 * (d[X[0]][X[1]] + d[Y[0]][Y[1]]),
                0.25 * (d[X[0]][Y[1]] - d[Y[0]][X[1]]),
            ),
        }
    }

    /// `∂²/∂z_s∂z_t = ¼[(∂_{x_s x_t} − ∂_{y_s y_t}) − i(∂_{x_s y_t} + ∂_{y_s x_t})]`.
    pub fn holomorphic(&self, s: usize, t: usize) -> Complex64 {
        let d = &self.0;
        Complex64::new(
            0.25 * (d[X[s]][X[t]] - d[Y[s]][Y[t]]),
            -0.25 * (d[X[s]][Y[t]] + d[Y[s]][X[t]]),
        )
    }

    pub fn complex_entries(&self) -> ComplexSecond {
        let h = self.complex_hessian();
        ComplexSecond {
            w11b: h.a11,
            w12b: h.a12,
            w22b: h.a22,
            w11: self.holomorphic(0, 0),
            w12: self.holomorphic(0, 1),
            w22: self.holomorphic(1, 1),
        }
    }
}

/// The six independent complex second derivatives of a real function on C^2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexSecond {
    pub w11b: f64,
    pub w12b: Complex64,
    pub w22b: f64,
    pub w11: Complex64,
    pub w12: Complex64,
    pub w22: Complex64,
}

impl ComplexSecond {
    pub fn sub(&self, o: &ComplexSecond) -> ComplexSecond {
        ComplexSecond {
            w11b: self.w11b - o.w11b,
            w12b: self.w12b - o.w12b,
            w22b: self.w22b - o.w22b,
            w11: self.w11 - o.w11,
            w12: self.w12 - o.w12,
            w22: self.w22 - o.w22,
        }
    }

    /// Largest modulus over the six entries.
    pub fn max_abs(&self) -> f64 {
        [
            self.w11b.abs(),
            self.w12b.norm(),
            self.w22b.abs(),
            self.w11.norm(),
            self.w12.norm(),
            self.w22.norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Largest modulus over the mixed entries `w_{1 1̄}, w_{1 2̄}, w_{2 2̄}`.
    pub fn mixed_max_abs(&self) -> f64 {
        self.w11b.abs().max(self.w12b.norm()).max(self.w22b.abs())
    }
}

fn mixed(v: &[f64], i: usize, sa: usize, sb: usize) -> f64 {
    v[i + sa + sb] - v[i + sa - sb] - v[i - sa + sb] + v[i - sa - sb]
}

/// Central second differences at a node that has the full stencil on its grid.
pub fn second_diffs(grid: &Grid4, v: &[f64], i: usize) -> SecondDiffs {
    let s = grid.strides();
    let h2 = grid.h() * grid.h();
    let mut d = [[0.0; 4]; 4];
    for a in 0..4 {
        d[a][a] = (v[i + s[a]] - 2.0 * v[i] + v[i - s[a]]) / h2;
        for b in a + 1..4 {
            let m = mixed(v, i, s[a], s[b]) / (4.0 * h2);
            d[a][b] = m;
            d[b][a] = m;
        }
    }
    SecondDiffs(d)
}

/// Central first differences at a node.
pub fn first_diffs(grid: &Grid4, v: &[f64], i: usize) -> [f64; 4] {
    let s = grid.strides();
    let h = grid.h();
    let mut g = [0.0; 4];
    for a in 0..4 {
        g[a] = (v[i + s[a]] - v[i - s[a]]) / (2.0 * h);
    }
    g
}

/// 2×2 Hermitian matrix `[[a11, a12], [conj(a12), a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Herm2 {
    pub a11: f64,
    pub a22: f64,
    pub a12: Complex64,
}

impl Herm2 {
    pub fn identity() -> Self {
        Herm2::diag(1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Herm2 {
            a11: a,
            a22: b,
            a12: Complex64::new(0.0, 0.0),
        }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12.norm_sqr()
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    /// Eigenvalues `(min, max)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.a11 + self.a22);
        let r = (0.25 * (self.a11 - self.a22).powi(2) + self.a12.norm_sqr()).sqrt();
        let hi = m + r;
        let lo = if hi > 0.0 && m > 0.0 { self.det() / hi } else { m - r };
        (lo, hi)
    }

    pub fn scale(&self, s: f64) -> Herm2 {
        Herm2 {
            a11: s * self.a11,
            a22: s * self.a22,
            a12: self.a12 * s,
        }
    }

    pub fn add(&self, o: &Herm2) -> Herm2 {
        Herm2 {
            a11: self.a11 + o.a11,
            a22: self.a22 + o.a22,
            a12: self.a12 + o.a12,
        }
    }

    pub fn conj(&self) -> Herm2 {
        Herm2 {
            a11: self.a11,
            a22: self.a22,
            a12: self.a12.conj(),
        }
    }

    /// Full complex matrix product `self · other`, row-major.
    pub fn matmul(&self, o: &Herm2) -> [[Complex64; 2]; 2] {
        let a = self.full();
        let b = o.full();
        let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        c
    }

    pub fn full(&self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.a11, 0.0), self.a12],
            [self.a12.conj(), Complex64::new(self.a22, 0.0)],
        ]
    }

    pub fn transpose_full(&self) -> [[Complex64; 2]; 2] {
        let f = self.full();
        [[f[0][0], f[1][0]], [f[0][1], f[1][1]]]
    }

    /// Inverse-transpose `conj(H⁻¹)` with eigenvalues clamped below at `floor`.
    /// Returns the matrix and whether clamping happened, or `None` when the
    /// matrix is singular and `floor` is zero.
    pub fn inverse_transpose(&self, floor: f64) -> Option<(Herm2, bool)> {
        let (lo, hi) = self.eigenvalues();
        if lo >= floor && lo > 0.0 {
            let det = self.det();
            if det > 0.0 {
                return Some((
                    Herm2 {
                        a11: self.a22 / det,
                        a22: self.a11 / det,
                        a12: -self.a12.conj() / det,
                    },
                    false,
                ));
            }
        }
        if floor <= 0.0 {
            return None;
        }
        let l1 = hi.max(floor);
        let l2 = lo.max(floor);
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            return Some((Herm2::diag(1.0 / l2, 1.0 / l2), true));
        }
        // conj(P_hi) = (conj(H) - lo I) / (hi - lo)
        let c = self.conj();
        let p = Herm2 {
            a11: (c.a11 - lo) / (hi - lo),
            a22: (c.a22 - lo) / (hi - lo),
            a12: c.a12 / (hi - lo),
        };
        let q = Herm2::identity().add(&p.scale(-1.0));
        Some((p.scale(1.0 / l1).add(&q.scale(1.0 / l2)), true))
    }

    /// Real 4×4 symmetric coefficient matrix `M` with
    /// `Σ_{ij} B_{ij} u_{i j̄} = Σ_{ab} M_ab ∂_a∂_b u` for `B = self`.
    pub fn real_operator(&self) -> [[f64; 4]; 4] {
        let p = self.a12.re;
        let q = self.a12.im;
        let b11 = self.a11 / 4.0;
        let b22 = self.a22 / 4.0;
        [
            [b11, 0.0, p / 4.0, -q / 4.0],
            [0.0, b11, q / 4.0, p / 4.0],
            [p / 4.0, q / 4.0, b22, 0.0],
            [-q / 4.0, p / 4.0, 0.0, b22],
        ]
    }

    /// `Σ_{ij} B_{ij} D_{ij}` for Hermitian `B = self` and `D`.
    pub fn contract(&self, d: &Herm2) -> f64 {
        self.a11 * d.a11 + self.a22 * d.a22 + 2.0 * (self.a12 * d.a12).re
    }
}

/// A 2×2 Hermitian matrix per node on a subset of grid nodes.
#[derive(Debug, Clone)]
pub struct HermitianField {
    grid: Grid4,
    nodes: Vec<usize>,
    mats: Vec<Herm2>,
}

impl HermitianField {
    pub fn new(grid: Grid4, nodes: Vec<usize>, mats: Vec<Herm2>) -> Result<Self> {
        if nodes.len() != mats.len() {
            return Err(LabError::InvalidArgument(format!(
                "{} nodes but {} matrices",
                nodes.len(),
                mats.len()
            )));
        }
        Ok(HermitianField { grid, nodes, mats })
    }

    /// The same matrix at each of `nodes`.
    pub fn uniform(grid: Grid4, nodes: Vec<usize>, m: Herm2) -> Self {
        let mats = vec![m; nodes.len()];
        HermitianField { grid, nodes, mats }
    }

    pub fn grid(&self) -> &Grid4 {
        &self.grid
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn mats(&self) -> &[Herm2] {
        &self.mats
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(min, max)` eigenvalue over all nodes.
    pub fn eigen_range(&self) -> (f64, f64) {
        self.mats.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
            let (a, b) = m.eigenvalues();
            (lo.min(a), hi.max(b))
        })
    }

    /// `1e-8 ·` the largest half-trace, the default eigenvalue floor.
    pub fn default_floor(&self) -> f64 {
        let scale = self
            .mats
            .iter()
            .fold(0.0f64, |m, a| m.max(0.5 * a.trace().abs()));
        1e-8 * scale.max(f64::MIN_POSITIVE)
    }
}

/// Complex Hessian at every node of the grid that has the full stencil.
pub fn complex_hessian(u: &GridField) -> Result<HermitianField> {
    let g = u.grid();
    let nodes: Vec<usize> = (0..g.len()).filter(|&i| g.has_full_stencil(i)).collect();
    if nodes.is_empty() {
        return Err(LabError::EmptyField(
            "grid too small for any interior node".into(),
        ));
    }
    complex_hessian_on(u, &nodes)
}

/// Complex Hessian at the given nodes, each of which needs the full stencil.
pub fn complex_hessian_on(u: &GridField, nodes: &[usize]) -> Result<HermitianField> {
    let g = u.grid();
    if nodes.is_empty() {
        return Err(LabError::EmptyField("no nodes requested".into()));
    }
    let mut mats = Vec::with_capacity(nodes.len());
    for &i in nodes {
        if !g.has_full_stencil(i) {
            return Err(LabError::EmptyField(format!(
                "node {i} lacks the second-difference stencil"
            )));
        }
        mats.push(second_diffs(g, u.values(), i).complex_hessian());
    }
    Ok(HermitianField {
        grid: *g,
        nodes: nodes.to_vec(),
        mats,
    })
}

/// Monge-Ampère determinant per node, aligned with `h.nodes()`.
pub fn ma_determinant(h: &HermitianField) -> Vec<f64> {
    h.mats.iter().map(Herm2::det).collect()
}

/// Inverse-transpose coefficient field with eigenvalues clamped below at `floor`.
/// Also returns the number of clamped nodes.
pub fn linearized_coefficients(h: &HermitianField, floor: f64) -> Result<(HermitianField, usize)> {
    if !(floor >= 0.0) {
        return Err(LabError::InvalidArgument(format!("negative floor {floor}")));
    }
    let mut clamps = 0;
    let mut mats = Vec::with_capacity(h.len());
    for (k, m) in h.mats.iter().enumerate() {
        let (b, clamped) = m
            .inverse_transpose(floor)
            .ok_or(LabError::SingularCoefficient { node: h.nodes[k] })?;
        clamps += clamped as usize;
        mats.push(b);
    }
    Ok((
        HermitianField {
            grid: h.grid,
            nodes: h.nodes.clone(),
            mats,
        },
        clamps,
    ))
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "need at least one quadrature point");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `∫₀¹ (t·Ha + (1−t)·Hb)^{-T} dt` by Gauss–Legendre quadrature, entrywise.
pub fn averaged_coefficients(
    ha: &HermitianField,
    hb: &HermitianField,
    quadrature_points: usize,
) -> Result<HermitianField> {
    if ha.grid != hb.grid || ha.nodes != hb.nodes {
        return Err(LabError::InvalidArgument(
            "coefficient fields live on different nodes".into(),
        ));
    }
    if quadrature_points == 0 {
        return Err(LabError::InvalidArgument("zero quadrature points".into()));
    }
    let rule = gauss_legendre(quadrature_points);
    let mut mats = Vec::with_capacity(ha.len());
    for k in 0..ha.len() {
        let mut acc = Herm2::default();
        for &(t, w) in &rule {
            let m = ha.mats[k].scale(t).add(&hb.mats[k].scale(1.0 - t));
            let (lo, _) = m.eigenvalues();
            if !(lo > 0.0) {
                return Err(LabError::DegeneratePath {
                    node: ha.nodes[k],
                    t,
                    min_eig: lo,
                });
            }
            let (inv, _) = m.inverse_transpose(0.0).ok_or(LabError::DegeneratePath {
                node: ha.nodes[k],
                t,
                min_eig: lo,
            })?;
            acc = acc.add(&inv.scale(w));
        }
        mats.push(acc);
    }
    Ok(HermitianField {
        grid: ha.grid,
        nodes: ha.nodes.clone(),
        mats,
    })
}

/// Oscillation of `f` over the interior and boundary nodes of `B(x0, r)`.
pub fn modulus_of_continuity(f: &GridField, x0: Point, r: f64) -> Result<f64> {
    let mask = BallMask::new(f.grid(), x0, r)?;
    oscillation(f, &mask)
}

/// Oscillation of `f` over a mask's interior and boundary nodes.
pub fn oscillation(f: &GridField, mask: &BallMask) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &i in mask.interior().iter().chain(mask.boundary()) {
        lo = lo.min(f.at(i));
        hi = hi.max(f.at(i));
    }
    if lo > hi {
        return Err(LabError::EmptyMask {
            center: mask.center(),
            radius: mask.radius(),
        });
    }
    Ok(hi - lo)
}

/// Sup norms, a sampled Hölder seminorm of second differences, and the
/// distance-weighted interior quantities of a field on a ball mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub c0: f64,
    pub c1: f64,
    pub c11: f64,
    pub holder_gamma: f64,
    /// Sampled seminorm: a lower bound for the true supremum.
    pub holder_value: f64,
    /// `sup d_x |Dv(x)|`
    pub w1: f64,
    /// `sup d_x² |D²v(x)|`
    pub w2: f64,
    /// `sup d_{x,y}^{2+γ} |D²v(x) − D²v(y)| / |x−y|^γ` over sampled pairs.
    pub w3: f64,
    pub pairs: usize,
}

impl NormReport {
    pub const CSV_HEADER: &'static str = "c0,c1,c11,holder_gamma,holder_value,w1,w2,w3";

    pub fn csv_row(&self) -> String {
        [
            self.c0,
            self.c1,
            self.c11,
            self.holder_gamma,
            self.holder_value,
            self.w1,
            self.w2,
            self.w3,
        ]
        .iter()
        .map(|v| fmt17(*v))
        .collect::<Vec<_>>()
        .join(",")
    }

    /// Left side of the weighted interior estimate.
    pub fn weighted_total(&self) -> f64 {
        self.c0 + self.w1 + self.w2 + self.w3
    }
}

/// Exhaustive sup norms over mask interior nodes, plus the Hölder quotient of
/// second differences over `pair_budget` seeded random pairs and all axis pairs
/// at distances `h, 2h, 4h, …`.
pub fn norms(v: &GridField, mask: &BallMask, gamma: f64, pair_budget: usize) -> Result<NormReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(LabError::InvalidArgument(format!(
            "Hölder exponent {gamma} outside (0,1)"
        )));
    }
    if v.grid() != mask.grid() {
        return Err(LabError::InvalidArgument(
            "field and mask on different grids".into(),
        ));
    }
    let nodes = mask.interior();
    if nodes.is_empty() {
        return Err(LabError::InsufficientInterior(format!(
            "ball of radius {} has no node with a full stencil",
            mask.radius()
        )));
    }
    let g = v.grid();
    let vals = v.values();
    let coords: Vec<Point> = nodes.iter().map(|&i| g.coord_flat(i)).collect();
    let weights: Vec<f64> = coords.iter().map(|p| mask.distance_to_sphere(p)).collect();
    let d2: Vec<SecondDiffs> = nodes.iter().map(|&i| second_diffs(g, vals, i)).collect();

    let mut rep = NormReport {
        c0: 0.0,
        c1: 0.0,
        c11: 0.0,
        holder_gamma: gamma,
        holder_value: 0.0,
        w1: 0.0,
        w2: 0.0,
        w3: 0.0,
        pairs: 0,
    };
    for (k, &i) in nodes.iter().enumerate() {
        rep.c0 = rep.c0.max(vals[i].abs());
        let grad = first_diffs(g, vals, i);
        let dmax = grad.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        rep.c1 = rep.c1.max(dmax);
        let s = d2[k].max_abs();
        rep.c11 = rep.c11.max(s);
        rep.w1 = rep.w1.max(weights[k] * dmax);
        rep.w2 = rep.w2.max(weights[k] * weights[k] * s);
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    if nodes.len() > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SEED);
        for _ in 0..pair_budget {
            let a = rng.gen_range(0..nodes.len());
            let mut b = rng.gen_range(0..nodes.len() - 1);
            if b >= a {
                b += 1;
            }
            pairs.push((a, b));
        }
        let pos = |flat: usize| nodes.binary_search(&flat).ok();
        let strides = g.strides();
        for (ka, &i) in nodes.iter().enumerate() {
            for (axis, &s) in strides.iter().enumerate() {
                let idx = g.unflat(i);
                let mut step = 1usize;
                while idx[axis] + step < g.counts()[axis] {
                    match pos(i + step * s) {
                        Some(kb) => pairs.push((ka, kb)),
                        None => break,
                    }
                    step *= 2;
                }
            }
        }
    }
    for &(a, b) in &pairs {
        let r = dist(&coords[a], &coords[b]);
        let q = d2[a].max_abs_diff(&d2[b]) / r.powf(gamma);
        rep.holder_value = rep.holder_value.max(q);
        let w = weights[a].min(weights[b]);
        rep.w3 = rep.w3.max(w.powf(2.0 + gamma) * q);
    }
    rep.pairs = pairs.len();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid4;

    fn cube() -> Grid4 {
        Grid4::new([-1.0; 4], 0.25, [9; 4]).unwrap()
    }

    #[test]
    fn stencil_offsets_are_distinct() {
        let mut v: Vec<_> = STENCIL_OFFSETS.to_vec();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 33);
        assert_eq!(STENCIL_OFFSETS[0], [0; 4]);
    }

    #[test]
    fn scaled_identity_hessian_is_exact() {
        let a = 1.7;
        let u = GridField::from_fn(cube(), |p| a * p.iter().map(|x| x * x).sum::<f64>()).unwrap();
        let h = complex_hessian(&u).unwrap();
        for m in h.mats() {
            assert!((m.a11 - a).abs() < 1e-12 && (m.a22 - a).abs() < 1e-12);
            assert!(m.a12.norm() < 1e-12);
            let (lo, _) = m.eigenvalues();
            assert!((lo - a).abs() < 1e-12);
        }
        for d in ma_determinant(&h) {
            assert!((d - a * a).abs() < 1e-11);
        }
    }

    #[test]
    fn pluriharmonic_real_part_has_zero_hessian() {
        // u = Re(z1 z2) = x1 x2 - y1 y2: u_{1 2̄} = 0 and ∂²u/∂z1∂z2 = 1/2.
        let u = GridField::from_fn(cube(), |p| p[0] * p[2] - p[1] * p[3]).unwrap();
        let g = u.grid();
        let i = g.flat([4; 4]);
        let d = second_diffs(g, u.values(), i);
        let h = d.complex_hessian();
        assert!(h.a12.norm() < 1e-13 && h.a11.abs() < 1e-13 && h.a22.abs() < 1e-13);
        let w12 = d.holomorphic(0, 1);
        assert!((w12.re - 0.5).abs() < 1e-13 && w12.im.abs() < 1e-13);
        assert!(d.holomorphic(0, 0).norm() < 1e-13);
    }

    #[test]
    fn constant_has_zero_hessian() {
        let u = GridField::constant(cube(), 4.2);
        let h = complex_hessian(&u).unwrap();
        assert!(h.mats().iter().all(|m| *m == Herm2::default()));
    }

    #[test]
    fn quartic_radial_determinant_is_second_order() {
        // u = |z|^4 has det = 8 |z|^4; the defect at a fixed node shrinks by ~4 when h halves.
        let p0 = [0.5, -0.3, 0.4, 0.6];
        let defect = |h: f64| {
            let g = Grid4::centered(p0, h, 5).unwrap();
            let u = GridField::from_fn(g, |p| p.iter().map(|x| x * x).sum::<f64>().powi(2)).unwrap();
            let i = g.flat([2; 4]);
            let d = second_diffs(&g, u.values(), i).complex_hessian().det();
            let t: f64 = p0.iter().map(|x| x * x).sum();
            (d - 8.0 * t * t).abs()
        };
        let (e1, e2) = (defect(0.05), defect(0.025));
        assert!(e1 > 0.0);
        let ratio = e1 / e2;
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn singular_matrix_determinant_is_zero() {
        let h = Herm2 {
            a11: 0.0,
            a22: 3.0,
            a12: Complex64::new(0.0, 0.0),
        };
        assert_eq!(h.det(), 0.0);
    }

    #[test]
    fn inverse_transpose_examples() {
        let (b, c) = Herm2::identity().inverse_transpose(1e-8).unwrap();
        assert_eq!(b, Herm2::identity());
        assert!(!c);
        let (b, _) = Herm2::diag(2.0, 0.5).inverse_transpose(1e-8).unwrap();
        assert!((b.a11 - 0.5).abs() < 1e-15 && (b.a22 - 2.0).abs() < 1e-15);
        assert!(Herm2::diag(0.0, 1.0).inverse_transpose(0.0).is_none());
        let (b, c) = Herm2::diag(-1.0, 1.0).inverse_transpose(0.5).unwrap();
        assert!(c);
        assert!((b.a11 - 2.0).abs() < 1e-14 && (b.a22 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_field_names_node() {
        let g = cube();
        let h = HermitianField::uniform(g, vec![7, 9], Herm2::diag(0.0, 1.0));
        assert_eq!(
            linearized_coefficients(&h, 0.0).unwrap_err(),
            LabError::SingularCoefficient { node: 7 }
        );
    }

    #[test]
    fn product_with_transpose_is_identity() {
        let m = Herm2 {
            a11: 2.0,
            a22: 1.5,
            a12: Complex64::new(0.3, -0.7),
        };
        let (b, clamped) = m.inverse_transpose(1e-8).unwrap();
        assert!(!clamped);
        let bf = b.full();
        let mt = m.transpose_full();
        for i in 0..2 {
            for j in 0..2 {
                let s = bf[i][0] * mt[0][j] + bf[i][1] * mt[1][j];
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s - Complex64::new(e, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..8 {
            let rule = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = rule.iter().map(|(t, w)| w * t.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
        let one = gauss_legendre(1);
        assert_eq!(one.len(), 1);
        assert!((one[0].0 - 0.5).abs() < 1e-15 && (one[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn averaged_coefficients_examples() {
        let g = cube();
        let nodes = vec![g.flat([4; 4])];
        let i = HermitianField::uniform(g, nodes.clone(), Herm2::identity());
        for q in [1, 3, 5] {
            let b = averaged_coefficients(&i, &i, q).unwrap();
            assert!((b.mats()[0].a11 - 1.0).abs() < 1e-15);
        }
        let two = HermitianField::uniform(g, nodes.clone(), Herm2::diag(2.0, 2.0));
        let b = averaged_coefficients(&two, &i, 5).unwrap();
        assert!((b.mats()[0].a11 - std::f64::consts::LN_2).abs() < 1e-7);
        assert!((b.mats()[0].a22 - std::f64::consts::LN_2).abs() < 1e-7);
        // one-point rule is the inverse at the midpoint t = 1/2
        let b = averaged_coefficients(&two, &i, 1).unwrap();
        assert!((b.mats()[0].a11 - 1.0 / 1.5).abs() < 1e-15);
        let neg = HermitianField::uniform(g, nodes, Herm2::diag(-2.0, 1.0));
        assert!(matches!(
            averaged_coefficients(&neg, &i, 5),
            Err(LabError::DegeneratePath { .. })
        ));
    }

    #[test]
    fn modulus_examples() {
        let g = cube();
        let c = GridField::constant(g, 2.0);
        assert_eq!(modulus_of_continuity(&c, [0.0; 4], 0.6).unwrap(), 0.0);
        let f = GridField::from_fn(g, |p| 1.0 + 0.5 * crate::grid::norm(p).sqrt()).unwrap();
        let w_small = modulus_of_continuity(&f, [0.0; 4], 0.3).unwrap();
        let w_big = modulus_of_continuity(&f, [0.0; 4], 0.8).unwrap();
        assert!(w_small <= w_big);
        // brute force: max over interior+boundary node distances
        let m = BallMask::new(&g, [0.0; 4], 0.8).unwrap();
        let rmax = m
            .closure()
            .iter()
            .map(|&i| crate::grid::norm(&g.coord_flat(i)))
            .fold(0.0, f64::max);
        assert!((w_big - 0.5 * rmax.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn norms_examples() {
        let g = cube();
        let m = BallMask::new(&g, [0.0; 4], 0.8).unwrap();
        let z = GridField::constant(g, 0.0);
        let r = norms(&z, &m, 0.5, 50).unwrap();
        assert_eq!(r.weighted_total() + r.c1 + r.c11 + r.holder_value, 0.0);

        let x1 = GridField::from_fn(g, |p| p[0]).unwrap();
        let r = norms(&x1, &m, 0.5, 50).unwrap();
        let cmax = m
            .interior()
            .iter()
            .map(|&i| g.coord_flat(i)[0].abs())
            .fold(0.0, f64::max);
        assert_eq!(r.c0, cmax);
        assert!((r.c1 - 1.0).abs() < 1e-14);
        assert!(r.c11 < 1e-12);

        let sq = GridField::from_fn(g, |p| p[0] * p[0]).unwrap();
        let r = norms(&sq, &m, 0.5, 200).unwrap();
        assert!(r.holder_value < 1e-10);
        assert!(r.pairs > 200);
        assert_eq!(
            r.csv_row().split(',').count(),
            NormReport::CSV_HEADER.split(',').count()
        );

        let empty = BallMask::new(&g, [0.0; 4], 0.1).unwrap();
        let e = BallMask::new(&g, [0.0; 4], 0.0).unwrap();
        assert!(norms(&sq, &empty, 0.5, 10).is_ok());
        assert!(matches!(
            norms(&sq, &e, 0.5, 10),
            Err(LabError::InsufficientInterior(_))
        ));
    }
}
