//! Uniform 4-D grids over boxes in C^2 = R^4, ball masks and grid fields.
//!
//! Coordinates are ordered `(x1, y1, x2, y2)` for `z1 = x1 + i y1`,
//! `z2 = x2 + i y2`. Flat node indices are row-major with axis 0 slowest.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LabError, Result};

/// A point of R^4 in `(x1, y1, x2, y2)` order.
pub type Point = [f64; 4];

/// Relative slack used when deciding whether a box or ball is contained.
const CONTAIN_EPS: f64 = 1e-12;

pub fn norm(p: &Point) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    let mut s = 0.0;
    for k in 0..4 {
        let d = a[k] - b[k];
        s += d * d;
    }
    s.sqrt()
}

pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

pub fn add_scaled(a: &Point, b: &Point, s: f64) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]]
}

/// Uniform grid with identical spacing on all four axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid4 {
    origin: Point,
    h: f64,
    counts: [usize; 4],
}

impl Grid4 {
    pub fn new(origin: Point, h: f64, counts: [usize; 4]) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(LabError::InvalidArgument(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        if let Some(c) = counts.iter().find(|&&c| c < 5) {
            return Err(LabError::InvalidArgument(format!(
                "every axis needs at least 5 nodes, got {c} in {counts:?}"
            )));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidArgument("non-finite grid origin".into()));
        }
        Ok(Grid4 { origin, h, counts })
    }

    /// Grid of `n` nodes per axis centered on `center`, so that `center` is a node
    /// when `n` is odd.
    pub fn centered(center: Point, h: f64, n: usize) -> Result<Self> {
        let half = (n as f64 - 1.0) / 2.0 * h;
        Grid4::new(
            [
                center[0] - half,
                center[1] - half,
                center[2] - half,
                center[3] - half,
            ],
            h,
            [n; 4],
        )
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> [usize; 4] {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat-index strides, axis 0 slowest.
    pub fn strides(&self) -> [usize; 4] {
        let c = self.counts;
        [c[1] * c[2] * c[3], c[2] * c[3], c[3], 1]
    }

    pub fn flat(&self, idx: [usize; 4]) -> usize {
        let s = self.strides();
        idx[0] * s[0] + idx[1] * s[1] + idx[2] * s[2] + idx[3]
    }

    pub fn unflat(&self, mut flat: usize) -> [usize; 4] {
        let s = self.strides();
        let mut idx = [0; 4];
        for a in 0..4 {
            idx[a] = flat / s[a];
            flat %= s[a];
        }
        idx
    }

    pub fn coord(&self, idx: [usize; 4]) -> Point {
        let mut p = [0.0; 4];
        for a in 0..4 {
            p[a] = self.origin[a] + self.h * idx[a] as f64;
        }
        p
    }

    pub fn coord_flat(&self, flat: usize) -> Point {
        self.coord(self.unflat(flat))
    }

    /// Upper corner of the box.
    pub fn upper(&self) -> Point {
        let mut p = [0.0; 4];
        for a in 0..4 {
            p[a] = self.origin[a] + self.h * (self.counts[a] - 1) as f64;
        }
        p
    }

    fn tol(&self) -> f64 {
        CONTAIN_EPS * (1.0 + self.h * *self.counts.iter().max().unwrap() as f64)
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        let up = self.upper();
        let eps = self.tol();
        (0..4).all(|a| p[a] >= self.origin[a] - eps && p[a] <= up[a] + eps)
    }

    pub fn contains_box(&self, other: &Grid4) -> bool {
        self.contains_point(&other.origin) && self.contains_point(&other.upper())
    }

    /// Flat index of a node offset from `flat` by `delta` index steps, if it lies on the grid.
    pub fn offset(&self, flat: usize, delta: [isize; 4]) -> Option<usize> {
        let idx = self.unflat(flat);
        let mut out = [0usize; 4];
        for a in 0..4 {
            let v = idx[a] as isize + delta[a];
            if v < 0 || v >= self.counts[a] as isize {
                return None;
            }
            out[a] = v as usize;
        }
        Some(self.flat(out))
    }

    /// True when every axis index is at least one step away from the box faces.
    pub fn has_full_stencil(&self, flat: usize) -> bool {
        let idx = self.unflat(flat);
        (0..4).all(|a| idx[a] >= 1 && idx[a] + 1 < self.counts[a])
    }

    /// Nearest node index (rounded), if the point is in the box.
    pub fn nearest_node(&self, p: &Point) -> Option<usize> {
        if !self.contains_point(p) {
            return None;
        }
        let mut idx = [0; 4];
        for a in 0..4 {
            let s = ((p[a] - self.origin[a]) / self.h).round();
            idx[a] = (s.max(0.0) as usize).min(self.counts[a] - 1);
        }
        Some(self.flat(idx))
    }
}

/// Real values on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid4,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid4, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::InvalidArgument(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "non-finite value at node {i}"
            )));
        }
        Ok(GridField { grid, values })
    }

    pub fn constant(grid: Grid4, c: f64) -> Self {
        GridField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid4, f: impl Fn(&Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.coord_flat(i))).collect();
        GridField::new(grid, values)
    }

    pub fn grid(&self) -> &Grid4 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    /// Multilinear interpolation; errors outside the grid box.
    pub fn interpolate(&self, p: &Point) -> Result<f64> {
        if !self.grid.contains_point(p) {
            return Err(LabError::OutOfDomain(format!(
                "point {p:?} outside grid box {:?}..{:?}",
                self.grid.origin(),
                self.grid.upper()
            )));
        }
        let g = &self.grid;
        let mut base = [0usize; 4];
        let mut t = [0.0; 4];
        for a in 0..4 {
            let s = (p[a] - g.origin[a]) / g.h;
            let i = (s.floor().max(0.0) as usize).min(g.counts[a] - 2);
            base[a] = i;
            t[a] = (s - i as f64).clamp(0.0, 1.0);
        }
        let strides = g.strides();
        let b = g.flat(base);
        let mut acc = 0.0;
        for corner in 0..16usize {
            let mut w = 1.0;
            let mut off = 0;
            for a in 0..4 {
                if corner >> (3 - a) & 1 == 1 {
                    w *= t[a];
                    off += strides[a];
                } else {
                    w *= 1.0 - t[a];
                }
            }
            if w != 0.0 {
                acc += w * self.values[b + off];
            }
        }
        Ok(acc)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Text serialization: a `GRID` header line followed by one value per node.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let c = g.counts;
        let o = g.origin;
        let mut s = String::with_capacity(self.values.len() * 26 + 128);
        let _ = writeln!(
            s,
            "GRID {} {} {} {} {} {} {} {} {}",
            c[0],
            c[1],
            c[2],
            c[3],
            fmt17(g.h),
            fmt17(o[0]),
            fmt17(o[1]),
            fmt17(o[2]),
            fmt17(o[3])
        );
        for v in &self.values {
            s.push_str(&fmt17(*v));
            s.push('\n');
        }
        s
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| LabError::Parse("empty field file".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 10 || toks[0] != "GRID" {
            return Err(LabError::Parse(format!("bad field header: {header}")));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| LabError::Parse(format!("header count {s}: {e}")))
        };
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| LabError::Parse(format!("header value {s}: {e}")))
        };
        let counts = [int(toks[1])?, int(toks[2])?, int(toks[3])?, int(toks[4])?];
        let h = real(toks[5])?;
        let origin = [real(toks[6])?, real(toks[7])?, real(toks[8])?, real(toks[9])?];
        let grid = Grid4::new(origin, h, counts)?;
        let mut values = Vec::with_capacity(grid.len());
        for (n, l) in lines.enumerate() {
            let v = l
                .trim()
                .parse::<f64>()
                .map_err(|e| LabError::Parse(format!("value line {}: {e}", n + 2)))?;
            values.push(v);
        }
        if values.len() != grid.len() {
            return Err(LabError::Parse(format!(
                "header announces {} nodes but file holds {} values",
                grid.len(),
                values.len()
            )));
        }
        GridField::new(grid, values)
    }
}

/// 17 significant digits, `.` decimal point.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Anything that can be evaluated pointwise: sampled fields, closed-form solutions.
pub trait FieldSource: Sync {
    fn value_at(&self, p: &Point) -> Result<f64>;
}

impl FieldSource for GridField {
    fn value_at(&self, p: &Point) -> Result<f64> {
        self.interpolate(p)
    }
}

/// Wraps a closure as a [`FieldSource`].
pub struct FnSource<F>(pub F);

impl<F> FieldSource for FnSource<F>
where
    F: Fn(&Point) -> f64 + Sync,
{
    fn value_at(&self, p: &Point) -> Result<f64> {
        Ok((self.0)(p))
    }
}

/// Evaluates a source at every node of `grid`.
pub fn sample(source: &dyn FieldSource, grid: &Grid4) -> Result<GridField> {
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        values.push(source.value_at(&grid.coord_flat(i))?);
    }
    GridField::new(*grid, values)
}

/// Multilinear resampling onto `target`, which must lie inside the source box.
pub fn resample(field: &GridField, target: &Grid4) -> Result<GridField> {
    if field.grid() == target {
        return Ok(field.clone());
    }
    if !field.grid().contains_box(target) {
        return Err(LabError::OutOfDomain(format!(
            "target box {:?}..{:?} exceeds source box {:?}..{:?}",
            target.origin(),
            target.upper(),
            field.grid().origin(),
            field.grid().upper()
        )));
    }
    sample(field, target)
}

/// Grid nodes inside an open ball plus the discrete boundary layer around them.
#[derive(Debug, Clone)]
pub struct BallMask {
    grid: Grid4,
    center: Point,
    radius: f64,
    interior: Vec<usize>,
    boundary: Vec<usize>,
}

impl BallMask {
    /// Interior nodes are those with `|node - center| < r`; boundary nodes are
    /// non-interior axis neighbours of interior nodes.
    pub fn new(grid: &Grid4, center: Point, r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(LabError::InvalidArgument(format!("bad radius {r}")));
        }
        let lo = grid.origin();
        let up = grid.upper();
        let eps = grid.tol();
        for a in 0..4 {
            if center[a] - r < lo[a] - eps || center[a] + r > up[a] + eps {
                return Err(LabError::OutOfDomain(format!(
                    "ball around {center:?} with radius {r} leaves the grid box on axis {a}"
                )));
            }
        }
        let h = grid.h();
        let counts = grid.counts();
        let mut lo_idx = [0usize; 4];
        let mut hi_idx = [0usize; 4];
        for a in 0..4 {
            let l = ((center[a] - r - lo[a]) / h).floor().max(0.0) as usize;
            let u = ((center[a] + r - lo[a]) / h).ceil().max(0.0) as usize;
            lo_idx[a] = l.min(counts[a] - 1);
            hi_idx[a] = u.min(counts[a] - 1);
        }
        let mut interior = Vec::new();
        for i0 in lo_idx[0]..=hi_idx[0] {
            for i1 in lo_idx[1]..=hi_idx[1] {
                for i2 in lo_idx[2]..=hi_idx[2] {
                    for i3 in lo_idx[3]..=hi_idx[3] {
                        let idx = [i0, i1, i2, i3];
                        let flat = grid.flat(idx);
                        if dist(&grid.coord(idx), &center) < r && grid.has_full_stencil(flat) {
                            interior.push(flat);
                        }
                    }
                }
            }
        }
        let mut is_int = vec![false; grid.len()];
        for &i in &interior {
            is_int[i] = true;
        }
        let strides = grid.strides();
        let mut boundary = Vec::new();
        for &i in &interior {
            for s in strides {
                for j in [i - s, i + s] {
                    if !is_int[j] {
                        boundary.push(j);
                    }
                }
            }
        }
        boundary.sort_unstable();
        boundary.dedup();
        Ok(BallMask {
            grid: *grid,
            center,
            radius: r,
            interior,
            boundary,
        })
    }

    pub fn grid(&self) -> &Grid4 {
        &self.grid
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Sorted flat indices of interior nodes.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Sorted flat indices of boundary-layer nodes.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Interior and boundary nodes, sorted.
    pub fn closure(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.interior.iter().chain(&self.boundary).copied().collect();
        all.sort_unstable();
        all
    }

    pub fn is_interior_lookup(&self) -> Vec<bool> {
        let mut v = vec![false; self.grid.len()];
        for &i in &self.interior {
            v[i] = true;
        }
        v
    }

    /// Every non-interior node touched by the axis and diagonal second-difference
    /// stencils of interior nodes. Superset of [`BallMask::boundary`].
    pub fn stencil_halo(&self) -> Vec<usize> {
        let is_int = self.is_interior_lookup();
        let mut halo = Vec::new();
        for &i in &self.interior {
            for off in crate::ops::STENCIL_OFFSETS.iter() {
                let j = (i as isize + self.flat_delta(off)) as usize;
                if !is_int[j] {
                    halo.push(j);
                }
            }
        }
        halo.sort_unstable();
        halo.dedup();
        halo
    }

    pub(crate) fn flat_delta(&self, off: &[isize; 4]) -> isize {
        let s = self.grid.strides();
        (0..4).map(|a| off[a] * s[a] as isize).sum()
    }

    /// Exact distance from a point inside the ball to its sphere.
    pub fn distance_to_sphere(&self, p: &Point) -> f64 {
        (self.radius - dist(p, &self.center)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(h: f64, n: usize) -> Grid4 {
        Grid4::new([-1.0; 4], h, [n; 4]).unwrap()
    }

    #[test]
    fn build_grid_examples() {
        let g = cube(0.25, 9);
        assert_eq!(g.len(), 6561);
        assert_eq!(g.upper(), [1.0; 4]);
        let g = Grid4::new([0.0; 4], 0.1, [5; 4]).unwrap();
        assert_eq!(g.len(), 625);
        assert!((g.upper()[0] - 0.4).abs() < 1e-15);
        assert_eq!(g.coord([0; 4]), [0.0; 4]);
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        assert!(matches!(
            Grid4::new([0.0; 4], 0.1, [4, 5, 5, 5]),
            Err(LabError::InvalidArgument(_))
        ));
        assert!(Grid4::new([0.0; 4], 0.0, [5; 4]).is_err());
        assert!(Grid4::new([0.0; 4], -1.0, [5; 4]).is_err());
    }

    #[test]
    fn flat_roundtrip() {
        let g = Grid4::new([0.0; 4], 1.0, [5, 6, 7, 8]).unwrap();
        for f in [0, 1, 77, 1679] {
            assert_eq!(g.flat(g.unflat(f)), f);
        }
    }

    #[test]
    fn ball_mask_exhaustive() {
        let g = cube(0.25, 9);
        let m = BallMask::new(&g, [0.0; 4], 0.9).unwrap();
        let is_int = m.is_interior_lookup();
        for i in 0..g.len() {
            let inside = norm(&g.coord_flat(i)) < 0.9;
            assert_eq!(inside, is_int[i], "node {i}");
        }
        for &b in m.boundary() {
            assert!(!is_int[b]);
        }
    }

    #[test]
    fn tiny_radius_has_empty_interior() {
        let g = cube(0.25, 9);
        let m = BallMask::new(&g, [0.0; 4], 0.0).unwrap();
        assert!(m.interior().is_empty());
        let m = BallMask::new(&g, [0.0; 4], 0.5).unwrap();
        assert!(m.interior().contains(&g.flat([4; 4])));
    }

    #[test]
    fn ball_outside_box_is_rejected() {
        let g = cube(0.25, 9);
        assert!(matches!(
            BallMask::new(&g, [0.5, 0.0, 0.0, 0.0], 0.9),
            Err(LabError::OutOfDomain(_))
        ));
    }

    #[test]
    fn resample_quadratic_error() {
        let src = cube(0.25, 9);
        let f = GridField::from_fn(src, |p| p[0] * p[0]).unwrap();
        let dst = cube(0.125, 17);
        let r = resample(&f, &dst).unwrap();
        let h = src.h();
        let mut worst: f64 = 0.0;
        for i in 0..dst.len() {
            let p = dst.coord_flat(i);
            worst = worst.max((r.at(i) - p[0] * p[0]).abs());
        }
        assert!(worst <= h * h / 4.0 + 1e-15, "{worst}");
        assert!(worst > 0.0);
    }

    #[test]
    fn resample_reproduces_coordinates_and_constants() {
        let src = cube(0.25, 9);
        let x1 = GridField::from_fn(src, |p| p[0]).unwrap();
        let c = GridField::constant(src, 3.5);
        let dst = Grid4::new([-0.33; 4], 0.07, [7; 4]).unwrap();
        let rx = resample(&x1, &dst).unwrap();
        let rc = resample(&c, &dst).unwrap();
        for i in 0..dst.len() {
            assert!((rx.at(i) - dst.coord_flat(i)[0]).abs() < 1e-14);
            assert!((rc.at(i) - 3.5).abs() < 1e-14);
        }
        let too_big = Grid4::new([-2.0; 4], 0.5, [5; 4]).unwrap();
        assert!(matches!(resample(&c, &too_big), Err(LabError::OutOfDomain(_))));
        assert_eq!(resample(&x1, &src).unwrap(), x1);
    }

    #[test]
    fn field_text_roundtrip_and_rejection() {
        let g = Grid4::new([0.1, -0.2, 0.3, 0.0], 0.1, [5; 4]).unwrap();
        let f = GridField::from_fn(g, |p| p[0].sin() + p[3]).unwrap();
        let text = f.to_text();
        assert!(text.starts_with("GRID 5 5 5 5 "));
        assert_eq!(GridField::from_text(&text).unwrap(), f);
        let truncated: String = text.lines().take(100).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            GridField::from_text(&truncated),
            Err(LabError::Parse(_))
        ));
    }
}
