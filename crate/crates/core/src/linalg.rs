//! Sparse systems on grid unknowns: CSR storage, Jacobi-preconditioned conjugate
//! gradients for symmetric and restarted GMRES for general matrices, and dense
//! Cholesky / LU paths for small systems.

use nalgebra::{DMatrix, DVector};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (i, di) in d.iter_mut().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] == i {
                    *di = self.vals[k];
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.to_dense();
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((d[(i, j)] - d[(j, i)]).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub direct: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients from a zero start. Stops when
/// `‖r‖₂ ≤ rel_tol·‖b‖₂` or after `max_iter` iterations, returning the last iterate.
pub fn conjugate_gradient(a: &Csr, b: &[f64], rel_tol: f64, max_iter: usize) -> (Vec<f64>, LinearStats) {
    let n = a.n;
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return (
            x,
            LinearStats {
                iterations: 0,
                relative_residual: 0.0,
                direct: false,
            },
        );
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    let mut it = 0;
    while it < max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= rel_tol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (
        x,
        LinearStats {
            iterations: it,
            relative_residual: rel,
            direct: false,
        },
    )
}

/// Dense Cholesky solve, falling back to LU when the matrix is not positive definite.
pub fn dense_solve(a: &Csr, b: &[f64]) -> Option<(Vec<f64>, LinearStats)> {
    let m = a.to_dense();
    let rhs = DVector::from_column_slice(b);
    let sol = match m.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => m.lu().solve(&rhs)?,
    };
    let x: Vec<f64> = sol.iter().copied().collect();
    let mut ax = vec![0.0; a.n];
    a.matvec(&x, &mut ax);
    let bnorm = dot(b, b).sqrt();
    let res: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    Some((
        x,
        LinearStats {
            iterations: 1,
            relative_residual: if bnorm > 0.0 { res / bnorm } else { 0.0 },
            direct: true,
        },
    ))
}

/// Dense LU solve of a general square system.
pub fn dense_lu(a: &Csr, b: &[f64]) -> Option<(Vec<f64>, LinearStats)> {
    let sol = a.to_dense().lu().solve(&DVector::from_column_slice(b))?;
    let x: Vec<f64> = sol.iter().copied().collect();
    let rel = relative_residual(a, &x, b);
    Some((
        x,
        LinearStats {
            iterations: 1,
            relative_residual: rel,
            direct: true,
        },
    ))
}

fn relative_residual(a: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; a.n];
    a.matvec(x, &mut ax);
    let bnorm = dot(b, b).sqrt();
    let res: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    if bnorm > 0.0 {
        res / bnorm
    } else {
        res
    }
}

/// Restarted GMRES with right Jacobi preconditioning for general sparse systems,
/// from a zero start. Stops when `‖b − a x‖₂ ≤ rel_tol·‖b‖₂`; `max_iter` bounds
/// the total number of inner steps.
pub fn gmres(a: &Csr, b: &[f64], rel_tol: f64, restart: usize, max_iter: usize) -> (Vec<f64>, LinearStats) {
    let n = a.n;
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return (
            x,
            LinearStats {
                iterations: 0,
                relative_residual: 0.0,
                direct: false,
            },
        );
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let m = restart.max(1);
    let mut total = 0;
    let mut r = b.to_vec();
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    while total < max_iter {
        let beta = dot(&r, &r).sqrt();
        if beta / bnorm <= rel_tol {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        // Hessenberg columns after Givens rotations
        let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = vec![beta];
        for j in 0..m {
            for i in 0..n {
                z[i] = basis[j][i] * inv_diag[i];
            }
            a.matvec(&z, &mut w);
            let mut h = Vec::with_capacity(j + 2);
            // modified Gram–Schmidt
            for v in basis.iter() {
                let c = dot(&w, v);
                for i in 0..n {
                    w[i] -= c * v[i];
                }
                h.push(c);
            }
            let hn = dot(&w, &w).sqrt();
            h.push(hn);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (p, q) = (h[i], h[i + 1]);
                h[i] = c * p + s * q;
                h[i + 1] = -s * p + c * q;
            }
            let (p, q) = (h[j], h[j + 1]);
            let rr = p.hypot(q);
            let (c, s) = if rr == 0.0 { (1.0, 0.0) } else { (p / rr, q / rr) };
            h[j] = rr;
            h[j + 1] = 0.0;
            cs.push((c, s));
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            hcols.push(h);
            total += 1;
            if g[j + 1].abs() / bnorm <= rel_tol || hn == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution on the triangular system
        let k = hcols.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for jj in i + 1..k {
                s -= hcols[jj][i] * y[jj];
            }
            y[i] = s / hcols[i][i];
        }
        for (jj, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * basis[jj][i] * inv_diag[i];
            }
        }
        a.matvec(&x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
    }
    let rel = relative_residual(a, &x, b);
    (
        x,
        LinearStats {
            iterations: total,
            relative_residual: rel,
            direct: false,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D Dirichlet Laplacian, negated so it is SPD.
    fn laplace_1d(n: usize) -> Csr {
        let mut row_ptr = vec![0];
        let mut cols = vec![];
        let mut vals = vec![];
        for i in 0..n {
            if i > 0 {
                cols.push(i - 1);
                vals.push(-1.0);
            }
            cols.push(i);
            vals.push(2.0);
            if i + 1 < n {
                cols.push(i + 1);
                vals.push(-1.0);
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

    #[test]
    fn cg_and_dense_agree() {
        let a = laplace_1d(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let (x, st) = conjugate_gradient(&a, &b, 1e-13, 1000);
        assert!(st.relative_residual <= 1e-13);
        let (y, _) = dense_solve(&a, &b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-9);
        }
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn gmres_solves_nonsymmetric_systems() {
        let mut a = laplace_1d(30);
        // upwind-like perturbation of the off-diagonals
        for i in 0..a.n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.cols[k] == i + 1 {
                    a.vals[k] -= 0.6;
                } else if a.cols[k] + 1 == i {
                    a.vals[k] += 0.6;
                }
            }
        }
        let b: Vec<f64> = (0..30).map(|i| 1.0 + i as f64 * 0.1).collect();
        let (x, st) = gmres(&a, &b, 1e-10, 8, 500);
        assert!(st.relative_residual <= 1e-10, "{}", st.relative_residual);
        let (y, _) = dense_lu(&a, &b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_1d(5);
        let (x, st) = conjugate_gradient(&a, &[0.0; 5], 1e-10, 10);
        assert_eq!(x, vec![0.0; 5]);
        assert_eq!(st.iterations, 0);
    }
}
