//! Small dense matrix arithmetic. Problem dimensions here are tiny (state
//! blocks up to 6, joint states up to 12), so everything is row-major `Vec`
//! storage with straightforward loops.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("matrix needs at least one row"));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::domain("ragged or empty matrix rows"));
        }
        Ok(Mat { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Mat::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = e;
        }
        m
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.data[k * other.cols + c];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            out[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                if (self.at(r, c) - self.at(c, r)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Matrix exponential by scaling-and-squaring with a Taylor series. Accurate
/// to machine precision for the small, well-scaled matrices used here.
pub fn matexp(a: &Mat) -> Mat {
    assert_eq!(a.rows, a.cols, "matexp needs a square matrix");
    let n = a.rows;
    let norm = a.max_abs() * n as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(0.5f64.powi(squarings as i32));

    let mut result = Mat::identity(n);
    let mut term = Mat::identity(n);
    for k in 1..=24 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        result = result.add(&term);
        if term.max_abs() < 1e-300 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// Zero-order-hold propagator for ẋ = Ax + Bu over a step of length τ:
/// returns (E, F) with x' = E x + F u, computed exactly from the exponential
/// of the augmented matrix [[A, B], [0, 0]].
pub fn zoh_propagator(a: &Mat, b: &Mat, tau: f64) -> (Mat, Mat) {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.rows);
    let n = a.rows;
    let m = b.cols;
    let mut aug = Mat::zeros(n + m, n + m);
    for r in 0..n {
        for c in 0..n {
            aug.set(r, c, a.at(r, c) * tau);
        }
        for c in 0..m {
            aug.set(r, n + c, b.at(r, c) * tau);
        }
    }
    let e = matexp(&aug);
    let mut big_e = Mat::zeros(n, n);
    let mut big_f = Mat::zeros(n, m);
    for r in 0..n {
        for c in 0..n {
            big_e.set(r, c, e.at(r, c));
        }
        for c in 0..m {
            big_f.set(r, c, e.at(r, n + c));
        }
    }
    (big_e, big_f)
}

/// Solve Ax = b for small square A by Gaussian elimination with partial
/// pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.len());
    let n = a.rows;
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col].abs() < 1e-14 {
            return Err(Error::numeric("singular matrix in linear solve"));
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= m[col * n + col];
        for r in 0..col {
            x[r] -= m[r * n + col] * x[col];
        }
    }
    Ok(x)
}

/// Inverse of a small square matrix.
pub fn inverse(a: &Mat) -> Result<Mat> {
    let n = a.rows;
    let mut inv = Mat::zeros(n, n);
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let col = solve(a, &e)?;
        for r in 0..n {
            inv.set(r, c, col[r]);
        }
    }
    Ok(inv)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Mat) -> Vec<f64> {
    assert!(a.is_symmetric(1e-9), "jacobi eigensolve needs a symmetric matrix");
    let n = a.rows;
    let mut m = a.data.clone();
    for _ in 0..64 {
        let mut off = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                off += m[r * n + c] * m[r * n + c];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-18 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matexp_nilpotent_is_exact() {
        // exp([[0,1],[0,0]]) = [[1,1],[0,1]]
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let e = matexp(&a);
        assert!((e.at(0, 0) - 1.0).abs() < 1e-15);
        assert!((e.at(0, 1) - 1.0).abs() < 1e-15);
        assert!((e.at(1, 0)).abs() < 1e-15);
        assert!((e.at(1, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matexp_rotation() {
        // exp(θ [[0,-1],[1,0]]) is a rotation by θ.
        let th = 0.7f64;
        let a = Mat::from_rows(&[vec![0.0, -th], vec![th, 0.0]]).unwrap();
        let e = matexp(&a);
        assert!((e.at(0, 0) - th.cos()).abs() < 1e-14);
        assert!((e.at(0, 1) + th.sin()).abs() < 1e-14);
        assert!((e.at(1, 0) - th.sin()).abs() < 1e-14);
    }

    #[test]
    fn zoh_double_integrator_closed_form() {
        // pos' = pos + vel τ + u τ²/2, vel' = vel + u τ
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let b = Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let tau = 0.25;
        let (e, f) = zoh_propagator(&a, &b, tau);
        assert!((e.at(0, 1) - tau).abs() < 1e-15);
        assert!((f.at(0, 0) - tau * tau / 2.0).abs() < 1e-15);
        assert!((f.at(1, 0) - tau).abs() < 1e-15);
    }

    #[test]
    fn zoh_composition_is_exact() {
        let a = Mat::from_rows(&[vec![0.1, 1.0], vec![-0.3, 0.2]]).unwrap();
        let b = Mat::from_rows(&[vec![0.5], vec![1.0]]).unwrap();
        let (e1, f1) = zoh_propagator(&a, &b, 0.125);
        let (e2, f2) = zoh_propagator(&a, &b, 0.25);
        let x = vec![0.3, -0.7];
        let u = vec![0.9];
        let one = e2
            .matvec(&x)
            .iter()
            .zip(f2.matvec(&u))
            .map(|(a, b)| a + b)
            .collect::<Vec<_>>();
        let half = e1
            .matvec(&x)
            .iter()
            .zip(f1.matvec(&u))
            .map(|(a, b)| a + b)
            .collect::<Vec<_>>();
        let two = e1
            .matvec(&half)
            .iter()
            .zip(f1.matvec(&u))
            .map(|(a, b)| a + b)
            .collect::<Vec<_>>();
        for (a, b) in one.iter().zip(&two) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_and_inverse() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = solve(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
        let inv = inverse(&a).unwrap();
        let prod = a.matmul(&inv);
        assert!((prod.at(0, 0) - 1.0).abs() < 1e-12);
        assert!(prod.at(0, 1).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues_known() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigenvalues(&a);
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }
}
