use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows * cols");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Column vector (n x 1).
    pub fn col(v: &[f64]) -> Self {
        Mat { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn scalar(x: f64) -> Self {
        Mat { rows: 1, cols: 1, data: vec![x] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_scalar(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let orow = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &rhs.data[p * m..(p + 1) * m];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Mat { rows: n, cols: m, data: out }
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn tmatmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.rows, rhs.rows, "tmatmul shape mismatch");
        let (k, n, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        for p in 0..k {
            let arow = &self.data[p * n..(p + 1) * n];
            let brow = &rhs.data[p * m..(p + 1) * m];
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out[i * m..(i + 1) * m];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Mat { rows: n, cols: m, data: out }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn hadamard(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).collect(),
        }
    }

    /// Frobenius inner product.
    pub fn dot(&self, rhs: &Mat) -> f64 {
        assert_eq!(self.shape(), rhs.shape());
        self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(A + A^T) / 2`
    pub fn symmetrize(&self) -> Mat {
        Mat::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    pub fn max_abs_diff(&self, rhs: &Mat) -> f64 {
        assert_eq!(self.shape(), rhs.shape());
        self.data.iter().zip(&rhs.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Solves `self * X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Mat) -> Result<Mat> {
        assert!(self.is_square() && self.rows == rhs.rows);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut b = rhs.clone();
        let m = rhs.cols;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if a[i * n + k].abs() > a[p * n + k].abs() {
                    p = i;
                }
            }
            if a[p * n + k].abs() <= 1e-14 * scale {
                return Err(Error::SingularSystem);
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                for j in 0..m {
                    b.data.swap(k * m + j, p * m + j);
                }
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                if f == 0.0 {
                    continue;
                }
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                for j in 0..m {
                    b.data[i * m + j] -= f * b.data[k * m + j];
                }
            }
        }
        for k in (0..n).rev() {
            let piv = a[k * n + k];
            for j in 0..m {
                let mut s = b.data[k * m + j];
                for i in k + 1..n {
                    s -= a[k * n + i] * b.data[i * m + j];
                }
                b.data[k * m + j] = s / piv;
            }
        }
        Ok(b)
    }

    pub fn inverse(&self) -> Result<Mat> {
        self.solve(&Mat::identity(self.rows))
    }

    /// Solves `L X = rhs` for lower-triangular `self`.
    pub fn solve_lower(&self, rhs: &Mat) -> Mat {
        let n = self.rows;
        let m = rhs.cols;
        let mut x = rhs.clone();
        for j in 0..m {
            for i in 0..n {
                let mut s = x[(i, j)];
                for k in 0..i {
                    s -= self[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / self[(i, i)];
            }
        }
        x
    }

    /// Solves `L^T X = rhs` for lower-triangular `self`.
    pub fn solve_lower_transpose(&self, rhs: &Mat) -> Mat {
        let n = self.rows;
        let m = rhs.cols;
        let mut x = rhs.clone();
        for j in 0..m {
            for i in (0..n).rev() {
                let mut s = x[(i, j)];
                for k in i + 1..n {
                    s -= self[(k, i)] * x[(k, j)];
                }
                x[(i, j)] = s / self[(i, i)];
            }
        }
        x
    }

    /// Inverse of a lower-triangular matrix.
    pub fn lower_inverse(&self) -> Mat {
        self.solve_lower(&Mat::identity(self.rows))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        self.matmul(rhs)
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl AddAssign<&Mat> for Mat {
    fn add_assign(&mut self, rhs: &Mat) {
        assert_eq!(self.shape(), rhs.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Mat> for Mat {
    fn sub_assign(&mut self, rhs: &Mat) {
        assert_eq!(self.shape(), rhs.shape(), "sub_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Diagonal part of a square matrix, as a diagonal matrix.
pub fn dmat(m: &Mat) -> Mat {
    Mat::from_fn(m.rows, m.cols, |i, j| if i == j { m[(i, j)] } else { 0.0 })
}

/// `m - dmat(m)`
pub fn offmat(m: &Mat) -> Mat {
    Mat::from_fn(m.rows, m.cols, |i, j| if i == j { 0.0 } else { m[(i, j)] })
}

pub fn strict_lower(m: &Mat) -> Mat {
    Mat::from_fn(m.rows, m.cols, |i, j| if i > j { m[(i, j)] } else { 0.0 })
}

pub fn lower(m: &Mat) -> Mat {
    Mat::from_fn(m.rows, m.cols, |i, j| if i >= j { m[(i, j)] } else { 0.0 })
}

/// Strict lower part plus half the diagonal.
pub fn half_lower(m: &Mat) -> Mat {
    Mat::from_fn(m.rows, m.cols, |i, j| {
        if i > j {
            m[(i, j)]
        } else if i == j {
            0.5 * m[(i, j)]
        } else {
            0.0
        }
    })
}

pub fn diag_from_vec(v: &[f64]) -> Mat {
    let n = v.len();
    Mat::from_fn(n, n, |i, j| if i == j { v[i] } else { 0.0 })
}

pub fn diagvec(m: &Mat) -> Vec<f64> {
    (0..m.rows.min(m.cols)).map(|i| m[(i, i)]).collect()
}

pub fn sum_all(m: &Mat) -> f64 {
    m.data.iter().sum()
}

/// Row sums `m * 1`.
pub fn row_sums(m: &Mat) -> Vec<f64> {
    (0..m.rows).map(|i| m.row(i).iter().sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers_are_structural() {
        assert_eq!(half_lower(&Mat::identity(2)), Mat::identity(2).scale(0.5));
        assert_eq!(offmat(&diag_from_vec(&[1.0, 2.0, 3.0])), Mat::zeros(3, 3));
        let m = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(strict_lower(&m), Mat::from_rows(&[&[0.0, 0.0], &[3.0, 0.0]]));
        assert_eq!(diagvec(&m), vec![1.0, 4.0]);
        assert_eq!(sum_all(&m), 10.0);
        assert_eq!(&dmat(&m) + &offmat(&m), m);
    }

    #[test]
    fn solve_and_triangular_solves() {
        let a = Mat::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
        let b = Mat::col(&[1.0, 2.0, 3.0]);
        let x = a.solve(&b).unwrap();
        assert!((&a * &x).max_abs_diff(&b) < 1e-14);
        let l = Mat::from_rows(&[&[2.0, 0.0, 0.0], &[1.0, 3.0, 0.0], &[-1.0, 0.5, 1.5]]);
        let y = l.solve_lower(&b);
        assert!((&l * &y).max_abs_diff(&b) < 1e-14);
        let z = l.solve_lower_transpose(&b);
        assert!((&l.transpose() * &z).max_abs_diff(&b) < 1e-14);
        assert!(Mat::zeros(2, 2).solve(&Mat::col(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn tmatmul_matches_transpose() {
        let a = Mat::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = Mat::from_rows(&[&[1.0, -1.0], &[0.5, 2.0]]);
        assert_eq!(a.tmatmul(&b), a.transpose().matmul(&b));
    }
}
