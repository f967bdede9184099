//! Correlation matrices, the prototype spaces attached to them, and the
//! coordinate bases used by the FC layers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{chol, sym_eig, sym_fun, MatFn, Mat, EPS_PD};

pub const VALIDATION_TOL: f64 = 1e-10;

/// Full-rank correlation matrix: symmetric, unit diagonal, positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    m: Mat,
}

impl CorrelationMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        validate(&m)?;
        Ok(CorrelationMatrix { m })
    }

    /// Wraps a matrix produced by a construction that guarantees validity.
    pub fn from_trusted(m: Mat) -> Self {
        CorrelationMatrix { m }
    }

    pub fn identity(n: usize) -> Self {
        CorrelationMatrix { m: Mat::identity(n) }
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.m
    }

    pub fn into_mat(self) -> Mat {
        self.m
    }
}

/// Checks symmetry and unit diagonal within 1e-10 and minimum eigenvalue
/// above `EPS_PD`.
pub fn validate(m: &Mat) -> Result<()> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::InvalidCorrelation(format!("shape {:?}", m.shape())));
    }
    if !m.is_finite() {
        return Err(Error::InvalidCorrelation("non-finite entry".into()));
    }
    let asym = m.asymmetry();
    if asym > VALIDATION_TOL {
        return Err(Error::InvalidCorrelation(format!("asymmetry {asym:e}")));
    }
    for i in 0..m.rows() {
        if (m[(i, i)] - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidCorrelation(format!("diagonal entry {} = {}", i, m[(i, i)])));
        }
    }
    let min = sym_eig(m)?.min_eigenvalue();
    if min <= EPS_PD {
        return Err(Error::InvalidCorrelation(format!("minimum eigenvalue {min:e}")));
    }
    Ok(())
}

/// Symmetric matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HollowSymmetric {
    m: Mat,
}

impl HollowSymmetric {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() || m.asymmetry() > VALIDATION_TOL {
            return Err(Error::NotSymmetric(m.asymmetry()));
        }
        if (0..m.rows()).any(|i| m[(i, i)] != 0.0) {
            return Err(Error::ShapeMismatch("hollow matrix needs a zero diagonal".into()));
        }
        Ok(HollowSymmetric { m: m.symmetrize() })
    }

    pub fn zeros(n: usize) -> Self {
        HollowSymmetric { m: Mat::zeros(n, n) }
    }

    /// Builds `H` from its strictly lower entries in row-major order.
    pub fn from_lower(n: usize, v: &[f64]) -> Self {
        let mut m = Mat::zeros(n, n);
        for (k, (i, j)) in lower_pairs(n).enumerate() {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
        }
        HollowSymmetric { m }
    }

    pub fn lower_entries(&self) -> Vec<f64> {
        lower_pairs(self.n()).map(|(i, j)| self.m[(i, j)]).collect()
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.m
    }

    pub fn into_mat(self) -> Mat {
        self.m
    }
}

/// Symmetric matrix with zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct RowZeroSymmetric {
    m: Mat,
}

impl RowZeroSymmetric {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() || m.asymmetry() > VALIDATION_TOL {
            return Err(Error::NotSymmetric(m.asymmetry()));
        }
        let worst = crate::linalg::row_sums(&m).iter().fold(0.0f64, |a, s| a.max(s.abs()));
        if worst > VALIDATION_TOL * m.max_abs().max(1.0) {
            return Err(Error::ShapeMismatch(format!("row sum {worst:e} is not zero")));
        }
        Ok(RowZeroSymmetric { m })
    }

    pub fn from_trusted(m: Mat) -> Self {
        RowZeroSymmetric { m }
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.m
    }

    pub fn into_mat(self) -> Mat {
        self.m
    }
}

/// Lower-triangular matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct StrictLowerTriangular {
    m: Mat,
}

impl StrictLowerTriangular {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeMismatch(format!("shape {:?}", m.shape())));
        }
        for i in 0..m.rows() {
            for j in i..m.cols() {
                if m[(i, j)] != 0.0 {
                    return Err(Error::ShapeMismatch("entry on or above the diagonal".into()));
                }
            }
        }
        Ok(StrictLowerTriangular { m })
    }

    pub fn from_trusted(m: Mat) -> Self {
        StrictLowerTriangular { m }
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.m
    }

    pub fn into_mat(self) -> Mat {
        self.m
    }
}

/// Cholesky factor of a correlation matrix: positive diagonal, unit rows.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRowCholesky {
    l: Mat,
}

impl UnitRowCholesky {
    pub fn new(l: Mat) -> Result<Self> {
        for i in 0..l.rows() {
            let norm: f64 = l.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > VALIDATION_TOL || l[(i, i)] <= 0.0 {
                return Err(Error::InvalidCorrelation(format!("cholesky row {i} has norm {norm}")));
            }
            if l.row(i)[i + 1..].iter().any(|&x| x != 0.0) {
                return Err(Error::ShapeMismatch("factor is not lower triangular".into()));
            }
        }
        Ok(UnitRowCholesky { l })
    }

    pub fn of(c: &CorrelationMatrix) -> Result<Self> {
        Self::new(chol(c.as_mat())?)
    }

    pub fn as_mat(&self) -> &Mat {
        &self.l
    }
}

/// Strictly lower index pairs `(i, j)`, `i > j`, in row-major order.
pub fn lower_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..n).flat_map(|i| (0..i).map(move |j| (i, j)))
}

/// Index pairs `(i, j)`, `j ≤ i < n - 1`, in row-major order.
pub fn rowzero_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n.saturating_sub(1)).flat_map(|i| (0..=i).map(move |j| (i, j)))
}

pub fn dim_lower(n: usize) -> usize {
    n * (n.saturating_sub(1)) / 2
}

/// `𝔻(Σ)^{-½} Σ 𝔻(Σ)^{-½}` without validation; the diagonal is set to 1.
pub fn cor_mat(sigma: &Mat) -> Result<Mat> {
    let n = sigma.rows();
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let d = sigma[(i, i)];
        if !(d > 0.0) {
            return Err(Error::NonPositiveDiagonal(d));
        }
        s.push(1.0 / d.sqrt());
    }
    let mut c = Mat::from_fn(n, n, |i, j| s[i] * sigma[(i, j)] * s[j]);
    for i in 0..n {
        c[(i, i)] = 1.0;
    }
    Ok(c.symmetrize())
}

/// Adjoint of `cor_mat`: `A G A − 𝔻(G C) 𝔻(Σ)⁻¹` with `A = 𝔻(Σ)^{-½}`.
pub fn cor_backward(sigma: &Mat, c: &Mat, g: &Mat) -> Mat {
    let n = sigma.rows();
    let g = g.symmetrize();
    let gc = g.matmul(c);
    Mat::from_fn(n, n, |i, j| {
        let a = g[(i, j)] / (sigma[(i, i)] * sigma[(j, j)]).sqrt();
        if i == j {
            a - gc[(i, i)] / sigma[(i, i)]
        } else {
            a
        }
    })
}

/// Normalizes an SPD matrix to its correlation matrix.
pub fn cor_of(sigma: &Mat) -> Result<CorrelationMatrix> {
    let c = cor_mat(sigma)?;
    chol(sigma)?;
    Ok(CorrelationMatrix::from_trusted(c))
}

/// `Θ(C) = 𝔻(L)⁻¹ L`, computed from the Cholesky factor.
pub fn theta_of_chol(l: &Mat) -> Mat {
    let n = l.rows();
    let mut k = Mat::from_fn(n, n, |i, j| l[(i, j)] / l[(i, i)]);
    for i in 0..n {
        k[(i, i)] = 1.0;
    }
    k
}

pub fn theta(c: &CorrelationMatrix) -> Result<Mat> {
    Ok(theta_of_chol(&chol(c.as_mat())?))
}

/// `Θ⁻¹(K) = Cor(K Kᵀ)`.
pub fn theta_inv(k: &Mat) -> Result<CorrelationMatrix> {
    crate::linalg::tri::check_unit_lower(k)?;
    Ok(CorrelationMatrix::from_trusted(cor_mat(&k.matmul(&k.transpose()))?))
}

/// `Cor(exp(spread·S))` with `S` symmetric standard normal.
pub fn random_correlation(n: usize, spread: f64, seed: u64) -> Result<CorrelationMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_correlation_with(n, spread, &mut rng)
}

pub fn random_correlation_with(n: usize, spread: f64, rng: &mut impl rand::Rng) -> Result<CorrelationMatrix> {
    if n < 2 || !(spread > 0.0) {
        return Err(Error::InvalidDimension(format!("n={n}, spread={spread}")));
    }
    let mut s = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let x: f64 = StandardNormal.sample(rng);
            s[(i, j)] = x;
            s[(j, i)] = x;
        }
    }
    let e = sym_fun(MatFn::Exp, &s.scale(spread))?;
    Ok(CorrelationMatrix::from_trusted(cor_mat(&e)?))
}

/// Orthonormal basis `(E_ij + E_ji)/√2`, `i > j`, of the hollow matrices.
pub fn hol_basis(m: usize) -> Vec<HollowSymmetric> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    lower_pairs(m)
        .map(|(i, j)| {
            let mut e = Mat::zeros(m, m);
            e[(i, j)] = r;
            e[(j, i)] = r;
            HollowSymmetric { m: e }
        })
        .collect()
}

/// Coordinates of `H` in `hol_basis`: `√2 H_ij`.
pub fn hol_coords(h: &Mat) -> Vec<f64> {
    lower_pairs(h.rows()).map(|(i, j)| std::f64::consts::SQRT_2 * h[(i, j)]).collect()
}

pub fn hol_from_coords(m: usize, v: &[f64]) -> Mat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Mat::zeros(m, m);
    for (k, (i, j)) in lower_pairs(m).enumerate() {
        out[(i, j)] = r * v[k];
        out[(j, i)] = r * v[k];
    }
    out
}

/// Basis of the zero-row-sum matrices indexed by `j ≤ i < m - 1`: diagonal
/// slots `(E_ii − E_il − E_li + E_ll)/√3` and off-diagonal slots
/// `(E_ij + E_ji − E_li − E_il − E_lj − E_jl + 2E_ll)/√6`, with `l = m - 1`.
/// It is orthonormal for the inner product pulled back by `rowzero_coords`.
pub fn rowzero_basis(m: usize) -> Vec<RowZeroSymmetric> {
    let count = rowzero_pairs(m).count();
    (0..count)
        .map(|k| {
            let mut v = vec![0.0; count];
            v[k] = 1.0;
            RowZeroSymmetric { m: rowzero_from_coords(m, &v) }
        })
        .collect()
}

/// `√6 ⌊R̃⌋ + √3 𝔻(R̃)` read out over `j ≤ i < m − 1`, where `R̃` is the
/// leading `(m−1)×(m−1)` block.
pub fn rowzero_coords(r: &Mat) -> Vec<f64> {
    let (s3, s6) = (3f64.sqrt(), 6f64.sqrt());
    rowzero_pairs(r.rows())
        .map(|(i, j)| if i == j { s3 * r[(i, i)] } else { s6 * r[(i, j)] })
        .collect()
}

/// Inverse of `rowzero_coords`: fills the leading block and completes the
/// last row and column so that every row sums to zero.
pub fn rowzero_from_coords(m: usize, v: &[f64]) -> Mat {
    let (s3, s6) = (3f64.sqrt(), 6f64.sqrt());
    let l = m - 1;
    let mut out = Mat::zeros(m, m);
    for (k, (i, j)) in rowzero_pairs(m).enumerate() {
        if i == j {
            out[(i, i)] = v[k] / s3;
        } else {
            out[(i, j)] = v[k] / s6;
            out[(j, i)] = v[k] / s6;
        }
    }
    let mut corner = 0.0;
    for i in 0..l {
        let s: f64 = (0..l).map(|j| out[(i, j)]).sum();
        out[(i, l)] = -s;
        out[(l, i)] = -s;
        corner += s;
    }
    out[(l, l)] = corner;
    out
}

/// Orthogonal projection onto the zero-row-sum subspace.
pub fn project_rowzero(r: &Mat) -> Mat {
    let n = r.rows() as f64;
    let s = crate::linalg::row_sums(r);
    let total: f64 = s.iter().sum();
    Mat::from_fn(r.rows(), r.cols(), |i, j| r[(i, j)] - (s[i] + s[j]) / n + total / (n * n))
}
