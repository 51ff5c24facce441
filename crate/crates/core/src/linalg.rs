//! Small dense matrix kernels.
//!
//! Everything here works on tiny matrices (pointwise metric blocks of order
//! `n <= 3`, system blocks of order `n + 2`), so the routines favour exact
//! symmetry and orthogonality over speed.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged matrix rows".into()));
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect())
    }

    /// `vᵀ M` as a row vector.
    pub fn vec_mul(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.transpose().mul_vec(v)
    }

    pub fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    /// Symmetric part `(M + Mᵀ)/2`.
    pub fn sym_part(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::Shape("symmetric part of a non-square matrix".into()));
        }
        Ok(Matrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        }))
    }

    /// Largest `|M_ij − M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows.min(self.cols) {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric matrix. Symmetry holds exactly: every constructor mirrors one
/// triangle into the other.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Builds from the upper triangle of `f(i, j)` (`i <= j`).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n))
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMatrix(Matrix::diag(values))
    }

    /// Accepts a square matrix whose asymmetry is at most `tol·max(1, ‖M‖_F)`
    /// and stores its symmetric part.
    pub fn from_matrix(m: &Matrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!(
                "expected a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if m.asymmetry() > tol * m.frobenius().max(1.0) {
            return Err(Error::Shape(format!(
                "matrix is not symmetric (asymmetry {:e})",
                m.asymmetry()
            )));
        }
        Ok(Self::from_fn(m.rows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    pub fn order(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn frobenius(&self) -> f64 {
        self.0.frobenius()
    }

    /// `S·S`, symmetric by construction for symmetric `S`.
    pub fn square(&self) -> SymMatrix {
        let n = self.order();
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| self[(i, k)] * self[(k, j)]).sum())
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Eigen-decomposition of a symmetric matrix.
///
/// `vectors` holds the eigenvectors as columns (`V`), eigenvalues ascending,
/// so `A = V·D·Vᵀ`. The transpose `U = Vᵀ` (eigenvectors as rows) gives the
/// `A = Uᵀ·D·U` form used when writing `S = Uᵀ D^{1/2} U`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    /// `U = Vᵀ`, rows are eigenvectors.
    pub fn u(&self) -> Matrix {
        self.vectors.transpose()
    }

    /// `V·diag(f(λ))·Vᵀ`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| v[(i, k)] * fl[k] * v[(j, k)]).sum())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.apply(|l| l)
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigen-solver.
///
/// Sweeps until the off-diagonal Frobenius mass drops below `1e-14·‖A‖_F`.
/// Eigenvalues come out ascending; each eigenvector has its first
/// non-negligible component positive.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomposition> {
    if !a.as_matrix().is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.order();
    let mut m = a.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let norm = m.frobenius();
    let target = 1e-14 * norm;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_mass(&m);
        if off <= target || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);

    for j in 0..n {
        let col_norm: f64 = (0..n).map(|i| vectors[(i, j)].abs()).fold(0.0, f64::max);
        let lead = (0..n)
            .map(|i| vectors[(i, j)])
            .find(|x| x.abs() > 1e-12 * col_norm.max(f64::MIN_POSITIVE));
        if matches!(lead, Some(x) if x < 0.0) {
            for i in 0..n {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_mass(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Relative eigenvalue floor below which a matrix is not treated as SPD.
pub const SPD_FLOOR_REL: f64 = 1e-12;

pub fn spd_floor(r: &SymMatrix) -> f64 {
    SPD_FLOOR_REL * r.frobenius()
}

/// Unique SPD square root `S = Uᵀ D^{1/2} U` of an SPD matrix.
pub fn spd_sqrt(r: &SymMatrix) -> Result<SymMatrix> {
    spd_sqrt_with_floor(r, spd_floor(r))
}

pub fn spd_sqrt_with_floor(r: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    let eig = sym_eig(r)?;
    check_spd(&eig, floor)?;
    Ok(eig.apply(f64::sqrt))
}

/// Inverse of an SPD matrix.
pub fn spd_inverse(r: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(r)?;
    check_spd(&eig, spd_floor(r))?;
    Ok(eig.apply(f64::recip))
}

/// Inverse of a symmetric, possibly indefinite, matrix.
pub fn sym_inverse(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(a)?;
    let floor = spd_floor(a);
    if let Some(&l) = eig.values.iter().find(|l| l.abs() <= floor) {
        return Err(Error::Singular {
            eigenvalue: l,
            floor,
        });
    }
    Ok(eig.apply(f64::recip))
}

fn check_spd(eig: &EigenDecomposition, floor: f64) -> Result<()> {
    let min = eig.values.first().copied().unwrap_or(f64::INFINITY);
    if min <= floor {
        return Err(Error::NotSpd {
            min_eigenvalue: min,
            floor,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignatureVerdict {
    Riemannian,
    Lorentzian,
    Degenerate,
    Other,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SignatureReport {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
    /// Number of negative eigenvalues.
    pub index: usize,
    pub verdict: SignatureVerdict,
}

/// Relative tolerance below which an eigenvalue counts as zero.
pub const SIGNATURE_ZERO_REL: f64 = 1e-10;

/// Eigenvalue signature of a symmetric matrix.
pub fn lorentzian_check(g: &SymMatrix) -> Result<SignatureReport> {
    let eig = sym_eig(g)?;
    let tol = SIGNATURE_ZERO_REL * g.frobenius();
    let mut negative = 0;
    let mut zero = 0;
    let mut positive = 0;
    for &l in &eig.values {
        if l.abs() <= tol {
            zero += 1;
        } else if l < 0.0 {
            negative += 1;
        } else {
            positive += 1;
        }
    }
    let verdict = if zero > 0 {
        SignatureVerdict::Degenerate
    } else if negative == 0 {
        SignatureVerdict::Riemannian
    } else if negative == 1 {
        SignatureVerdict::Lorentzian
    } else {
        SignatureVerdict::Other
    };
    Ok(SignatureReport {
        negative,
        zero,
        positive,
        index: negative,
        verdict,
    })
}

/// Assembles `G = [[-1, gᵀ], [g, R]]`.
pub fn assemble_metric(g: &[f64], r: &SymMatrix) -> Result<SymMatrix> {
    let n = r.order();
    if g.len() != n {
        return Err(Error::Shape(format!(
            "shift vector of length {} for a {n}x{n} spatial block",
            g.len()
        )));
    }
    Ok(SymMatrix::from_fn(n + 1, |i, j| match (i, j) {
        (0, 0) => -1.0,
        (0, j) => g[j - 1],
        (i, j) => r[(i - 1, j - 1)],
    }))
}

/// Row divergence `(Div S)_i = Σ_j ∂_{x_j} S_ij` by central differences with
/// step `h`. `field(t, x)` is evaluated on the `2n`-point stencil around `x`.
pub fn matrix_divergence<F>(field: F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Matrix>,
{
    let n = x.len();
    let mut div: Option<Vec<f64>> = None;
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let plus = field(t, &xp)?;
        xp[j] = x[j] - h;
        let minus = field(t, &xp)?;
        xp[j] = x[j];
        if plus.cols() != n {
            return Err(Error::Shape(format!(
                "divergence of a matrix with {} columns in {n} dimensions",
                plus.cols()
            )));
        }
        let d = div.get_or_insert_with(|| vec![0.0; plus.rows()]);
        for (i, di) in d.iter_mut().enumerate() {
            *di += (plus[(i, j)] - minus[(i, j)]) / (2.0 * h);
        }
    }
    Ok(div.unwrap_or_default())
}

/// `∂ₜS` by the central stencil in `t`.
pub fn matrix_time_derivative<F>(field: F, t: f64, x: &[f64], h: f64) -> Result<Matrix>
where
    F: Fn(f64, &[f64]) -> Result<Matrix>,
{
    let plus = field(t + h, x)?;
    let minus = field(t - h, x)?;
    plus.zip_with(&minus, |a, b| (a - b) / (2.0 * h))
}
