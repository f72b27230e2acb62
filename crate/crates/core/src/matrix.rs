//! Dense complex square matrices and a deterministic Hermitian eigensolver.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QuditError, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Square complex matrix. Thin wrapper over `nalgebra::DMatrix` that keeps
/// every operator in the crate square and exposes the Hermitian helpers the
/// physics code needs.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(dim, dim, f))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = re(d);
        }
        m
    }

    /// Wraps an existing nalgebra matrix. Fails if it is not square.
    pub fn from_dmatrix(inner: DMatrix<C64>) -> Result<Self> {
        if inner.nrows() != inner.ncols() {
            return Err(QuditError::DimensionMismatch {
                expected: inner.nrows(),
                found: inner.ncols(),
            });
        }
        Ok(Self(inner))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * re(s))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius (Hilbert–Schmidt) norm.
    pub fn hs_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hilbert–Schmidt inner product `tr(a† b)`.
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    /// Max-abs deviation from Hermiticity, relative to the max-abs norm.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.max_abs();
        if n == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            for c in r..self.dim() {
                worst = worst.max((self.0[(r, c)] - self.0[(c, r)].conj()).norm());
            }
        }
        worst / n
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_error() <= rel_tol
    }

    /// Largest off-diagonal entry relative to the max-abs norm.
    pub fn off_diagonal_ratio(&self) -> f64 {
        let n = self.max_abs();
        if n == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                if r != c {
                    worst = worst.max(self.0[(r, c)].norm());
                }
            }
        }
        worst / n
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|c| self.0[(r, c)] * v[c]).sum())
            .collect()
    }

    /// `⟨v|M|v⟩`.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let mv = self.matvec(v);
        v.iter().zip(mv.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Principal submatrix on the given index set, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |r, c| self.0[(idx[r], idx[c])])
    }

    /// General matrix exponential (Padé scaling and squaring).
    pub fn expm(&self) -> Self {
        Self(self.0.exp())
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.0
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(QuditError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Hermitian eigendecomposition with eigenvalues ascending and a
    /// deterministic eigenvector basis (see [`HermitianEigen`]).
    pub fn eigh(&self) -> HermitianEigen {
        HermitianEigen::new(self)
    }
}

/// `[a, b] = ab − ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_same_dim(b)?;
    Ok(ComplexMatrix(&a.0 * &b.0 - &b.0 * &a.0))
}

/// Conjugate transpose.
pub fn dagger(a: &ComplexMatrix) -> ComplexMatrix {
    a.dagger()
}

/// Kronecker product. The left factor's index varies slowest.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix product dimension mismatch");
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix sum dimension mismatch");
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix difference dimension mismatch");
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim(), self.dim())?;
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|c| {
                    let z = self.0[(r, c)];
                    format!("{:+.4e}{:+.4e}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Eigenpairs of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending. Inside each degenerate cluster the basis
/// is rebuilt by Gram–Schmidt over the projected unit vectors in index order,
/// and every vector's largest component (first index on ties) is made real and
/// positive, so the output does not depend on the backend's arbitrary choices.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    const DEGENERACY_REL_TOL: f64 = 1e-9;

    pub fn new(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: ComplexMatrix::zeros(0),
            };
        }
        // symmetrize before handing the lower triangle to the solver
        let herm = (&m.0 + m.0.adjoint()) * re(0.5);
        let eig = SymmetricEigen::new(herm);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut cols: Vec<DVector<C64>> = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();

        let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        let tol = Self::DEGENERACY_REL_TOL * scale;
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && (values[end] - values[end - 1]).abs() <= tol {
                end += 1;
            }
            if end - start > 1 {
                canonicalize_cluster(&mut cols[start..end]);
            }
            start = end;
        }
        for col in cols.iter_mut() {
            fix_phase(col);
        }
        let vectors = ComplexMatrix(DMatrix::from_columns(&cols));
        Self { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.0.column(k).iter().cloned().collect()
    }

    /// `Σ_k f(λ_k) |v_k⟩⟨v_k|`.
    pub fn function(&self, mut f: impl FnMut(f64) -> C64) -> ComplexMatrix {
        let v = &self.vectors.0;
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.values.iter().map(|&l| f(l)),
        ));
        ComplexMatrix(v * d * v.adjoint())
    }
}

fn canonicalize_cluster(cols: &mut [DVector<C64>]) {
    let k = cols.len();
    let n = cols[0].len();
    let basis: Vec<DVector<C64>> = cols.to_vec();
    let mut out: Vec<DVector<C64>> = Vec::with_capacity(k);
    for i in 0..n {
        if out.len() == k {
            break;
        }
        // projection of e_i onto the cluster subspace
        let mut v = DVector::<C64>::zeros(n);
        for b in &basis {
            v += b * b[i].conj();
        }
        for _ in 0..2 {
            for o in &out {
                let ov = o.dotc(&v);
                v -= o * ov;
            }
        }
        let norm = v.norm();
        if norm > 1e-3 {
            out.push(v / re(norm));
        }
    }
    if out.len() == k {
        cols.clone_from_slice(&out);
    }
}

fn fix_phase(v: &mut DVector<C64>) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    let phase = v[pivot] / re(v[pivot].norm());
    *v *= phase.conj();
}
