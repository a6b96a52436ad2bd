//! Dense complex-matrix kernel.
//!
//! Every operator in the crate is a [`ComplexMatrix`] (an `nalgebra::DMatrix<Complex64>`).
//! Spectral functions go through a full Hermitian eigendecomposition; dimensions in this
//! problem domain are small (tens at most), so exactness wins over iterative schemes.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! - Kronecker ordering: `tensor(a, b)` places index `(i, j)` at `i * dim_b + j`.
//! - Vectorization is column stacking: `vec(X)[i + j * rows] = X[(i, j)]`, which is the
//!   native memory layout of `DMatrix`.
//! - Logarithms are base 2.

use nalgebra::{DMatrix, DVector};
pub type C64 = nalgebra::Complex<f64>;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Global tolerance policy.
///
/// `abs_eps` and `rel_eps` define the scale-aware zero test used for operator
/// equalities; `rank_eps` decides which eigenvalues belong to a support, relative to
/// the largest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    pub abs_eps: f64,
    pub rel_eps: f64,
    pub rank_eps: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs_eps: 1e-10,
            rel_eps: 1e-9,
            rank_eps: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(abs_eps: f64, rel_eps: f64, rank_eps: f64) -> Result<Self> {
        for (name, v) in [("abs_eps", abs_eps), ("rel_eps", rel_eps), ("rank_eps", rank_eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::PreconditionViolated(format!(
                    "tolerance {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(Tolerance {
            abs_eps,
            rel_eps,
            rank_eps,
        })
    }

    /// Zero test for an operator of Frobenius norm `norm` built from inputs whose
    /// norms multiply to `scale`.
    #[inline]
    pub fn is_zero(&self, norm: f64, scale: f64) -> bool {
        norm <= self.abs_eps + self.rel_eps * scale
    }

    /// Eigenvalue cutoff for support decisions given the largest eigenvalue.
    #[inline]
    pub fn support_cutoff(&self, lambda_max: f64) -> f64 {
        self.rank_eps * lambda_max.max(0.0)
    }
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn zeros(d: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(d, d)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let d = values.len();
    let mut m = zeros(d);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = C64::new(v, 0.0);
    }
    m
}

/// `|i><j|` in dimension `d`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(d);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

/// Computational basis vector.
pub fn ket(d: usize, i: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(d);
    v[i] = C64::new(1.0, 0.0);
    v
}

/// `|psi><psi|`.
pub fn ketbra(psi: &ComplexVector) -> ComplexMatrix {
    psi * psi.adjoint()
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.norm()
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.trace()
}

/// Real part of `tr[a b]`, computed without forming the product.
pub fn trace_product_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn check_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Hermiticity defect `‖M − M†‖_F`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn is_hermitian(m: &ComplexMatrix, tol: &Tolerance) -> bool {
    m.is_square() && tol.is_zero(hermiticity_defect(m), m.norm())
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    /// Columns are the orthonormal eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let d = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = C64::new(f(lambda), 0.0);
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// Complex-valued variant of [`HermitianEigen::map`].
    pub fn map_complex(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let d = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = f(lambda);
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.eigenvectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|l| l)
    }
}

/// Hermitian eigendecomposition. Fails with `NotHermitian` when
/// `‖M − M†‖ > abs_eps + rel_eps·‖M‖`.
pub fn hermitian_eig(m: &ComplexMatrix, tol: &Tolerance) -> Result<HermitianEigen> {
    check_square(m)?;
    check_finite(m)?;
    let defect = hermiticity_defect(m);
    if !tol.is_zero(defect, m.norm()) {
        return Err(Error::NotHermitian(defect));
    }
    Ok(hermitian_eig_unchecked(&hermitian_part(m)))
}

pub(crate) fn hermitian_eig_unchecked(m: &ComplexMatrix) -> HermitianEigen {
    let d = m.nrows();
    if d == 0 {
        return HermitianEigen {
            eigenvalues: vec![],
            eigenvectors: zeros(0),
        };
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = zeros(d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen {
        eigenvalues,
        eigenvectors,
    }
}

/// Spectral functions on PSD matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFunction {
    /// Base-2 logarithm on the support; zero on the kernel.
    Log2,
    Sqrt,
    /// `λ^{-1/2}` on the support; zero on the kernel.
    InvSqrtOnSupport,
    Pow(f64),
}

/// Eigendecomposition of a PSD matrix, rejecting eigenvalues below
/// `−(rank_eps·λ_max + abs_eps)`.
pub fn psd_eig(m: &ComplexMatrix, tol: &Tolerance) -> Result<HermitianEigen> {
    let eig = hermitian_eig(m, tol)?;
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, l| acc.max(l.abs()));
    let min = eig.min_eigenvalue();
    if min < -(tol.rank_eps * scale + tol.abs_eps) {
        return Err(Error::NotPsd(min));
    }
    Ok(eig)
}

pub fn matrix_function(m: &ComplexMatrix, f: MatrixFunction, tol: &Tolerance) -> Result<ComplexMatrix> {
    let eig = psd_eig(m, tol)?;
    Ok(apply_spectral(&eig, f, tol))
}

/// Applies `f` to an existing eigendecomposition; eigenvalues at or below the
/// support cutoff map to zero.
pub fn apply_spectral(eig: &HermitianEigen, f: MatrixFunction, tol: &Tolerance) -> ComplexMatrix {
    let cutoff = tol.support_cutoff(eig.max_eigenvalue());
    eig.map(|l| {
        if l <= cutoff {
            return 0.0;
        }
        match f {
            MatrixFunction::Log2 => l.log2(),
            MatrixFunction::Sqrt => l.sqrt(),
            MatrixFunction::InvSqrtOnSupport => 1.0 / l.sqrt(),
            MatrixFunction::Pow(t) => l.powf(t),
        }
    })
}

/// Kronecker product, index `(a, b)` at `a * dim_b + b`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Which factor of a bipartite space to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

pub fn partial_trace(m: &ComplexMatrix, dims: (usize, usize), keep: Subsystem) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    let d = check_square(m)?;
    if d != da * db {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            got: d,
        });
    }
    Ok(match keep {
        Subsystem::A => ComplexMatrix::from_fn(da, da, |a, a2| {
            (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(db, db, |b, b2| {
            (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()
        }),
    })
}

/// Transpose on the second tensor factor.
pub fn partial_transpose_b(m: &ComplexMatrix, dims: (usize, usize)) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    let d = check_square(m)?;
    if d != da * db {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            got: d,
        });
    }
    Ok(ComplexMatrix::from_fn(d, d, |r, c| {
        let (a, b) = (r / db, r % db);
        let (a2, b2) = (c / db, c % db);
        m[(a * db + b2, a2 * db + b)]
    }))
}

/// Projector onto the eigenspaces with eigenvalue above `rank_eps·λ_max`.
pub fn support_projector(m: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix> {
    let eig = psd_eig(m, tol)?;
    Ok(support_projector_of(&eig, tol))
}

pub fn support_projector_of(eig: &HermitianEigen, tol: &Tolerance) -> ComplexMatrix {
    let cutoff = tol.support_cutoff(eig.max_eigenvalue());
    eig.map(|l| if l > cutoff { 1.0 } else { 0.0 })
}

/// Number of eigenvalues above the support cutoff.
pub fn numerical_rank(eig: &HermitianEigen, tol: &Tolerance) -> usize {
    let cutoff = tol.support_cutoff(eig.max_eigenvalue());
    eig.eigenvalues.iter().filter(|&&l| l > cutoff).count()
}

/// Column-stacking vectorization.
pub fn vectorize(m: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &ComplexVector, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// `e^{-iHt}` for Hermitian `H`.
pub fn unitary_evolution(h: &ComplexMatrix, t: f64, tol: &Tolerance) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h, tol)?;
    Ok(eig.map_complex(|e| C64::from_polar(1.0, -e * t)))
}

/// Fréchet derivative of `log2` at a positive definite matrix, in direction `x`.
pub fn log2_derivative(eig: &HermitianEigen, x: &ComplexMatrix) -> ComplexMatrix {
    let v = &eig.eigenvectors;
    let mut y = v.adjoint() * x * v;
    let l = &eig.eigenvalues;
    for i in 0..eig.dim() {
        for j in 0..eig.dim() {
            let (a, b) = (l[i], l[j]);
            let w = if (a - b).abs() <= 1e-12 * a.max(b) {
                1.0 / a
            } else {
                (a.ln() - b.ln()) / (a - b)
            };
            y[(i, j)] *= C64::new(w / std::f64::consts::LN_2, 0.0);
        }
    }
    v * y * v.adjoint()
}

/// `‖U†U − 1‖_F`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let d = u.nrows();
    (u.adjoint() * u - identity(d)).norm()
}
