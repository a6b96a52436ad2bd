use crate::error::{Error, Result};
use crate::numerics::{
    check_finite, check_square, diag, hermitian_eig, hermitian_eig_unchecked, hermitian_part, identity,
    ketbra, partial_trace, tensor, trace, ComplexMatrix, ComplexVector, HermitianEigen, Subsystem, Tolerance,
    C64,
};

const TRACE_TOL: f64 = 1e-10;
/// Largest negative eigenvalue silently clamped in channel outputs.
pub const OUTPUT_CLAMP: f64 = 1e-8;

/// A density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, &Tolerance::default())
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: &Tolerance) -> Result<Self> {
        let eig = hermitian_eig(&m, tol).map_err(|e| match e {
            Error::NotHermitian(x) => Error::InvalidState(format!("not Hermitian (defect {x:.3e})")),
            other => other,
        })?;
        let min = eig.min_eigenvalue();
        if min < -(tol.rank_eps * eig.max_eigenvalue().abs().max(1.0)) {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {:.12} + {:.3e}i", tr.re, tr.im)));
        }
        Ok(DensityMatrix { mat: hermitian_part(&m) })
    }

    /// Divides a nonzero PSD matrix by its trace.
    pub fn from_unnormalized(m: ComplexMatrix) -> Result<Self> {
        check_square(&m)?;
        check_finite(&m)?;
        let tr = trace(&m).re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("nonpositive trace {tr:.3e}")));
        }
        Self::new(m / C64::new(tr, 0.0))
    }

    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidState("zero or non-finite ket".into()));
        }
        Self::new(ketbra(&(psi / C64::new(n, 0.0))))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            mat: identity(d) / C64::new(d as f64, 0.0),
        }
    }

    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        Self::new(diag(p))
    }

    /// Projects a channel output back onto the state space: negative eigenvalues down
    /// to `-OUTPUT_CLAMP` are set to zero and the trace is renormalized.
    pub fn from_channel_output(m: &ComplexMatrix) -> Result<Self> {
        check_square(m)?;
        check_finite(m)?;
        let h = hermitian_part(m);
        let eig = hermitian_eig_unchecked(&h);
        let min = eig.min_eigenvalue();
        if min < -OUTPUT_CLAMP {
            return Err(Error::InvalidOutput(min));
        }
        let fixed = if min < 0.0 { eig.map(|l| l.max(0.0)) } else { h };
        let tr = trace(&fixed).re;
        if !(tr > 0.0) {
            return Err(Error::InvalidOutput(tr));
        }
        Ok(DensityMatrix {
            mat: fixed / C64::new(tr, 0.0),
        })
    }

    pub(crate) fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        DensityMatrix { mat: hermitian_part(&m) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn eig(&self) -> HermitianEigen {
        hermitian_eig_unchecked(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().min_eigenvalue()
    }

    /// Invertibility in the sense of the support cutoff: smallest eigenvalue strictly
    /// above `rank_eps·λ_max`.
    pub fn is_invertible(&self, tol: &Tolerance) -> bool {
        let e = self.eig();
        e.min_eigenvalue() > tol.support_cutoff(e.max_eigenvalue())
    }

    /// Convex combination `Σ w_i ρ_i`; weights are renormalized.
    pub fn mixture(terms: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let d = first.1.dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        let mut total = 0.0;
        for (w, rho) in terms {
            if rho.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: rho.dim(),
                });
            }
            if *w < 0.0 {
                return Err(Error::InvalidState(format!("negative mixture weight {w}")));
            }
            acc += rho.matrix() * C64::new(*w, 0.0);
            total += w;
        }
        if !(total > 0.0) {
            return Err(Error::InvalidState("mixture weights sum to zero".into()));
        }
        Ok(DensityMatrix::from_matrix_unchecked(acc / C64::new(total, 0.0)))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            mat: tensor(&self.mat, &other.mat),
        }
    }

    pub fn partial_trace(&self, dims: (usize, usize), keep: Subsystem) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_matrix_unchecked(partial_trace(&self.mat, dims, keep)?))
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Result<DensityMatrix> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        Ok(DensityMatrix::from_matrix_unchecked(u * &self.mat * u.adjoint()))
    }

    /// Frobenius distance to another state.
    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        (&self.mat - &other.mat).norm()
    }
}

/// A state diagonal in the computational (outcome) basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalState {
    state: DensityMatrix,
}

impl ClassicalState {
    pub fn new(state: DensityMatrix, tol: &Tolerance) -> Result<Self> {
        let m = state.matrix();
        let d = state.dim();
        for i in 0..d {
            for j in 0..d {
                if i != j && m[(i, j)].norm() > tol.abs_eps {
                    return Err(Error::InvalidState(format!(
                        "off-diagonal entry ({i}, {j}) has magnitude {:.3e}",
                        m[(i, j)].norm()
                    )));
                }
            }
        }
        Ok(ClassicalState { state })
    }

    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        Ok(ClassicalState {
            state: DensityMatrix::from_diagonal(p)?,
        })
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.state.dim()).map(|i| self.state.matrix()[(i, i)].re).collect()
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn into_state(self) -> DensityMatrix {
        self.state
    }
}
