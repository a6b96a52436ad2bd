//! Petz recovery maps, coarse-graining maps and Cesàro averages of channel iterates.

use crate::error::{Error, Result};
use crate::numerics::{
    hermitian_part, matrix_function, trace_product_re, ComplexMatrix, MatrixFunction, Tolerance, C64,
};
use crate::quantum::{apply_channel, measure_and_prepare_map, Channel, DensityMatrix, LinearMap, Povm, StochasticMap};

/// Residual threshold for fixed-point tests, per unit of `max(1, ‖ρ‖_F)`.
pub const FIXED_POINT_TOL: f64 = 1e-6;
const PRIOR_FIX_TOL: f64 = 1e-9;

pub(crate) fn require_invertible_prior(gamma: &DensityMatrix, tol: &Tolerance) -> Result<()> {
    if !gamma.is_invertible(tol) {
        return Err(Error::PriorNotInvertible(gamma.min_eigenvalue()));
    }
    Ok(())
}

fn image_of_prior(e: &Channel, gamma: &DensityMatrix, tol: &Tolerance) -> Result<DensityMatrix> {
    if e.dim_in() != gamma.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim_in(),
            got: gamma.dim(),
        });
    }
    require_invertible_prior(gamma, tol)?;
    let image = apply_channel(e, gamma)?;
    if !image.is_invertible(tol) {
        return Err(Error::ImageNotInvertible(image.min_eigenvalue()));
    }
    Ok(image)
}

/// `R(·) = γ^{1/2} E*[E(γ)^{-1/2} (·) E(γ)^{-1/2}] γ^{1/2}`, assembled from superoperators.
pub fn petz_map(e: &Channel, gamma: &DensityMatrix) -> Result<Channel> {
    petz_map_with(e, gamma, &Tolerance::default())
}

pub fn petz_map_with(e: &Channel, gamma: &DensityMatrix, tol: &Tolerance) -> Result<Channel> {
    let image = image_of_prior(e, gamma, tol)?;
    let root = matrix_function(gamma.matrix(), MatrixFunction::Sqrt, tol)?;
    let inv_root = matrix_function(image.matrix(), MatrixFunction::InvSqrtOnSupport, tol)?;
    let map = LinearMap::conjugation(&root)
        .after(&e.adjoint())?
        .after(&LinearMap::conjugation(&inv_root))?;
    Channel::new(map)
}

/// The same Petz map built from Kraus operators `γ^{1/2} K_i† E(γ)^{-1/2}`.
pub fn petz_map_kraus(e: &Channel, gamma: &DensityMatrix) -> Result<Channel> {
    let tol = Tolerance::default();
    let image = image_of_prior(e, gamma, &tol)?;
    let root = matrix_function(gamma.matrix(), MatrixFunction::Sqrt, &tol)?;
    let inv_root = matrix_function(image.matrix(), MatrixFunction::InvSqrtOnSupport, &tol)?;
    let kraus: Vec<ComplexMatrix> = e.kraus().iter().map(|k| &root * k.adjoint() * &inv_root).collect();
    Channel::from_kraus(e.dim_out(), e.dim_in(), &kraus)
}

/// The coarse-graining map `C(·) = Σ_x tr[P_x ·] γ^{1/2} P_x γ^{1/2} / tr[P_x γ]`.
#[derive(Debug, Clone)]
pub struct CoarseGrainingMap {
    channel: Channel,
    povm: Povm,
    prior: DensityMatrix,
    prepared_states: Vec<DensityMatrix>,
}

impl CoarseGrainingMap {
    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn prior(&self) -> &DensityMatrix {
        &self.prior
    }

    /// `γ^{1/2} P_x γ^{1/2} / tr[P_x γ]` in outcome order.
    pub fn prepared_states(&self) -> &[DensityMatrix] {
        &self.prepared_states
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        coarse_grain(rho, self)
    }

    /// `‖C − R ∘ M‖_F` against the Petz construction.
    pub fn petz_consistency(&self) -> Result<f64> {
        let m = crate::quantum::measurement_channel(&self.povm);
        let r = petz_map(&m, &self.prior)?;
        Ok(r.after(&m)?.distance(&self.channel))
    }
}

pub fn coarse_graining_map(p: &Povm, gamma: &DensityMatrix) -> Result<CoarseGrainingMap> {
    coarse_graining_map_with(p, gamma, &Tolerance::default())
}

pub fn coarse_graining_map_with(p: &Povm, gamma: &DensityMatrix, tol: &Tolerance) -> Result<CoarseGrainingMap> {
    if p.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: gamma.dim(),
        });
    }
    require_invertible_prior(gamma, tol)?;
    let root = matrix_function(gamma.matrix(), MatrixFunction::Sqrt, tol)?;
    let mut prepared = Vec::with_capacity(p.len());
    for px in p.elements() {
        let w = trace_product_re(px, gamma.matrix());
        if !(w > 0.0) {
            return Err(Error::ImageNotInvertible(w));
        }
        let s = hermitian_part(&(&root * px * &root)) / C64::new(w, 0.0);
        prepared.push(DensityMatrix::from_channel_output(&s)?);
    }
    let map = measure_and_prepare_map(p, prepared.iter().map(|s| s.matrix()))?;
    let channel = Channel::new(map)?;
    let fixed = (channel.apply(gamma.matrix())? - gamma.matrix()).norm();
    if fixed > PRIOR_FIX_TOL {
        return Err(Error::FrameInvariant(format!(
            "coarse-graining moves the prior by {fixed:.3e}"
        )));
    }
    Ok(CoarseGrainingMap {
        channel,
        povm: p.clone(),
        prior: gamma.clone(),
        prepared_states: prepared,
    })
}

/// `C(ρ)`.
pub fn coarse_grain(rho: &DensityMatrix, c: &CoarseGrainingMap) -> Result<DensityMatrix> {
    apply_channel(&c.channel, rho)
}

/// `C*(Q)` together with the stochastic map `q(y|x) = tr[Q_y σ_x]` realizing it as a
/// post-processing of `P`.
pub fn adjoint_coarse_grain_povm(c: &CoarseGrainingMap, q: &Povm) -> Result<(Povm, StochasticMap)> {
    if q.dim() != c.povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.povm.dim(),
            got: q.dim(),
        });
    }
    let rows: Vec<Vec<f64>> = c
        .prepared_states
        .iter()
        .map(|s| {
            let raw: Vec<f64> = q
                .elements()
                .iter()
                .map(|qy| trace_product_re(qy, s.matrix()).max(0.0))
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let t = StochasticMap::from_rows(&rows)?;
    let adjoint = c.channel.adjoint();
    let elements = q
        .elements()
        .iter()
        .map(|qy| hermitian_part(&adjoint.apply_unchecked(qy)))
        .collect();
    let image = Povm::with_labels(q.labels().to_vec(), elements, &Tolerance::default())?;
    Ok((image, t))
}

/// `(1/n) Σ_{k=1}^{n} E^k`.
pub fn cesaro_average(e: &Channel, n: usize) -> Result<Channel> {
    let mut out = cesaro_checkpoints(e, &[n])?;
    Ok(out.pop().expect("one checkpoint"))
}

/// Cesàro averages at each of the increasing checkpoints, in a single pass.
pub fn cesaro_checkpoints(e: &Channel, checkpoints: &[usize]) -> Result<Vec<Channel>> {
    if e.dim_in() != e.dim_out() {
        return Err(Error::DimensionMismatch {
            expected: e.dim_in(),
            got: e.dim_out(),
        });
    }
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::PreconditionViolated(
            "checkpoints must be positive and strictly increasing".into(),
        ));
    }
    let d = e.dim_in();
    let s = e.superop();
    let mut power = s.clone();
    let mut sum = s.clone();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut k = 1;
    for &n in checkpoints {
        while k < n {
            power = &power * s;
            sum += &power;
            k += 1;
        }
        let avg = &sum / C64::new(n as f64, 0.0);
        out.push(Channel::new(LinearMap::from_superop(d, d, avg)?)?);
    }
    Ok(out)
}

/// Frobenius residual `‖E(ρ) − ρ‖` and whether it is within `FIXED_POINT_TOL·max(1, ‖ρ‖)`.
pub fn fixed_point_residual(e: &LinearMap, rho: &DensityMatrix) -> Result<(f64, bool)> {
    let r = (e.apply(rho.matrix())? - rho.matrix()).norm();
    Ok((r, r <= FIXED_POINT_TOL * rho.matrix().norm().max(1.0)))
}
