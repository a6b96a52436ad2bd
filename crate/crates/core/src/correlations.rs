//! Bipartite systems with a frame on the `A` side: locally macroscopic states, local
//! operation classes and observational discord.

use serde::{Deserialize, Serialize};

use crate::entropy::{marginals, mutual_information, relative_entropy_with, EntropyValue};
use crate::error::{Error, Result};
use crate::mppp::{compute_mppp_with, residual_test, InferentialFrame, MacroReport};
use crate::numerics::{
    hermitian_eig_unchecked, identity, log2_derivative, matrix_unit, partial_trace, tensor, trace_product_re,
    ComplexMatrix, Subsystem, Tolerance, C64,
};
use crate::quantum::{channel_tensor_identity, measurement_channel, Channel, DensityMatrix};
use crate::resources::{ChannelClassification, MinimizerOptions, MinimizerReport, COVARIANCE_TOL, FREE_STATE_TOL};
use crate::retrodiction::FIXED_POINT_TOL;

/// Threshold on the local deficit.
pub const LOCAL_DEFICIT_TOL: f64 = 1e-7;
/// Threshold on the discord for the vanishing test.
pub const DISCORD_TOL: f64 = 1e-8;
/// Largest `dA·dB` handed to the local minimizer.
pub const MINIMIZER_DIM_LIMIT: usize = 9;
const PRODUCT_TOL: f64 = 1e-9;
const LOCAL_IDEMPOTENCE_TOL: f64 = 1e-8;
const NEGATIVE_DISCORD_TOL: f64 = 1e-8;
const REGULARIZATION: f64 = 1e-9;

/// A frame on `A` together with a prior on `B`, acting on `A ⊗ B`.
#[derive(Debug, Clone)]
pub struct LocalFrame {
    frame_a: InferentialFrame,
    dim_b: usize,
    gamma_b: DensityMatrix,
    local_cg: Channel,
    local_rdm: Channel,
}

impl LocalFrame {
    pub fn new(frame_a: InferentialFrame, gamma_b: DensityMatrix) -> Result<Self> {
        let tol = *frame_a.tolerance();
        if !gamma_b.is_invertible(&tol) {
            return Err(Error::PriorNotInvertible(gamma_b.min_eigenvalue()));
        }
        Self::with_marginal(frame_a, gamma_b)
    }

    /// Builds the local frame from a POVM on `A` and the two prior factors.
    pub fn from_povm(p_a: &crate::quantum::Povm, gamma_a: &DensityMatrix, gamma_b: DensityMatrix) -> Result<Self> {
        Self::new(compute_mppp_with(p_a, gamma_a, &Tolerance::default())?, gamma_b)
    }

    /// Accepts a joint prior only if it factorizes into its marginals.
    pub fn from_joint_prior(p_a: &crate::quantum::Povm, gamma_ab: &DensityMatrix, dims: (usize, usize)) -> Result<Self> {
        let (ga, gb) = marginals(gamma_ab, dims)?;
        let gap = (ga.tensor(&gb).matrix() - gamma_ab.matrix()).norm();
        if gap > PRODUCT_TOL {
            return Err(Error::NonProductPrior(gap));
        }
        Self::from_povm(p_a, &ga, gb)
    }

    /// Skips the invertibility check on `γ_B`; used where `B` only enters through marginals.
    fn with_marginal(frame_a: InferentialFrame, gamma_b: DensityMatrix) -> Result<Self> {
        let dim_b = gamma_b.dim();
        let local_cg = channel_tensor_identity(frame_a.cg().channel(), dim_b)?;
        let local_rdm = channel_tensor_identity(frame_a.rdm(), dim_b)?;
        let s = local_rdm.superop();
        let defect = (s * s - s).norm();
        if defect > LOCAL_IDEMPOTENCE_TOL {
            return Err(Error::FrameInvariant(format!("local destroying map off idempotent by {defect:.3e}")));
        }
        Ok(LocalFrame {
            frame_a,
            dim_b,
            gamma_b,
            local_cg,
            local_rdm,
        })
    }

    pub fn frame_a(&self) -> &InferentialFrame {
        &self.frame_a
    }

    pub fn dim_a(&self) -> usize {
        self.frame_a.dim()
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_a(), self.dim_b)
    }

    pub fn gamma_b(&self) -> &DensityMatrix {
        &self.gamma_b
    }

    /// `γ_A ⊗ γ_B`.
    pub fn prior(&self) -> DensityMatrix {
        self.frame_a.prior().tensor(&self.gamma_b)
    }

    /// `C ⊗ id`.
    pub fn local_cg(&self) -> &Channel {
        &self.local_cg
    }

    /// `Δ ⊗ id`.
    pub fn local_rdm(&self) -> &Channel {
        &self.local_rdm
    }

    fn check_state(&self, rho: &DensityMatrix) -> Result<()> {
        let d = self.dim_a() * self.dim_b;
        if rho.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rho.dim(),
            });
        }
        Ok(())
    }
}

/// `Σ_y σ_y ⊗ Tr_A[(Π_y ⊗ 1) ρ (Π_y ⊗ 1)]`, compared against `ρ`.
fn block_decomposition(rho: &DensityMatrix, frame_a: &InferentialFrame, dim_b: usize) -> Result<((f64, bool), Vec<f64>)> {
    let dims = (frame_a.dim(), dim_b);
    let id_b = identity(dim_b);
    let mut fit = ComplexMatrix::zeros(rho.dim(), rho.dim());
    let mut weights = Vec::with_capacity(frame_a.num_macrostates());
    for (pi, sigma) in frame_a.mppp().elements().iter().zip(frame_a.extreme_points()) {
        let lift = tensor(pi, &id_b);
        let tau = partial_trace(&(&lift * rho.matrix() * &lift), dims, Subsystem::B)?;
        weights.push(tau.trace().re);
        fit += tensor(sigma.matrix(), &tau);
    }
    let r = (rho.matrix() - fit).norm();
    Ok(((r, r <= FIXED_POINT_TOL * rho.matrix().norm().max(1.0)), weights))
}

/// Evaluates the four equivalent conditions for `ρ_AB` being locally macroscopic.
pub fn locally_macro_test(rho: &DensityMatrix, l: &LocalFrame) -> Result<MacroReport> {
    l.check_state(rho)?;
    let tol = l.frame_a.tolerance();
    let gamma = l.prior();
    let m = channel_tensor_identity(&measurement_channel(l.frame_a.povm()), l.dim_b)?;
    let before = relative_entropy_with(rho, &gamma, tol)?;
    let rho_m = DensityMatrix::from_channel_output(&m.apply(rho.matrix())?)?;
    let gamma_m = DensityMatrix::from_channel_output(&m.apply(gamma.matrix())?)?;
    let after = relative_entropy_with(&rho_m, &gamma_m, tol)?;
    let deficit = before.minus(&after)?;
    let deficit_zero = deficit.is_finite() && deficit.value <= LOCAL_DEFICIT_TOL;
    let cg = residual_test(&l.local_cg, rho.matrix());
    let rd = residual_test(&l.local_rdm, rho.matrix());
    let (dec, weights) = block_decomposition(rho, &l.frame_a, l.dim_b)?;
    MacroReport::consensus(deficit, deficit_zero, cg, rd, dec, weights)
}

/// Mutual information before and after reading `A` through a POVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscordReport {
    pub total_mi: EntropyValue,
    pub measured_mi: EntropyValue,
    pub discord: EntropyValue,
    /// Condition-by-condition vanishing test; absent when `ρ_A` is singular.
    pub vanishing: Option<MacroReport>,
}

impl DiscordReport {
    pub fn vanishes(&self) -> Option<bool> {
        self.vanishing.as_ref().map(|r| r.verdict)
    }
}

fn discord_values(rho: &DensityMatrix, p_a: &crate::quantum::Povm, dims: (usize, usize)) -> Result<(EntropyValue, EntropyValue, EntropyValue)> {
    if dims.0 * dims.1 != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: dims.0 * dims.1,
            got: rho.dim(),
        });
    }
    if p_a.dim() != dims.0 {
        return Err(Error::DimensionMismatch {
            expected: dims.0,
            got: p_a.dim(),
        });
    }
    let total = mutual_information(rho, dims)?;
    let m = channel_tensor_identity(&measurement_channel(p_a), dims.1)?;
    let omega = DensityMatrix::from_channel_output(&m.apply(rho.matrix())?)?;
    let measured = mutual_information(&omega, (p_a.len(), dims.1))?;
    let discord = total.minus(&measured)?;
    if discord.value < -NEGATIVE_DISCORD_TOL {
        return Err(Error::TheoremViolation(format!("negative discord {:.3e}", discord.value)));
    }
    Ok((total, measured, discord))
}

/// `I(A;B) − I(X;B)` with `X` the outcome of `P_A`.
pub fn observational_discord(rho: &DensityMatrix, p_a: &crate::quantum::Povm, dims: (usize, usize)) -> Result<DiscordReport> {
    let (total_mi, measured_mi, discord) = discord_values(rho, p_a, dims)?;
    let vanishing = match discord_vanishing_test(rho, p_a, dims) {
        Ok(r) => Some(r),
        Err(Error::MarginalNotInvertible(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(DiscordReport {
        total_mi,
        measured_mi,
        discord,
        vanishing,
    })
}

/// The four equivalent conditions for zero discord, with prior `ρ_A ⊗ ρ_B`.
pub fn discord_vanishing_test(rho: &DensityMatrix, p_a: &crate::quantum::Povm, dims: (usize, usize)) -> Result<MacroReport> {
    let (_, _, discord) = discord_values(rho, p_a, dims)?;
    let tol = Tolerance::default();
    let (rho_a, rho_b) = marginals(rho, dims)?;
    if !rho_a.is_invertible(&tol) {
        return Err(Error::MarginalNotInvertible(rho_a.min_eigenvalue()));
    }
    let l = LocalFrame::with_marginal(compute_mppp_with(p_a, &rho_a, &tol)?, rho_b)?;
    let zero = discord.value <= DISCORD_TOL;
    let cg = residual_test(&l.local_cg, rho.matrix());
    let rd = residual_test(&l.local_rdm, rho.matrix());
    let (dec, weights) = block_decomposition(rho, &l.frame_a, l.dim_b)?;
    MacroReport::consensus(discord, zero, cg, rd, dec, weights)
}

/// Closed-form upper bound on the relative entropy of local microscopicity, with the
/// best value a direct search found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMicroscopicity {
    /// `D(ρ‖(Δ ⊗ id)ρ)`.
    pub bound: EntropyValue,
    /// Present when `dA·dB` is small enough for the search.
    pub best_found: Option<MinimizerReport>,
}

pub fn rel_ent_local_micro_upper(rho: &DensityMatrix, l: &LocalFrame) -> Result<LocalMicroscopicity> {
    rel_ent_local_micro_upper_with(rho, l, MinimizerOptions::default())
}

pub fn rel_ent_local_micro_upper_with(rho: &DensityMatrix, l: &LocalFrame, opts: MinimizerOptions) -> Result<LocalMicroscopicity> {
    l.check_state(rho)?;
    let projected = DensityMatrix::from_channel_output(&l.local_rdm.apply(rho.matrix())?)?;
    let bound = relative_entropy_with(rho, &projected, l.frame_a.tolerance())?;
    let best_found = if rho.dim() <= MINIMIZER_DIM_LIMIT {
        Some(minimize_local(rho, l, opts)?)
    } else {
        None
    };
    Ok(LocalMicroscopicity { bound, best_found })
}

struct LocalPoint {
    p: Vec<f64>,
    log_tau: Vec<ComplexMatrix>,
}

impl LocalPoint {
    fn taus(&self) -> Vec<ComplexMatrix> {
        self.log_tau
            .iter()
            .map(|h| {
                let e = hermitian_eig_unchecked(h);
                let top = e.max_eigenvalue();
                let m = e.map(|x| (x - top).exp());
                let z = m.trace().re;
                m / C64::new(z, 0.0)
            })
            .collect()
    }

    fn sigma(&self, frame_a: &InferentialFrame, taus: &[ComplexMatrix]) -> ComplexMatrix {
        let mut s = ComplexMatrix::zeros(0, 0);
        for ((p, sigma), tau) in self.p.iter().zip(frame_a.extreme_points()).zip(taus) {
            let term = tensor(sigma.matrix(), tau) * C64::new(*p, 0.0);
            if s.nrows() == 0 {
                s = term;
            } else {
                s += term;
            }
        }
        s
    }
}

fn log_of(m: &ComplexMatrix) -> ComplexMatrix {
    hermitian_eig_unchecked(m).map(|x| x.max(f64::MIN_POSITIVE).ln())
}

/// Alternating exponentiated-gradient descent over `Σ_y p_y σ_y ⊗ τ_y`, starting from
/// a regularized copy of `(Δ ⊗ id)ρ`.
fn minimize_local(rho: &DensityMatrix, l: &LocalFrame, opts: MinimizerOptions) -> Result<MinimizerReport> {
    let frame_a = &l.frame_a;
    let dims = l.dims();
    let n = frame_a.num_macrostates();
    let tol = frame_a.tolerance();
    let id_b = identity(dims.1);
    let flat_b = &id_b / C64::new(dims.1 as f64, 0.0);

    let mut p = Vec::with_capacity(n);
    let mut log_tau = Vec::with_capacity(n);
    for pi in frame_a.mppp().elements() {
        let lift = tensor(pi, &id_b);
        let block = partial_trace(&(&lift * rho.matrix() * &lift), dims, Subsystem::B)?;
        let q = block.trace().re.max(0.0);
        p.push((1.0 - REGULARIZATION) * q + REGULARIZATION / n as f64);
        let tau = if q > 0.0 { block / C64::new(q, 0.0) } else { flat_b.clone() };
        log_tau.push(log_of(&(tau * C64::new(1.0 - REGULARIZATION, 0.0) + &flat_b * C64::new(REGULARIZATION, 0.0))));
    }
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);

    let objective = |pt: &LocalPoint| -> Result<(f64, ComplexMatrix, Vec<ComplexMatrix>)> {
        let taus = pt.taus();
        let s = pt.sigma(frame_a, &taus);
        let v = relative_entropy_with(rho, &DensityMatrix::from_channel_output(&s)?, tol)?.as_f64();
        Ok((v, s, taus))
    };

    let mut point = LocalPoint { p, log_tau };
    let (mut value, mut sigma, mut taus) = objective(&point)?;
    let mut step = opts.step;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let eig = hermitian_eig_unchecked(&sigma);
        if eig.min_eigenvalue() <= 0.0 {
            break;
        }
        let dlog = log2_derivative(&eig, rho.matrix());
        let mut grad_p = Vec::with_capacity(n);
        let mut grad_tau = Vec::with_capacity(n);
        for ((s_y, tau), &p_y) in frame_a.extreme_points().iter().zip(&taus).zip(&point.p) {
            grad_p.push(-trace_product_re(&dlog, &tensor(s_y.matrix(), tau)));
            let g = partial_trace(&(tensor(s_y.matrix(), &id_b) * &dlog), dims, Subsystem::B)?;
            grad_tau.push((&g + g.adjoint()) * C64::new(-0.5 * p_y, 0.0));
        }
        let shift = grad_p.iter().fold(f64::INFINITY, |a, &g| a.min(g));
        let mut next_p: Vec<f64> = point
            .p
            .iter()
            .zip(&grad_p)
            .map(|(&x, &g)| x * (-step * (g - shift)).exp())
            .collect();
        let z: f64 = next_p.iter().sum();
        next_p.iter_mut().for_each(|x| *x /= z);
        let next = LocalPoint {
            p: next_p,
            log_tau: point
                .log_tau
                .iter()
                .zip(&grad_tau)
                .map(|(h, g)| h - g * C64::new(step, 0.0))
                .collect(),
        };
        let (v, s, t) = objective(&next)?;
        if v <= value {
            let gain = value - v;
            point = next;
            value = v;
            sigma = s;
            taus = t;
            if gain <= opts.tolerance * (1.0 + value.abs()) {
                converged = true;
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-12 {
                converged = true;
                break;
            }
        }
    }
    Ok(MinimizerReport {
        value,
        iterations,
        converged,
        weights: point.p,
    })
}

/// Classifies a channel on `A ⊗ B` against `C ⊗ id` and `Δ ⊗ id`.
///
/// Local non-generation is decided on `σ_y ⊗ |i⟩⟨j|` for every matrix unit of `B`; by
/// linearity these cover every locally macroscopic input.
pub fn classify_local_channel(e: &Channel, l: &LocalFrame) -> Result<ChannelClassification> {
    let d = l.dim_a() * l.dim_b;
    if e.dim_in() != d || e.dim_out() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if e.dim_in() != d { e.dim_in() } else { e.dim_out() },
        });
    }
    let comm = |m: &Channel| (e.superop() * m.superop() - m.superop() * e.superop()).norm();
    let cco_residual = comm(&l.local_cg);
    let rco_residual = comm(&l.local_rdm);
    let mut mno_residual = 0.0f64;
    for sigma in l.frame_a.extreme_points() {
        for i in 0..l.dim_b {
            for j in 0..l.dim_b {
                let out = e.apply_unchecked(&tensor(sigma.matrix(), &matrix_unit(l.dim_b, i, j)));
                mno_residual = mno_residual.max((l.local_rdm.apply_unchecked(&out) - &out).norm());
            }
        }
    }
    let c = ChannelClassification {
        is_cco: cco_residual <= COVARIANCE_TOL,
        is_rco: rco_residual <= COVARIANCE_TOL,
        is_mno: mno_residual <= FREE_STATE_TOL,
        cco_residual,
        rco_residual,
        mno_residual,
    };
    if (c.is_cco && !c.is_rco) || (c.is_rco && !c.is_mno) {
        return Err(Error::TheoremViolation(format!(
            "local class hierarchy broken: cco {} ({:.3e}), rco {} ({:.3e}), mno {} ({:.3e})",
            c.is_cco, cco_residual, c.is_rco, rco_residual, c.is_mno, mno_residual
        )));
    }
    Ok(c)
}

/// `Σ_y p_y σ_y ⊗ τ_y`, a locally macroscopic state.
pub fn locally_macro_state(frame_a: &InferentialFrame, p: &[f64], taus: &[DensityMatrix]) -> Result<DensityMatrix> {
    let n = frame_a.num_macrostates();
    if p.len() != n || taus.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if p.len() != n { p.len() } else { taus.len() },
        });
    }
    let db = taus[0].dim();
    let mut m = ComplexMatrix::zeros(frame_a.dim() * db, frame_a.dim() * db);
    for ((w, sigma), tau) in p.iter().zip(frame_a.extreme_points()).zip(taus) {
        if tau.dim() != db {
            return Err(Error::DimensionMismatch {
                expected: db,
                got: tau.dim(),
            });
        }
        m += tensor(sigma.matrix(), tau.matrix()) * C64::new(*w, 0.0);
    }
    DensityMatrix::new(m)
}
