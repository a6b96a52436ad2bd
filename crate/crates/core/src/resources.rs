//! Microscopicity as a resource: free states, the relative-entropy measure, the
//! CCO ⊆ RCO ⊆ MNO operation classes and the coherence, athermality and asymmetry
//! special cases.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{relative_entropy_with, EntropyValue};
use crate::error::{Error, Result};
use crate::mppp::{compute_mppp_with, InferentialFrame};
use crate::numerics::{
    diag, hermitian_eig, identity, log2_derivative, trace_product_re, unitarity_defect, ComplexMatrix,
    ComplexVector, Tolerance, C64,
};
use crate::par::{self, Execution};
use crate::quantum::{Channel, DensityMatrix, LinearMap, Povm};
use crate::random::{random_hermitian, random_probability, seeded};

/// Residual bound for membership in the free set.
pub const FREE_STATE_TOL: f64 = 1e-6;
/// Bound on the superoperator commutators deciding CCO and RCO.
pub const COVARIANCE_TOL: f64 = 1e-7;
/// Closure and unitarity bound for group representations.
pub const REPRESENTATION_TOL: f64 = 1e-8;
const ORTHOGONALITY_TOL: f64 = 1e-9;
const EXTREME_FIX_TOL: f64 = 1e-8;
const DEFAULT_ASYMMETRY_SEED: u64 = 0x5eed;
const CLUSTER_GAP: f64 = 1e-6;

/// The macroscopic states of a frame: the simplex spanned by `Π_y γ Π_y / tr[Π_y γ]`.
#[derive(Debug, Clone)]
pub struct FreeStateSet {
    frame: InferentialFrame,
}

impl FreeStateSet {
    pub fn new(frame: InferentialFrame) -> Result<Self> {
        let pts = frame.extreme_points();
        for (i, a) in pts.iter().enumerate() {
            let fix = (frame.rdm().apply_unchecked(a.matrix()) - a.matrix()).norm();
            if fix > EXTREME_FIX_TOL {
                return Err(Error::FrameInvariant(format!("extreme point {i} moved by {fix:.3e}")));
            }
            for (j, b) in pts.iter().enumerate().skip(i + 1) {
                let overlap = trace_product_re(a.matrix(), b.matrix());
                if overlap.abs() > ORTHOGONALITY_TOL {
                    return Err(Error::FrameInvariant(format!(
                        "extreme points {i} and {j} overlap by {overlap:.3e}"
                    )));
                }
            }
        }
        Ok(FreeStateSet { frame })
    }

    pub fn frame(&self) -> &InferentialFrame {
        &self.frame
    }

    pub fn extreme_points(&self) -> &[DensityMatrix] {
        self.frame.extreme_points()
    }

    pub fn contains(&self, rho: &DensityMatrix) -> Result<bool> {
        is_free_state(rho, self)
    }

    /// `Σ_y p_y σ_y` for the given weights.
    pub fn combination(&self, weights: &[f64]) -> Result<DensityMatrix> {
        let pts = self.extreme_points();
        if weights.len() != pts.len() {
            return Err(Error::DimensionMismatch {
                expected: pts.len(),
                got: weights.len(),
            });
        }
        let terms: Vec<(f64, &DensityMatrix)> = weights.iter().copied().zip(pts.iter()).collect();
        DensityMatrix::mixture(&terms)
    }

    /// A free state with Dirichlet-distributed weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DensityMatrix {
        let w = random_probability(self.extreme_points().len(), rng);
        self.combination(&w).expect("weights match the extreme points")
    }
}

/// `‖Δ(ρ) − ρ‖_F`.
pub fn free_state_residual(rho: &DensityMatrix, frame: &InferentialFrame) -> Result<f64> {
    if rho.dim() != frame.dim() {
        return Err(Error::DimensionMismatch {
            expected: frame.dim(),
            got: rho.dim(),
        });
    }
    Ok((frame.rdm().apply_unchecked(rho.matrix()) - rho.matrix()).norm())
}

pub fn is_free_state(rho: &DensityMatrix, set: &FreeStateSet) -> Result<bool> {
    Ok(free_state_residual(rho, set.frame())? <= FREE_STATE_TOL)
}

/// Relative entropy of microscopicity `D(ρ‖Δ(ρ))`.
pub fn rel_ent_microscopicity(rho: &DensityMatrix, frame: &InferentialFrame) -> Result<EntropyValue> {
    if rho.dim() != frame.dim() {
        return Err(Error::DimensionMismatch {
            expected: frame.dim(),
            got: rho.dim(),
        });
    }
    let projected = DensityMatrix::from_channel_output(&frame.rdm().apply_unchecked(rho.matrix()))?;
    relative_entropy_with(rho, &projected, frame.tolerance())
}

/// Result of an iterative divergence minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerReport {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final weights on the free extreme points.
    pub weights: Vec<f64>,
}

/// Settings shared by the exponentiated-gradient minimizers.
#[derive(Debug, Clone, Copy)]
pub struct MinimizerOptions {
    pub step: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        MinimizerOptions {
            step: 0.1,
            max_iterations: 10_000,
            tolerance: 1e-13,
        }
    }
}

/// `inf_σ D(ρ‖σ)` over the free simplex by exponentiated gradient on the weights.
///
/// Uses the generic Fréchet derivative of the logarithm, so it is independent of the
/// closed form `D(ρ‖Δ(ρ))`. Requires `ρ` to be supported inside the free states' span,
/// which holds for an invertible prior.
pub fn min_free_divergence(
    rho: &DensityMatrix,
    frame: &InferentialFrame,
    opts: MinimizerOptions,
) -> Result<MinimizerReport> {
    let set = FreeStateSet::new(frame.clone())?;
    let n = set.extreme_points().len();
    let tol = frame.tolerance();
    let mut p = vec![1.0 / n as f64; n];
    let mut value = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let sigma = set.combination(&p)?;
        let current = relative_entropy_with(rho, &sigma, tol)?.as_f64();
        let eig = sigma.eig();
        let dlog = log2_derivative(&eig, rho.matrix());
        let grad: Vec<f64> = set
            .extreme_points()
            .iter()
            .map(|s| -trace_product_re(&dlog, s.matrix()))
            .collect();
        let shift = grad.iter().fold(f64::INFINITY, |a, &g| a.min(g));
        let mut next: Vec<f64> = p
            .iter()
            .zip(&grad)
            .map(|(&pi, &g)| pi * (-opts.step * (g - shift)).exp())
            .collect();
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= z);
        let moved: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        value = current;
        if moved < opts.tolerance {
            converged = true;
            break;
        }
    }
    let final_value = relative_entropy_with(rho, &set.combination(&p)?, tol)?.as_f64();
    Ok(MinimizerReport {
        value: final_value.min(value),
        iterations,
        converged,
        weights: p,
    })
}

/// Membership of a channel in the three free-operation classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelClassification {
    pub is_cco: bool,
    pub is_rco: bool,
    pub is_mno: bool,
    /// `‖[E, C]‖_F` on superoperators.
    pub cco_residual: f64,
    /// `‖[E, Δ]‖_F` on superoperators.
    pub rco_residual: f64,
    /// Largest `‖Δ(E(σ_y)) − E(σ_y)‖_F` over the extreme points.
    pub mno_residual: f64,
}

fn superop_commutator(a: &LinearMap, b: &LinearMap) -> f64 {
    (a.superop() * b.superop() - b.superop() * a.superop()).norm()
}

pub fn classify_channel(e: &Channel, frame: &InferentialFrame) -> Result<ChannelClassification> {
    let d = frame.dim();
    if e.dim_in() != d || e.dim_out() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if e.dim_in() != d { e.dim_in() } else { e.dim_out() },
        });
    }
    let cco_residual = superop_commutator(e, frame.cg().channel());
    let rco_residual = superop_commutator(e, frame.rdm());
    let mut mno_residual = 0.0f64;
    for sigma in frame.extreme_points() {
        let out = e.apply_unchecked(sigma.matrix());
        mno_residual = mno_residual.max((frame.rdm().apply_unchecked(&out) - &out).norm());
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
            "class hierarchy broken: cco {} ({:.3e}), rco {} ({:.3e}), mno {} ({:.3e})",
            c.is_cco, cco_residual, c.is_rco, rco_residual, c.is_mno, mno_residual
        )));
    }
    Ok(c)
}

/// Classifies many channels against one frame.
pub fn classify_batch(channels: &[Channel], frame: &InferentialFrame, mode: Execution) -> Result<Vec<ChannelClassification>> {
    par::map(channels, mode, |e| classify_channel(e, frame)).into_iter().collect()
}

/// `X ↦ tr[X φφ†] σ_{y1} + tr[X (1 − φφ†)] σ_{y2}` with `σ_y` the normalized blocks.
///
/// Maps every state to a free one, yet fails to commute with `Δ` whenever `φ` overlaps
/// both blocks. Without `φ`, an equal superposition of one vector from each block is used.
pub fn mno_counterexample(
    frame: &InferentialFrame,
    phi: Option<&ComplexVector>,
    y1: usize,
    y2: usize,
) -> Result<Channel> {
    let ny = frame.num_macrostates();
    if ny < 2 {
        return Err(Error::MpppNotTrivial(ny));
    }
    if y1 >= ny || y2 >= ny || y1 == y2 {
        return Err(Error::PreconditionViolated(format!(
            "need two distinct macrostates below {ny}, got {y1} and {y2}"
        )));
    }
    let pi = frame.mppp().elements();
    let phi = match phi {
        Some(v) => {
            if v.len() != frame.dim() {
                return Err(Error::DimensionMismatch {
                    expected: frame.dim(),
                    got: v.len(),
                });
            }
            v / C64::new(v.norm(), 0.0)
        }
        None => {
            let v1 = range_vector(&pi[y1]);
            let v2 = range_vector(&pi[y2]);
            (v1 + v2) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
        }
    };
    for &y in &[y1, y2] {
        let overlap = (&pi[y] * &phi).norm();
        if overlap <= frame.tolerance().abs_eps {
            return Err(Error::PreconditionViolated(format!("φ has no component in block {y}")));
        }
    }
    let proj = &phi * phi.adjoint();
    let rest = identity(frame.dim()) - &proj;
    let states = [&frame.extreme_points()[y1], &frame.extreme_points()[y2]];
    let map = LinearMap::from_action(frame.dim(), frame.dim(), |x| {
        states[0].matrix() * (proj.clone() * x).trace() + states[1].matrix() * (rest.clone() * x).trace()
    });
    Channel::new(map)
}

fn range_vector(p: &ComplexMatrix) -> ComplexVector {
    let col = (0..p.ncols())
        .max_by(|&a, &b| p.column(a).norm().total_cmp(&p.column(b).norm()))
        .unwrap_or(0);
    let v = p.column(col).into_owned();
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// The qubit POVM `{diag(q, 1−q), diag(1−q, q)}`.
pub fn smeared_qubit_povm(q: f64) -> Result<Povm> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::PreconditionViolated(format!("weight {q} outside [0, 1]")));
    }
    Povm::new(vec![diag(&[q, 1.0 - q]), diag(&[1.0 - q, q])])
}

/// `X ↦ Σ_y Π_y X Π_y`.
pub fn pinching_channel(pi: &Povm) -> Result<Channel> {
    Channel::from_kraus(pi.dim(), pi.dim(), pi.elements())
}

/// Basis measurement with uniform prior: the free states are the diagonal ones.
pub fn scenario_coherence(d: usize) -> Result<InferentialFrame> {
    if d < 2 {
        return Err(Error::PreconditionViolated(format!("dimension {d} below 2")));
    }
    let frame = compute_mppp_with(&Povm::basis(d), &DensityMatrix::maximally_mixed(d), &Tolerance::default())?;
    if frame.num_macrostates() != d {
        return Err(Error::FrameInvariant(format!(
            "basis frame has {} macrostates, expected {d}",
            frame.num_macrostates()
        )));
    }
    let gap = frame.rdm().distance(pinching_channel(&Povm::basis(d))?.map());
    if gap > EXTREME_FIX_TOL {
        return Err(Error::FrameInvariant(format!("destroying map differs from dephasing by {gap:.3e}")));
    }
    Ok(frame)
}

/// `exp(−βH) / Z`.
pub fn gibbs_state(hamiltonian: &ComplexMatrix, beta: f64) -> Result<DensityMatrix> {
    if !beta.is_finite() {
        return Err(Error::NonFinite);
    }
    let eig = hermitian_eig(hamiltonian, &Tolerance::default())?;
    let ground = eig.min_eigenvalue();
    let top = eig.max_eigenvalue();
    let offset = if beta >= 0.0 { ground } else { top };
    DensityMatrix::from_unnormalized(eig.map(|e| (-beta * (e - offset)).exp()))
}

/// Frame with a Gibbs prior and a POVM whose MPPP is trivial, leaving `γ` as the only
/// free state. At `β = 0` this is the nonuniformity setting.
pub fn scenario_athermality(hamiltonian: &ComplexMatrix, beta: f64, p: &Povm) -> Result<InferentialFrame> {
    let gamma = gibbs_state(hamiltonian, beta)?;
    if gamma.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: gamma.dim(),
            got: p.dim(),
        });
    }
    let frame = compute_mppp_with(p, &gamma, &Tolerance::default())?;
    if !frame.is_trivial() {
        return Err(Error::MpppNotTrivial(frame.num_macrostates()));
    }
    Ok(frame)
}

/// `X ↦ |G|⁻¹ Σ_g U_g X U_g†`.
pub fn twirl_channel(rep: &[ComplexMatrix]) -> Result<Channel> {
    let d = check_representation(rep)?;
    let w = C64::new((1.0 / rep.len() as f64).sqrt(), 0.0);
    let kraus: Vec<ComplexMatrix> = rep.iter().map(|u| u * w).collect();
    Channel::from_kraus(d, d, &kraus)
}

/// `|G|⁻¹ Σ_g U_g† ∘ E ∘ U_g`, which commutes with every `U_g` conjugation.
pub fn covariant_twirl(rep: &[ComplexMatrix], e: &Channel) -> Result<Channel> {
    let d = check_representation(rep)?;
    if e.dim_in() != d || e.dim_out() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: e.dim_in(),
        });
    }
    let n = C64::new(rep.len() as f64, 0.0);
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for u in rep {
        let pre = LinearMap::conjugation(u);
        let post = LinearMap::conjugation(&u.adjoint());
        s += post.after(&e.after(&pre)?)?.superop();
    }
    Channel::from_superop(d, d, s / n)
}

fn check_representation(rep: &[ComplexMatrix]) -> Result<usize> {
    let first = rep
        .first()
        .ok_or_else(|| Error::NotARepresentation("empty group".into()))?;
    let d = first.nrows();
    for (i, u) in rep.iter().enumerate() {
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::NotARepresentation(format!("element {i} is not {d}x{d}")));
        }
        let defect = unitarity_defect(u);
        if defect > REPRESENTATION_TOL {
            return Err(Error::NotARepresentation(format!("element {i} off unitary by {defect:.3e}")));
        }
    }
    let find = |m: &ComplexMatrix| rep.iter().position(|u| (u - m).norm() <= REPRESENTATION_TOL);
    if find(&identity(d)).is_none() {
        return Err(Error::NotARepresentation("identity missing".into()));
    }
    for (i, a) in rep.iter().enumerate() {
        for (j, b) in rep.iter().enumerate() {
            if find(&(a * b)).is_none() {
                return Err(Error::NotARepresentation(format!("product of elements {i} and {j} not in the set")));
            }
        }
    }
    Ok(d)
}

/// Uniform-prior frame measuring the isotypic projectors of a multiplicity-free finite
/// group representation; its destroying map is the group twirl.
pub fn scenario_asymmetry(rep: &[ComplexMatrix]) -> Result<InferentialFrame> {
    scenario_asymmetry_seeded(rep, DEFAULT_ASYMMETRY_SEED)
}

/// As [`scenario_asymmetry`], with the seed of the probe used to split the commutant.
pub fn scenario_asymmetry_seeded(rep: &[ComplexMatrix], seed: u64) -> Result<InferentialFrame> {
    let twirl = twirl_channel(rep)?;
    let d = twirl.dim_in();
    let commutant = crate::quantum::superop_trace(&twirl).re.round() as usize;

    let mut rng = seeded(seed);
    let probe = twirl.apply_unchecked(&random_hermitian(d, &mut rng));
    let eig = hermitian_eig(&probe, &Tolerance::default())?;
    let spread = (eig.max_eigenvalue() - eig.min_eigenvalue()).max(1.0);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if l - eig.eigenvalues[*c.last().unwrap()] <= CLUSTER_GAP * spread => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    if clusters.len() != commutant {
        return Err(Error::NontrivialMultiplicity {
            commutant,
            irreps: clusters.len(),
        });
    }
    let projectors: Vec<ComplexMatrix> = clusters
        .iter()
        .map(|c| {
            let mut p = ComplexMatrix::zeros(d, d);
            for &k in c {
                let v = eig.eigenvectors.column(k);
                p += &v * v.adjoint();
            }
            p
        })
        .collect();
    let pi = Povm::new(projectors)?;
    let frame = compute_mppp_with(&pi, &DensityMatrix::maximally_mixed(d), &Tolerance::default())?;
    let gap = frame.rdm().distance(&twirl);
    if gap > REPRESENTATION_TOL {
        return Err(Error::FrameInvariant(format!("destroying map differs from the twirl by {gap:.3e}")));
    }
    Ok(frame)
}
