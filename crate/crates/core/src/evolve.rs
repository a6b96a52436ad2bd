//! Entropy bookkeeping along a unitary trajectory `ρ_t = e^{−iHt} ρ_0 e^{iHt}`.

use serde::{Deserialize, Serialize};

use crate::entropy::{observational_deficit_with, observational_entropy, uniform_macro_state, von_neumann_entropy};
use crate::error::{Error, Result};
use crate::mppp::InferentialFrame;
use crate::numerics::{hermitian_eig, ComplexMatrix, Tolerance, C64};
use crate::par::{self, Execution};
use crate::quantum::{DensityMatrix, Povm};

/// Allowed drift of the von Neumann entropy and slack on `S_P ≥ S`.
pub const ENTROPY_TOL: f64 = 1e-8;

/// Starting point of a trajectory.
#[derive(Debug, Clone)]
pub enum InitialState {
    /// Weights on the macrostates, spread uniformly inside each block.
    Macroscopic(Vec<f64>),
    State(DensityMatrix),
}

/// One grid point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRow {
    pub t: f64,
    /// `S(ρ_t)`.
    pub entropy: f64,
    /// `S_P(ρ_t)`.
    pub observational_entropy: f64,
    /// `δ_P(ρ_t‖u)`.
    pub deficit: f64,
}

/// `Σ_y p_y Π_y / tr[Π_y]`.
pub fn macro_state(pi: &Povm, p: &[f64]) -> Result<DensityMatrix> {
    if p.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            got: p.len(),
        });
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidState("macrostate weights must be nonnegative".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("macrostate weights sum to {total}")));
    }
    let d = pi.dim();
    let mut m = ComplexMatrix::zeros(d, d);
    for (proj, &w) in pi.elements().iter().zip(p) {
        m += proj * C64::new(w / proj.trace().re, 0.0);
    }
    DensityMatrix::new(m)
}

/// `steps` equally spaced times from `0` to `t_max`, both ends included.
pub fn time_grid(t_max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![0.0],
        n => (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect(),
    }
}

pub fn evolve(
    frame: &InferentialFrame,
    hamiltonian: &ComplexMatrix,
    t_max: f64,
    steps: usize,
    initial: &InitialState,
) -> Result<Vec<EvolutionRow>> {
    evolve_with(frame, hamiltonian, t_max, steps, initial, Execution::default())
}

pub fn evolve_with(
    frame: &InferentialFrame,
    hamiltonian: &ComplexMatrix,
    t_max: f64,
    steps: usize,
    initial: &InitialState,
    mode: Execution,
) -> Result<Vec<EvolutionRow>> {
    let d = frame.dim();
    if hamiltonian.nrows() != d || hamiltonian.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: hamiltonian.nrows(),
        });
    }
    if !t_max.is_finite() {
        return Err(Error::NonFinite);
    }
    let tol = Tolerance::default();
    let eig = hermitian_eig(hamiltonian, &tol)?;
    let rho0 = match initial {
        InitialState::Macroscopic(p) => macro_state(frame.mppp(), p)?,
        InitialState::State(s) => {
            if s.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: s.dim() });
            }
            s.clone()
        }
    };
    let uniform = DensityMatrix::maximally_mixed(d);
    let povm = frame.povm();
    let grid = time_grid(t_max, steps);
    let rows: Result<Vec<EvolutionRow>> = par::map(&grid, mode, |&t| {
        let u = eig.map_complex(|e| C64::from_polar(1.0, -e * t));
        let rho = DensityMatrix::from_channel_output(&(&u * rho0.matrix() * u.adjoint()))?;
        Ok(EvolutionRow {
            t,
            entropy: von_neumann_entropy(&rho).value,
            observational_entropy: observational_entropy(&rho, povm)?.value,
            deficit: observational_deficit_with(&rho, &uniform, povm, &tol)?.value,
        })
    })
    .into_iter()
    .collect();
    let rows = rows?;
    if let Some(first) = rows.first() {
        for r in &rows {
            if r.observational_entropy < r.entropy - ENTROPY_TOL {
                return Err(Error::TheoremViolation(format!(
                    "observational entropy {:.12} below von Neumann entropy {:.12} at t = {}",
                    r.observational_entropy, r.entropy, r.t
                )));
            }
            if (r.entropy - first.entropy).abs() > ENTROPY_TOL {
                return Err(Error::TheoremViolation(format!(
                    "von Neumann entropy drifted by {:.3e} at t = {}",
                    r.entropy - first.entropy,
                    r.t
                )));
            }
        }
    }
    Ok(rows)
}

/// The `(S, S_P)` chain for a state and a projective measurement: the entropy of the
/// uniform macro-state, the observational entropy of `ρ`, and that of the macro-state.
pub fn macro_entropy_chain(rho: &DensityMatrix, pi: &Povm) -> Result<(f64, f64, f64)> {
    let macro_rho = uniform_macro_state(rho, pi)?;
    Ok((
        von_neumann_entropy(&macro_rho).value,
        observational_entropy(rho, pi)?.value,
        observational_entropy(&macro_rho, pi)?.value,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::binary_entropy;
    use crate::mppp::compute_mppp;
    use crate::numerics::{diag, zeros};
    use crate::random::{random_density_matrix, random_hermitian, random_probability, seeded};
    use crate::resources::scenario_coherence;

    fn sigma_x() -> ComplexMatrix {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        ComplexMatrix::from_row_slice(2, 2, &[zero, one, one, zero])
    }

    #[test]
    fn grid_includes_both_ends() {
        assert_eq!(time_grid(1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(time_grid(1.0, 1), vec![0.0]);
        assert!(time_grid(1.0, 0).is_empty());
    }

    #[test]
    fn rabi_oscillation_matches_binary_entropy() {
        let frame = scenario_coherence(2).unwrap();
        let rows = evolve(&frame, &sigma_x(), std::f64::consts::PI, 100, &InitialState::Macroscopic(vec![1.0, 0.0])).unwrap();
        assert_eq!(rows.len(), 100);
        for r in &rows {
            let c = r.t.cos();
            assert!((r.observational_entropy - binary_entropy(c * c)).abs() < 1e-8, "t = {}", r.t);
            assert!(r.entropy.abs() < 1e-8);
        }
        let quarter = evolve(&frame, &sigma_x(), std::f64::consts::FRAC_PI_4, 2, &InitialState::Macroscopic(vec![1.0, 0.0])).unwrap();
        assert!((quarter[1].observational_entropy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_hamiltonian_freezes_everything() {
        let mut rng = seeded(31);
        let frame = scenario_coherence(3).unwrap();
        let rho = random_density_matrix(3, &mut rng);
        let rows = evolve(&frame, &zeros(3), 2.0, 7, &InitialState::State(rho)).unwrap();
        for r in &rows {
            assert!((r.observational_entropy - rows[0].observational_entropy).abs() < 1e-12);
            assert!((r.deficit - rows[0].deficit).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_grows_somewhere_from_a_macrostate() {
        let mut rng = seeded(32);
        for _ in 0..10 {
            let frame = compute_mppp(&Povm::basis(3), &DensityMatrix::maximally_mixed(3)).unwrap();
            let p = random_probability(3, &mut rng);
            let h = random_hermitian(3, &mut rng);
            let rows = evolve(&frame, &h, 5.0, 50, &InitialState::Macroscopic(p)).unwrap();
            let best = rows.iter().map(|r| r.observational_entropy).fold(f64::MIN, f64::max);
            assert!(best >= rows[0].observational_entropy);
            for r in &rows {
                assert!((r.observational_entropy - r.entropy - r.deficit).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut rng = seeded(33);
        let frame = scenario_coherence(3).unwrap();
        let h = random_hermitian(3, &mut rng);
        let init = InitialState::State(random_density_matrix(3, &mut rng));
        let a = evolve_with(&frame, &h, 3.0, 20, &init, Execution::Sequential).unwrap();
        let b = evolve_with(&frame, &h, 3.0, 20, &init, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let frame = scenario_coherence(2).unwrap();
        let mut h = sigma_x();
        h[(0, 1)] = C64::new(0.0, 1.0);
        assert!(matches!(
            evolve(&frame, &h, 1.0, 3, &InitialState::Macroscopic(vec![1.0, 0.0])),
            Err(Error::NotHermitian(_))
        ));
        assert!(evolve(&frame, &diag(&[1.0, 0.0, 0.0]), 1.0, 3, &InitialState::Macroscopic(vec![1.0, 0.0])).is_err());
        assert!(evolve(&frame, &sigma_x(), 1.0, 3, &InitialState::Macroscopic(vec![0.7, 0.7])).is_err());
    }

    #[test]
    fn macro_entropy_chain_is_flat() {
        let mut rng = seeded(34);
        for _ in 0..20 {
            let rho = random_density_matrix(4, &mut rng);
            let pi = Povm::new(vec![diag(&[1.0, 1.0, 0.0, 0.0]), diag(&[0.0, 0.0, 1.0, 0.0]), diag(&[0.0, 0.0, 0.0, 1.0])]).unwrap();
            let (a, b, c) = macro_entropy_chain(&rho, &pi).unwrap();
            assert!((a - b).abs() < 1e-9 && (b - c).abs() < 1e-9);
        }
    }
}
