//! Relative entropy, von Neumann entropy, observational entropy and deficit, mutual
//! information. All values in bits.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{identity, partial_trace, support_projector_of, ComplexMatrix, Subsystem, Tolerance, C64};
use crate::quantum::{DensityMatrix, Povm};

/// An entropic quantity in bits; `finite == false` encodes `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub value: f64,
    pub finite: bool,
}

impl EntropyValue {
    /// Negative zero is folded into `+0`.
    pub fn finite(value: f64) -> Self {
        EntropyValue {
            value: value + 0.0,
            finite: true,
        }
    }

    pub fn infinite() -> Self {
        EntropyValue {
            value: f64::INFINITY,
            finite: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.finite
    }

    /// The value as an `f64`, `+∞` when infinite.
    pub fn as_f64(&self) -> f64 {
        if self.finite {
            self.value
        } else {
            f64::INFINITY
        }
    }

    /// `self − other`; `∞ − finite = ∞`, while `∞ − ∞` is indeterminate.
    pub fn minus(&self, other: &EntropyValue) -> Result<EntropyValue> {
        match (self.finite, other.finite) {
            (true, true) => Ok(EntropyValue::finite(self.value - other.value)),
            (false, true) => Ok(EntropyValue::infinite()),
            (false, false) => Err(Error::IndeterminateDifference),
            (true, false) => Err(Error::PreconditionViolated(
                "subtracting an infinite divergence from a finite one".into(),
            )),
        }
    }
}

impl Serialize for EntropyValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            value: Option<f64>,
            finite: bool,
        }
        Repr {
            value: self.finite.then_some(self.value),
            finite: self.finite,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EntropyValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            value: Option<f64>,
            finite: bool,
        }
        let r = Repr::deserialize(d)?;
        match (r.finite, r.value) {
            (true, Some(v)) => Ok(EntropyValue::finite(v)),
            (false, _) => Ok(EntropyValue::infinite()),
            (true, None) => Err(serde::de::Error::custom("finite entropy without a value")),
        }
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    Ok(())
}

/// `−Σ p log2 p` over strictly positive entries.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

/// `h(p) = −p log2 p − (1−p) log2(1−p)`.
pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy(&[p, 1.0 - p])
}

/// Classical relative entropy `Σ p log2(p/q)`, infinite if `p` is not dominated by `q`.
pub fn classical_relative_entropy(p: &[f64], q: &[f64]) -> Result<EntropyValue> {
    check_dims(p.len(), q.len())?;
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return Ok(EntropyValue::infinite());
        }
        acc += a * (a / b).log2();
    }
    Ok(EntropyValue::finite(acc))
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> EntropyValue {
    von_neumann_entropy_with(rho, &Tolerance::default())
}

pub fn von_neumann_entropy_with(rho: &DensityMatrix, tol: &Tolerance) -> EntropyValue {
    let eig = rho.eig();
    let cutoff = tol.support_cutoff(eig.max_eigenvalue());
    let s = -eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > cutoff)
        .map(|&l| l * l.log2())
        .sum::<f64>();
    EntropyValue::finite(s)
}

/// Umegaki relative entropy `tr[ρ(log2 ρ − log2 σ)]`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<EntropyValue> {
    relative_entropy_with(rho, sigma, &Tolerance::default())
}

pub fn relative_entropy_with(rho: &DensityMatrix, sigma: &DensityMatrix, tol: &Tolerance) -> Result<EntropyValue> {
    check_dims(rho.dim(), sigma.dim())?;
    let d = rho.dim();
    let se = sigma.eig();
    let support = support_projector_of(&se, tol);
    let outside = identity(d) - support;
    let leak = (&outside * rho.matrix() * &outside).norm();
    if !tol.is_zero(leak, rho.matrix().norm()) {
        return Ok(EntropyValue::infinite());
    }
    let neg_s = -von_neumann_entropy_with(rho, tol).value;
    let cutoff = tol.support_cutoff(se.max_eigenvalue());
    let mut cross = 0.0;
    for (k, &mu) in se.eigenvalues.iter().enumerate() {
        if mu <= cutoff {
            continue;
        }
        let v = se.eigenvectors.column(k);
        let weight = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        cross += weight * mu.log2();
    }
    Ok(EntropyValue::finite(neg_s - cross))
}

fn check_invertible_prior(gamma: &DensityMatrix, tol: &Tolerance) -> Result<()> {
    if !gamma.is_invertible(tol) {
        return Err(Error::PriorNotInvertible(gamma.min_eigenvalue()));
    }
    Ok(())
}

/// `δ_P(ρ‖γ) = D(ρ‖γ) − D(M_P(ρ)‖M_P(γ))`.
pub fn observational_deficit(rho: &DensityMatrix, gamma: &DensityMatrix, p: &Povm) -> Result<EntropyValue> {
    observational_deficit_with(rho, gamma, p, &Tolerance::default())
}

pub fn observational_deficit_with(
    rho: &DensityMatrix,
    gamma: &DensityMatrix,
    p: &Povm,
    tol: &Tolerance,
) -> Result<EntropyValue> {
    check_dims(gamma.dim(), rho.dim())?;
    check_dims(p.dim(), rho.dim())?;
    check_invertible_prior(gamma, tol)?;
    let quantum = relative_entropy_with(rho, gamma, tol)?;
    let measured = classical_relative_entropy(&p.probabilities(rho)?, &p.probabilities(gamma)?)?;
    quantum.minus(&measured)
}

/// `S_P(ρ) = −Σ_x tr[P_x ρ] log2(tr[P_x ρ] / tr[P_x])`.
pub fn observational_entropy(rho: &DensityMatrix, p: &Povm) -> Result<EntropyValue> {
    let probs = p.probabilities(rho)?;
    let mut s = 0.0;
    for (px, q) in p.elements().iter().zip(probs) {
        if q > 0.0 {
            let volume = crate::numerics::trace(px).re;
            s -= q * (q / volume).log2();
        }
    }
    Ok(EntropyValue::finite(s))
}

/// `I(A;B) = S(ρ_A) + S(ρ_B) − S(ρ_AB)`, which equals `D(ρ_AB‖ρ_A ⊗ ρ_B)`.
pub fn mutual_information(rho: &DensityMatrix, dims: (usize, usize)) -> Result<EntropyValue> {
    check_dims(dims.0 * dims.1, rho.dim())?;
    let a = rho.partial_trace(dims, Subsystem::A)?;
    let b = rho.partial_trace(dims, Subsystem::B)?;
    let v = von_neumann_entropy(&a).value + von_neumann_entropy(&b).value - von_neumann_entropy(rho).value;
    Ok(EntropyValue::finite(v))
}

/// `ρ_{Π,u} = Σ_n tr[Π_n ρ] Π_n / tr[Π_n]`.
pub fn uniform_macro_state(rho: &DensityMatrix, pi: &Povm) -> Result<DensityMatrix> {
    let probs = pi.probabilities(rho)?;
    let d = rho.dim();
    let mut m = ComplexMatrix::zeros(d, d);
    for (p, q) in pi.elements().iter().zip(probs) {
        let volume = crate::numerics::trace(p).re;
        m += p * C64::new(q / volume, 0.0);
    }
    DensityMatrix::from_channel_output(&m)
}

/// Marginals of a bipartite state.
pub fn marginals(rho: &DensityMatrix, dims: (usize, usize)) -> Result<(DensityMatrix, DensityMatrix)> {
    check_dims(dims.0 * dims.1, rho.dim())?;
    let a = partial_trace(rho.matrix(), dims, Subsystem::A)?;
    let b = partial_trace(rho.matrix(), dims, Subsystem::B)?;
    Ok((
        DensityMatrix::from_channel_output(&a)?,
        DensityMatrix::from_channel_output(&b)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ket, tensor};
    use crate::random::{random_density_matrix, random_povm, random_pure_state, random_unitary, seeded};
    use proptest::prelude::*;

    fn plus() -> DensityMatrix {
        DensityMatrix::pure(&(ket(2, 0) + ket(2, 1))).unwrap()
    }

    fn x_basis() -> Povm {
        let h = ComplexMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
        ) * C64::new(0.5f64.sqrt(), 0.0);
        Povm::new((0..2).map(|i| crate::numerics::ketbra(&h.column(i).into_owned())).collect()).unwrap()
    }

    fn bell() -> DensityMatrix {
        DensityMatrix::pure(&(ket(4, 0) + ket(4, 3))).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        let mut rng = seeded(31);
        let r = random_density_matrix(3, &mut rng);
        assert!(relative_entropy(&r, &r).unwrap().value.abs() < 1e-12);
        let pure0 = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let u = DensityMatrix::maximally_mixed(2);
        let v = relative_entropy(&pure0, &u).unwrap();
        let oracle = classical_relative_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v.value - oracle.value).abs() < 1e-12 && (v.value - 1.0).abs() < 1e-12);
        assert!(!relative_entropy(&u, &pure0).unwrap().finite);
    }

    #[test]
    fn von_neumann_examples() {
        let mut rng = seeded(32);
        assert!(von_neumann_entropy(&random_pure_state(3, &mut rng)).value.abs() < 1e-9);
        assert!((von_neumann_entropy(&DensityMatrix::maximally_mixed(2)).value - 1.0).abs() < 1e-12);
        let v = von_neumann_entropy(&DensityMatrix::from_diagonal(&[0.75, 0.25]).unwrap()).value;
        assert!((v - binary_entropy(0.75)).abs() < 1e-12);
        assert!((v - 0.811_278_124_459_132_9).abs() < 1e-12);
    }

    #[test]
    fn deficit_examples() {
        let mut rng = seeded(33);
        let g = random_density_matrix(3, &mut rng);
        let p = random_povm(3, 3, &mut rng);
        assert!(observational_deficit(&g, &g, &p).unwrap().value.abs() < 1e-10);

        let u = DensityMatrix::maximally_mixed(3);
        let r = DensityMatrix::from_diagonal(&[0.2, 0.3, 0.5]).unwrap();
        assert!(observational_deficit(&r, &u, &Povm::basis(3)).unwrap().value.abs() < 1e-12);

        let d = observational_deficit(&plus(), &DensityMatrix::maximally_mixed(2), &Povm::basis(2)).unwrap();
        assert!((d.value - 1.0).abs() < 1e-12);

        let singular = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            observational_deficit(&plus(), &singular, &Povm::basis(2)),
            Err(Error::PriorNotInvertible(_))
        ));
    }

    #[test]
    fn infinite_arithmetic() {
        let inf = EntropyValue::infinite();
        assert!(!inf.minus(&EntropyValue::finite(1.0)).unwrap().finite);
        assert!(matches!(inf.minus(&inf), Err(Error::IndeterminateDifference)));
        let json = serde_json::to_string(&inf).unwrap();
        assert_eq!(json, r#"{"value":null,"finite":false}"#);
        let back: EntropyValue = serde_json::from_str(&json).unwrap();
        assert!(!back.finite);
    }

    #[test]
    fn observational_entropy_examples() {
        let r = DensityMatrix::from_diagonal(&[0.2, 0.8]).unwrap();
        let s = von_neumann_entropy(&r).value;
        assert!((observational_entropy(&r, &Povm::basis(2)).unwrap().value - s).abs() < 1e-12);
        assert!((observational_entropy(&r, &Povm::trivial(2)).unwrap().value - 1.0).abs() < 1e-12);
        let zero = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert!((observational_entropy(&zero, &x_basis()).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn observational_entropy_matches_deficit_form() {
        let mut rng = seeded(34);
        for d in 2..5 {
            let u = DensityMatrix::maximally_mixed(d);
            for _ in 0..10 {
                let r = random_density_matrix(d, &mut rng);
                let p = random_povm(d, 3, &mut rng);
                let direct = observational_entropy(&r, &p).unwrap().value;
                let via = von_neumann_entropy(&r).value + observational_deficit(&r, &u, &p).unwrap().value;
                assert!((direct - via).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn mutual_information_examples() {
        let mut rng = seeded(35);
        let prod = random_density_matrix(2, &mut rng).tensor(&random_density_matrix(3, &mut rng));
        assert!(mutual_information(&prod, (2, 3)).unwrap().value.abs() < 1e-10);
        assert!((mutual_information(&bell(), (2, 2)).unwrap().value - 2.0).abs() < 1e-10);
        let cc = DensityMatrix::from_diagonal(&[0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((mutual_information(&cc, (2, 2)).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_is_a_relative_entropy() {
        let mut rng = seeded(36);
        for _ in 0..20 {
            let r = random_density_matrix(6, &mut rng);
            let (a, b) = marginals(&r, (2, 3)).unwrap();
            let d = relative_entropy(&r, &a.tensor(&b)).unwrap().value;
            let i = mutual_information(&r, (2, 3)).unwrap().value;
            assert!((d - i).abs() <= 1e-8 && i >= -1e-9);
        }
    }

    #[test]
    fn macro_state_chain() {
        let mut rng = seeded(37);
        for d in 2..5 {
            for _ in 0..10 {
                let r = random_density_matrix(d, &mut rng);
                let u = random_unitary(d, &mut rng);
                let sizes = crate::random::random_composition(d, 2, &mut rng);
                let mut start = 0;
                let pi: Vec<ComplexMatrix> = sizes
                    .iter()
                    .map(|&s| {
                        let c = u.columns(start, s).into_owned();
                        start += s;
                        &c * c.adjoint()
                    })
                    .collect();
                let pi = Povm::new(pi).unwrap();
                let m = uniform_macro_state(&r, &pi).unwrap();
                let a = von_neumann_entropy(&m).value;
                let b = observational_entropy(&r, &pi).unwrap().value;
                let c = observational_entropy(&m, &pi).unwrap().value;
                assert!((a - b).abs() <= 1e-9 && (b - c).abs() <= 1e-9);
                let pr = pi.probabilities(&r).unwrap();
                let pm = pi.probabilities(&m).unwrap();
                for (x, y) in pr.iter().zip(pm) {
                    assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn data_processing_and_entropy_ordering(seed in any::<u64>(), d in 2usize..5, n in 1usize..5) {
            let mut rng = seeded(seed);
            let r = random_density_matrix(d, &mut rng);
            let g = random_density_matrix(d, &mut rng);
            let p = random_povm(d, n, &mut rng);
            prop_assert!(observational_deficit(&r, &g, &p).unwrap().value >= -1e-9);
            let s = von_neumann_entropy(&r).value;
            prop_assert!(observational_entropy(&r, &p).unwrap().value >= s - 1e-9);
            prop_assert!(s >= -1e-9 && s <= (d as f64).log2() + 1e-9);
        }

        #[test]
        fn joint_convexity(seed in any::<u64>(), d in 2usize..4, lambda in 0.0f64..1.0) {
            let mut rng = seeded(seed);
            let (r1, r2) = (random_density_matrix(d, &mut rng), random_density_matrix(d, &mut rng));
            let (s1, s2) = (random_density_matrix(d, &mut rng), random_density_matrix(d, &mut rng));
            let mix = |a: &DensityMatrix, b: &DensityMatrix| {
                DensityMatrix::mixture(&[(lambda, a), (1.0 - lambda, b)]).unwrap()
            };
            let lhs = relative_entropy(&mix(&r1, &r2), &mix(&s1, &s2)).unwrap().value;
            let rhs = lambda * relative_entropy(&r1, &s1).unwrap().value
                + (1.0 - lambda) * relative_entropy(&r2, &s2).unwrap().value;
            prop_assert!(lhs <= rhs + 1e-8);
        }

        #[test]
        fn relative_entropy_is_additive(seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let (a, b) = (random_density_matrix(2, &mut rng), random_density_matrix(2, &mut rng));
            let (c, e) = (random_density_matrix(3, &mut rng), random_density_matrix(3, &mut rng));
            let joint = relative_entropy(&a.tensor(&c), &b.tensor(&e)).unwrap().value;
            let sum = relative_entropy(&a, &b).unwrap().value + relative_entropy(&c, &e).unwrap().value;
            prop_assert!((joint - sum).abs() <= 1e-9);
            let t = tensor(a.matrix(), c.matrix());
            prop_assert!((crate::numerics::trace(&t).re - 1.0).abs() < 1e-12);
        }
    }
}
