use std::ops::Deref;

use crate::error::{Error, Result};
use crate::numerics::{
    hermitian_eig_unchecked, hermitian_part, identity, matrix_unit, partial_trace, tensor, trace,
    unvectorize, vectorize, ComplexMatrix, Subsystem, C64,
};

use super::{DensityMatrix, Povm};

/// Complete-positivity threshold on the smallest Choi eigenvalue.
pub const CP_TOL: f64 = 1e-8;
/// Trace-preservation threshold on `‖Tr_out J − 1‖_F`.
pub const TP_TOL: f64 = 1e-8;
/// Agreement between the Choi and superoperator routes on matrix units.
pub const REPRESENTATION_TOL: f64 = 1e-9;

/// A linear map on matrices stored as its superoperator, `vec(E(X)) = S vec(X)` with
/// column-stacking `vec`. `S` has `dim_out²` rows and `dim_in²` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    dim_in: usize,
    dim_out: usize,
    superop: ComplexMatrix,
}

impl LinearMap {
    pub fn from_superop(dim_in: usize, dim_out: usize, superop: ComplexMatrix) -> Result<Self> {
        if superop.nrows() != dim_out * dim_out {
            return Err(Error::DimensionMismatch {
                expected: dim_out * dim_out,
                got: superop.nrows(),
            });
        }
        if superop.ncols() != dim_in * dim_in {
            return Err(Error::DimensionMismatch {
                expected: dim_in * dim_in,
                got: superop.ncols(),
            });
        }
        Ok(LinearMap {
            dim_in,
            dim_out,
            superop,
        })
    }

    /// Builds the superoperator column by column from the action on matrix units.
    pub fn from_action(dim_in: usize, dim_out: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let mut s = ComplexMatrix::zeros(dim_out * dim_out, dim_in * dim_in);
        for j in 0..dim_in {
            for i in 0..dim_in {
                let out = f(&matrix_unit(dim_in, i, j));
                s.set_column(i + j * dim_in, &vectorize(&out));
            }
        }
        LinearMap {
            dim_in,
            dim_out,
            superop: s,
        }
    }

    /// `Σ_k K_k X K_k†`, each `K_k` of shape `dim_out × dim_in`.
    pub fn from_kraus(dim_in: usize, dim_out: usize, kraus: &[ComplexMatrix]) -> Result<Self> {
        let mut s = ComplexMatrix::zeros(dim_out * dim_out, dim_in * dim_in);
        for k in kraus {
            if k.nrows() != dim_out || k.ncols() != dim_in {
                return Err(Error::DimensionMismatch {
                    expected: dim_out * dim_in,
                    got: k.nrows() * k.ncols(),
                });
            }
            s += k.conjugate().kronecker(k);
        }
        Ok(LinearMap {
            dim_in,
            dim_out,
            superop: s,
        })
    }

    /// Inverse of [`LinearMap::choi`].
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: &ComplexMatrix) -> Result<Self> {
        let n = dim_in * dim_out;
        if choi.nrows() != n || choi.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: choi.nrows(),
            });
        }
        let mut s = ComplexMatrix::zeros(dim_out * dim_out, dim_in * dim_in);
        for i in 0..dim_in {
            for j in 0..dim_in {
                for a in 0..dim_out {
                    for b in 0..dim_out {
                        s[(a + b * dim_out, i + j * dim_in)] = choi[(i * dim_out + a, j * dim_out + b)];
                    }
                }
            }
        }
        Ok(LinearMap {
            dim_in,
            dim_out,
            superop: s,
        })
    }

    /// `X ↦ A X A†`.
    pub fn conjugation(a: &ComplexMatrix) -> Self {
        LinearMap {
            dim_in: a.ncols(),
            dim_out: a.nrows(),
            superop: a.conjugate().kronecker(a),
        }
    }

    pub fn identity(d: usize) -> Self {
        LinearMap {
            dim_in: d,
            dim_out: d,
            superop: identity(d * d),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn superop(&self) -> &ComplexMatrix {
        &self.superop
    }

    /// Choi matrix `J = Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|)`, input factor first.
    pub fn choi(&self) -> ComplexMatrix {
        let (di, dout) = (self.dim_in, self.dim_out);
        let mut j = ComplexMatrix::zeros(di * dout, di * dout);
        for i in 0..di {
            for k in 0..di {
                for a in 0..dout {
                    for b in 0..dout {
                        j[(i * dout + a, k * dout + b)] = self.superop[(a + b * dout, i + k * di)];
                    }
                }
            }
        }
        j
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.nrows() != self.dim_in || x.ncols() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                got: x.nrows(),
            });
        }
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &ComplexMatrix) -> ComplexMatrix {
        unvectorize(&(&self.superop * vectorize(x)), self.dim_out, self.dim_out)
    }

    /// `E(X) = Tr_in[(Xᵀ ⊗ 1) J]`, independent of the superoperator.
    pub fn apply_via_choi(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.nrows() != self.dim_in || x.ncols() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                got: x.nrows(),
            });
        }
        let j = self.choi();
        let lhs = tensor(&x.transpose(), &identity(self.dim_out));
        partial_trace(&(lhs * j), (self.dim_in, self.dim_out), Subsystem::B)
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &LinearMap) -> Result<LinearMap> {
        if first.dim_out != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                got: first.dim_out,
            });
        }
        Ok(LinearMap {
            dim_in: first.dim_in,
            dim_out: self.dim_out,
            superop: &self.superop * &first.superop,
        })
    }

    /// Hilbert-Schmidt adjoint: `tr[A E(B)] = tr[E*(A) B]`, superoperator `S†`.
    pub fn adjoint(&self) -> LinearMap {
        LinearMap {
            dim_in: self.dim_out,
            dim_out: self.dim_in,
            superop: self.superop.adjoint(),
        }
    }

    /// `E ⊗ id_B` on `A ⊗ B`, with the `A` index outer.
    pub fn tensor_identity(&self, dim_b: usize) -> LinearMap {
        let (da, db) = (self.dim_in, dim_b);
        let dout = self.dim_out;
        LinearMap::from_action(da * db, dout * db, |unit| {
            let (r, c) = find_unit(unit);
            let (a, b) = (r / db, r % db);
            let (a2, b2) = (c / db, c % db);
            let ea = self.apply_unchecked(&matrix_unit(da, a, a2));
            tensor(&ea, &matrix_unit(db, b, b2))
        })
    }

    /// Tensor product `E ⊗ F` on `A ⊗ B`.
    pub fn tensor(&self, other: &LinearMap) -> LinearMap {
        let (da, db) = (self.dim_in, other.dim_in);
        LinearMap::from_action(da * db, self.dim_out * other.dim_out, |unit| {
            let (r, c) = find_unit(unit);
            let ea = self.apply_unchecked(&matrix_unit(da, r / db, c / db));
            let fb = other.apply_unchecked(&matrix_unit(db, r % db, c % db));
            tensor(&ea, &fb)
        })
    }

    /// Frobenius distance between superoperators.
    pub fn distance(&self, other: &LinearMap) -> f64 {
        (&self.superop - &other.superop).norm()
    }

    /// `‖E(1) − 1‖_F`.
    pub fn unitality_defect(&self) -> f64 {
        (self.apply_unchecked(&identity(self.dim_in)) - identity(self.dim_out)).norm()
    }

    /// `‖Tr_out J − 1‖_F`.
    pub fn trace_preservation_defect(&self) -> f64 {
        match partial_trace(&self.choi(), (self.dim_in, self.dim_out), Subsystem::A) {
            Ok(t) => (t - identity(self.dim_in)).norm(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Smallest eigenvalue of the Hermitian part of the Choi matrix.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        hermitian_eig_unchecked(&hermitian_part(&self.choi())).min_eigenvalue()
    }

    /// Largest disagreement between the Choi and superoperator routes on matrix units.
    pub fn representation_defect(&self) -> f64 {
        let j = self.choi();
        let mut worst = 0.0f64;
        for i in 0..self.dim_in {
            for k in 0..self.dim_in {
                let via_s = self.apply_unchecked(&matrix_unit(self.dim_in, i, k));
                // Tr_in[(|k⟩⟨i| ⊗ 1) J] picks the (i, k) block of J.
                let via_j = j
                    .view((i * self.dim_out, k * self.dim_out), (self.dim_out, self.dim_out))
                    .into_owned();
                worst = worst.max((via_s - via_j).norm());
            }
        }
        worst
    }

    /// Kraus operators from the eigendecomposition of the Choi matrix.
    pub fn kraus(&self) -> Vec<ComplexMatrix> {
        let eig = hermitian_eig_unchecked(&hermitian_part(&self.choi()));
        let cutoff = 1e-12 * eig.max_eigenvalue().abs().max(1.0);
        let mut out = Vec::new();
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l <= cutoff {
                continue;
            }
            let s = C64::new(l.sqrt(), 0.0);
            let v = eig.eigenvectors.column(k);
            out.push(ComplexMatrix::from_fn(self.dim_out, self.dim_in, |a, i| {
                v[i * self.dim_out + a] * s
            }));
        }
        out
    }

    /// `n`-fold composition `E^n` of an endomorphism.
    pub fn power(&self, n: usize) -> Result<LinearMap> {
        if self.dim_in != self.dim_out {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                got: self.dim_out,
            });
        }
        Ok(LinearMap {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            superop: self.superop.pow(n as u32),
        })
    }
}

fn find_unit(unit: &ComplexMatrix) -> (usize, usize) {
    let idx = unit.iter().position(|z| z.re != 0.0).expect("matrix unit");
    (idx % unit.nrows(), idx / unit.nrows())
}

/// A completely positive trace-preserving map. Construction checks complete
/// positivity, trace preservation and the Choi/superoperator agreement.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    map: LinearMap,
    choi: ComplexMatrix,
}

impl Deref for Channel {
    type Target = LinearMap;

    fn deref(&self) -> &LinearMap {
        &self.map
    }
}

impl Channel {
    pub fn new(map: LinearMap) -> Result<Self> {
        let choi = map.choi();
        let min = hermitian_eig_unchecked(&hermitian_part(&choi)).min_eigenvalue();
        if min < -CP_TOL {
            return Err(Error::NotCompletelyPositive(min));
        }
        let hdef = (&choi - choi.adjoint()).norm();
        if hdef > CP_TOL * choi.norm().max(1.0) {
            return Err(Error::NotCompletelyPositive(-hdef));
        }
        let tp = map.trace_preservation_defect();
        if tp > TP_TOL {
            return Err(Error::NotTracePreserving(tp));
        }
        let rep = map.representation_defect();
        if rep > REPRESENTATION_TOL * map.superop.norm().max(1.0) {
            return Err(Error::InconsistentRepresentation(rep));
        }
        Ok(Channel { map, choi })
    }

    pub fn from_kraus(dim_in: usize, dim_out: usize, kraus: &[ComplexMatrix]) -> Result<Self> {
        Channel::new(LinearMap::from_kraus(dim_in, dim_out, kraus)?)
    }

    pub fn from_choi(dim_in: usize, dim_out: usize, choi: &ComplexMatrix) -> Result<Self> {
        Channel::new(LinearMap::from_choi(dim_in, dim_out, choi)?)
    }

    pub fn from_superop(dim_in: usize, dim_out: usize, superop: ComplexMatrix) -> Result<Self> {
        Channel::new(LinearMap::from_superop(dim_in, dim_out, superop)?)
    }

    pub fn identity(d: usize) -> Self {
        Channel::new(LinearMap::identity(d)).expect("identity is a channel")
    }

    /// `X ↦ U X U†`; fails unless `U` is unitary.
    pub fn unitary(u: &ComplexMatrix) -> Result<Self> {
        Channel::new(LinearMap::conjugation(u))
    }

    /// Replacement channel `X ↦ tr[X] σ`.
    pub fn replacement(dim_in: usize, sigma: &DensityMatrix) -> Self {
        Self::measure_and_prepare(&Povm::trivial(dim_in), std::slice::from_ref(sigma))
            .expect("replacement channel")
    }

    /// `X ↦ Σ_x tr[P_x X] σ_x`.
    pub fn measure_and_prepare(p: &Povm, states: &[DensityMatrix]) -> Result<Self> {
        let map = measure_and_prepare_map(p, states.iter().map(|s| s.matrix()))?;
        Channel::new(map)
    }

    pub fn map(&self) -> &LinearMap {
        &self.map
    }

    pub fn into_map(self) -> LinearMap {
        self.map
    }

    pub fn choi_matrix(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn compose(&self, first: &Channel) -> Result<Channel> {
        channel_compose(self, first)
    }
}

/// `Σ_x vec(O_x) vec(P_xᵀ)ᵀ`, the superoperator of `X ↦ Σ_x tr[P_x X] O_x`.
pub(crate) fn measure_and_prepare_map<'a>(
    p: &Povm,
    outputs: impl Iterator<Item = &'a ComplexMatrix>,
) -> Result<LinearMap> {
    let d = p.dim();
    let outputs: Vec<&ComplexMatrix> = outputs.collect();
    if outputs.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: outputs.len(),
        });
    }
    let dout = outputs[0].nrows();
    let mut s = ComplexMatrix::zeros(dout * dout, d * d);
    for (px, out) in p.elements().iter().zip(outputs) {
        if out.nrows() != dout || out.ncols() != dout {
            return Err(Error::DimensionMismatch {
                expected: dout,
                got: out.nrows(),
            });
        }
        let col = vectorize(out);
        let row = vectorize(&px.transpose());
        s += col * row.transpose();
    }
    LinearMap::from_superop(d, dout, s)
}

/// Quantum-classical channel `ρ ↦ Σ_x tr[P_x ρ] |x⟩⟨x|`.
pub fn measurement_channel(p: &Povm) -> Channel {
    let n = p.len();
    let units: Vec<ComplexMatrix> = (0..n).map(|x| matrix_unit(n, x, x)).collect();
    let map = measure_and_prepare_map(p, units.iter()).expect("shapes agree");
    Channel::new(map).expect("a valid POVM defines a channel")
}

/// Applies a channel to a state, clamping round-off negativity in the output.
pub fn apply_channel(e: &Channel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let out = e.apply(rho.matrix())?;
    DensityMatrix::from_channel_output(&out)
}

/// The Hilbert-Schmidt adjoint, a unital completely positive map.
pub fn adjoint_channel(e: &Channel) -> LinearMap {
    e.adjoint()
}

/// `e2 ∘ e1`.
pub fn channel_compose(e2: &Channel, e1: &Channel) -> Result<Channel> {
    Channel::new(e2.after(e1)?)
}

/// `E ⊗ id` on `A ⊗ B`.
pub fn channel_tensor_identity(e: &Channel, dim_b: usize) -> Result<Channel> {
    if dim_b == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    Channel::new(e.tensor_identity(dim_b))
}

/// Trace of the product of a map with the identity, `tr S`; for a channel on `d`
/// dimensions this is `Σ_ij ⟨i|E(|i⟩⟨j|)|j⟩`.
pub fn superop_trace(e: &LinearMap) -> C64 {
    trace(e.superop())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{diag, ket, trace_product_re, Tolerance};
    use crate::random::{random_channel, random_density_matrix, random_hermitian, random_povm, random_unitary, seeded};

    fn plus() -> DensityMatrix {
        DensityMatrix::pure(&(ket(2, 0) + ket(2, 1))).unwrap()
    }

    #[test]
    fn measurement_channel_examples() {
        let m = measurement_channel(&Povm::basis(2));
        let out = apply_channel(&m, &DensityMatrix::from_diagonal(&[0.75, 0.25]).unwrap()).unwrap();
        assert!((out.matrix() - diag(&[0.75, 0.25])).norm() < 1e-15);
        let out = apply_channel(&m, &plus()).unwrap();
        assert!((out.matrix() - diag(&[0.5, 0.5])).norm() < 1e-15);

        let smeared = Povm::new(vec![diag(&[2.0 / 3.0, 1.0 / 3.0]), diag(&[1.0 / 3.0, 2.0 / 3.0])]).unwrap();
        let out = apply_channel(&measurement_channel(&smeared), &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((out.matrix() - diag(&[0.5, 0.5])).norm() < 1e-15);
    }

    #[test]
    fn measurement_on_uniform_gives_relative_volumes() {
        let mut rng = seeded(21);
        for d in 2..5 {
            let p = random_povm(d, 3, &mut rng);
            let out = measurement_channel(&p).apply(&(identity(d) / C64::new(d as f64, 0.0))).unwrap();
            for (x, px) in p.elements().iter().enumerate() {
                assert!((out[(x, x)].re - trace(px).re / d as f64).abs() < 1e-12);
            }
            assert!(crate::quantum::ClassicalState::new(
                DensityMatrix::from_channel_output(&out).unwrap(),
                &Tolerance::default()
            )
            .is_ok());
        }
    }

    #[test]
    fn choi_and_superop_routes_agree() {
        let mut rng = seeded(22);
        for _ in 0..10 {
            let e = random_channel(3, 2, 2, &mut rng);
            let rho = random_density_matrix(3, &mut rng);
            let a = e.apply(rho.matrix()).unwrap();
            let b = e.apply_via_choi(rho.matrix()).unwrap();
            assert!((a - b).norm() < 1e-12);
            let back = Channel::from_choi(3, 2, e.choi_matrix()).unwrap();
            assert!(back.distance(&e) < 1e-12);
            let from_kraus = Channel::from_kraus(3, 2, &e.kraus()).unwrap();
            assert!(from_kraus.distance(&e) < 1e-10);
        }
    }

    #[test]
    fn rejects_invalid_maps() {
        let t = LinearMap::from_action(2, 2, |x| x.transpose());
        assert!(matches!(Channel::new(t), Err(Error::NotCompletelyPositive(_))));
        let half = LinearMap::conjugation(&(identity(2) * C64::new(0.5, 0.0)));
        assert!(matches!(Channel::new(half), Err(Error::NotTracePreserving(_))));
    }

    #[test]
    fn adjoint_pairing_and_unitality() {
        let mut rng = seeded(23);
        for _ in 0..10 {
            let e = random_channel(3, 3, 3, &mut rng);
            let ad = adjoint_channel(&e);
            let a = random_hermitian(3, &mut rng);
            let b = random_hermitian(3, &mut rng);
            let lhs = trace_product_re(&a, &e.apply(&b).unwrap());
            let rhs = trace_product_re(&ad.apply(&a).unwrap(), &b);
            assert!((lhs - rhs).abs() <= 1e-9 * a.norm() * b.norm());
            assert!(ad.unitality_defect() <= 1e-8);
            assert!(ad.adjoint().distance(&e) == 0.0);
        }
    }

    #[test]
    fn adjoint_examples() {
        let mut rng = seeded(24);
        let u = random_unitary(3, &mut rng);
        let ad = adjoint_channel(&Channel::unitary(&u).unwrap());
        assert!(ad.distance(&LinearMap::conjugation(&u.adjoint())) < 1e-12);
        let p = random_povm(3, 4, &mut rng);
        let ad = adjoint_channel(&measurement_channel(&p));
        for (x, px) in p.elements().iter().enumerate() {
            assert!((ad.apply(&matrix_unit(4, x, x)).unwrap() - px).norm() < 1e-12);
        }
    }

    #[test]
    fn composition_and_local_extension() {
        let mut rng = seeded(25);
        let e = random_channel(2, 2, 2, &mut rng);
        assert!(channel_compose(&e, &Channel::identity(2)).unwrap().distance(&e) < 1e-14);
        let ext = channel_tensor_identity(&e, 3).unwrap();
        for _ in 0..5 {
            let ra = random_density_matrix(2, &mut rng);
            let rb = random_density_matrix(3, &mut rng);
            let out = ext.apply(ra.tensor(&rb).matrix()).unwrap();
            let expect = tensor(&e.apply(ra.matrix()).unwrap(), rb.matrix());
            assert!((out - expect).norm() < 1e-12);
        }
        let f = random_channel(2, 2, 1, &mut rng);
        let ef = e.tensor(&f);
        let split = e.tensor_identity(2).after(&Channel::identity(2).tensor(&f)).unwrap();
        assert!(ef.distance(&split) < 1e-12);
        assert!(matches!(
            channel_compose(&e, &Channel::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
