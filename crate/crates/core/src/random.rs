//! Seeded samplers for states, measurements, channels and whole frames.
//!
//! Everything here is driven by an explicit RNG so that a seed fully determines the
//! output. Used by the test suites, the benches and the randomized CLI paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{
    diag, identity, ketbra, matrix_function, zeros, ComplexMatrix, ComplexVector, MatrixFunction,
    Tolerance, C64,
};
use crate::quantum::{Channel, DensityMatrix, Povm, StochasticMap};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(d, d, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_ket<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexVector {
    let v = ComplexVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Full-rank (almost surely) state from the Hilbert-Schmidt ensemble.
pub fn random_density_matrix<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    random_density_matrix_rank(d, d, rng)
}

pub fn random_density_matrix_rank<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(d, rank.max(1), rng);
    let m = &g * g.adjoint();
    DensityMatrix::from_unnormalized(m).expect("Wishart sample is a valid state")
}

pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::pure(&random_ket(d, rng)).expect("normalized ket")
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let qr = ginibre(d, d, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_probability<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    // Exponential spacings give the flat Dirichlet distribution.
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

pub fn random_stochastic<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> StochasticMap {
    let data: Vec<Vec<f64>> = (0..rows).map(|_| random_probability(cols, rng)).collect();
    StochasticMap::from_rows(&data).expect("rows are probability vectors")
}

/// Normalizes a family of PSD operators into a POVM: `P_i = S^{-1/2} A_i S^{-1/2}`.
pub fn normalize_to_povm(elements: Vec<ComplexMatrix>) -> Povm {
    let d = elements[0].nrows();
    let sum = elements.iter().fold(zeros(d), |acc, a| acc + a);
    let s = matrix_function(&sum, MatrixFunction::InvSqrtOnSupport, &Tolerance::default())
        .expect("sum of PSD operators is PSD");
    let elems = elements.iter().map(|a| &s * a * &s).collect();
    Povm::new(elems).expect("normalized family is a POVM")
}

/// Random POVM with `n` generic elements of the given rank, raised if needed so that
/// the elements span the space.
pub fn random_povm_rank<R: Rng + ?Sized>(d: usize, n: usize, rank: usize, rng: &mut R) -> Povm {
    let n = n.max(1);
    let rank = rank.max(d.div_ceil(n));
    let elems = (0..n)
        .map(|_| {
            let g = ginibre(d, rank.max(1), rng);
            &g * g.adjoint()
        })
        .collect();
    normalize_to_povm(elems)
}

pub fn random_povm<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Povm {
    random_povm_rank(d, n, d, rng)
}

/// Projectors onto a random orthonormal basis grouped into consecutive blocks of the
/// given sizes.
pub fn random_block_projectors<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Vec<ComplexMatrix> {
    let d: usize = sizes.iter().sum();
    let u = random_unitary(d, rng);
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let cols = u.columns(start, s).into_owned();
            start += s;
            &cols * cols.adjoint()
        })
        .collect()
}

/// Random composition of `d` into `parts` positive sizes.
pub fn random_composition<R: Rng + ?Sized>(d: usize, parts: usize, rng: &mut R) -> Vec<usize> {
    let parts = parts.clamp(1, d);
    let mut sizes = vec![1; parts];
    for _ in 0..(d - parts) {
        let k = rng.random_range(0..parts);
        sizes[k] += 1;
    }
    sizes
}

/// Random PSD operator supported inside the range of projector `p`.
pub fn random_psd_in<R: Rng + ?Sized>(p: &ComplexMatrix, rng: &mut R) -> ComplexMatrix {
    let d = p.nrows();
    let g = ginibre(d, d, rng);
    let a = &g * g.adjoint();
    p * a * p
}

/// Splits each block projector into `counts[y]` generic PSD pieces that sum back to it.
pub fn split_blocks<R: Rng + ?Sized>(blocks: &[ComplexMatrix], counts: &[usize], rng: &mut R) -> Vec<ComplexMatrix> {
    let tol = Tolerance::default();
    let mut out = Vec::new();
    for (p, &k) in blocks.iter().zip(counts) {
        if k <= 1 {
            out.push(p.clone());
            continue;
        }
        let pieces: Vec<ComplexMatrix> = (0..k).map(|_| random_psd_in(p, rng)).collect();
        let sum = pieces.iter().fold(zeros(p.nrows()), |acc, a| acc + a);
        let s = matrix_function(&sum, MatrixFunction::InvSqrtOnSupport, &tol).expect("PSD");
        out.extend(pieces.iter().map(|a| &s * a * &s));
    }
    out
}

/// Prior that is block diagonal with respect to the given orthogonal projectors.
pub fn random_block_prior<R: Rng + ?Sized>(blocks: &[ComplexMatrix], rng: &mut R) -> DensityMatrix {
    let d = blocks[0].nrows();
    let mut m = zeros(d);
    for p in blocks {
        let g = ginibre(d, d, rng);
        m += p * (&g * g.adjoint()) * p;
    }
    DensityMatrix::from_unnormalized(m).expect("block-diagonal PSD")
}

/// Flavours of randomly generated (POVM, prior) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    /// Generic POVM and generic prior.
    Generic,
    /// POVM elements refine a block PVM and the prior is block diagonal.
    Block,
    /// Block-refining POVM, generic prior that reconnects the blocks.
    BlockGenericPrior,
    /// Probabilistic splitting of a block PVM (elements proportional to the blocks).
    ProportionalSplit,
}

/// Random (POVM, prior) pair of dimension `d` with at most `max_outcomes` outcomes.
pub fn random_frame_inputs<R: Rng + ?Sized>(
    d: usize,
    max_outcomes: usize,
    kind: FrameKind,
    rng: &mut R,
) -> (Povm, DensityMatrix) {
    let max_outcomes = max_outcomes.max(1);
    match kind {
        FrameKind::Generic => {
            let n = rng.random_range(1..=max_outcomes);
            let rank = rng.random_range(1..=d);
            let prior = random_density_matrix(d, rng);
            (random_povm_rank(d, n, rank, rng), prior)
        }
        FrameKind::Block | FrameKind::BlockGenericPrior => {
            let parts = rng.random_range(1..=d.min(max_outcomes));
            let sizes = random_composition(d, parts, rng);
            let blocks = random_block_projectors(&sizes, rng);
            let mut counts = vec![1; parts];
            for _ in 0..rng.random_range(0..=(max_outcomes - parts)) {
                let k = rng.random_range(0..parts);
                counts[k] += 1;
            }
            let povm = Povm::new(split_blocks(&blocks, &counts, rng)).expect("split blocks form a POVM");
            let prior = if kind == FrameKind::Block {
                random_block_prior(&blocks, rng)
            } else {
                random_density_matrix(d, rng)
            };
            (povm, prior)
        }
        FrameKind::ProportionalSplit => {
            let parts = rng.random_range(1..=d.min(max_outcomes));
            let sizes = random_composition(d, parts, rng);
            let blocks = random_block_projectors(&sizes, rng);
            let mut elems = Vec::new();
            let mut budget = max_outcomes - parts;
            for p in &blocks {
                let k = 1 + if budget > 0 { rng.random_range(0..=budget.min(2)) } else { 0 };
                budget -= k - 1;
                for w in random_probability(k, rng) {
                    elems.push(p * C64::new(w, 0.0));
                }
            }
            let povm = Povm::new(elems).expect("proportional split is a POVM");
            (povm, random_block_prior(&blocks, rng))
        }
    }
}

pub fn random_frame_kind<R: Rng + ?Sized>(rng: &mut R) -> FrameKind {
    match rng.random_range(0..4) {
        0 => FrameKind::Generic,
        1 => FrameKind::Block,
        2 => FrameKind::BlockGenericPrior,
        _ => FrameKind::ProportionalSplit,
    }
}

/// Random channel from a Haar-like random isometry with `kraus_rank` Kraus operators.
pub fn random_channel<R: Rng + ?Sized>(dim_in: usize, dim_out: usize, kraus_rank: usize, rng: &mut R) -> Channel {
    let r = kraus_rank.max(1);
    let g = ginibre(dim_out * r, dim_in, rng);
    let gram = g.adjoint() * &g;
    let s = matrix_function(&gram, MatrixFunction::InvSqrtOnSupport, &Tolerance::default()).expect("PSD");
    let v = g * s;
    let kraus: Vec<ComplexMatrix> = (0..r).map(|k| v.rows(k * dim_out, dim_out).into_owned()).collect();
    Channel::from_kraus(dim_in, dim_out, &kraus).expect("isometry gives a channel")
}

/// Random unital channel: a random mixture of unitary conjugations.
pub fn random_unital_channel<R: Rng + ?Sized>(d: usize, terms: usize, rng: &mut R) -> Channel {
    let w = random_probability(terms.max(1), rng);
    let kraus: Vec<ComplexMatrix> = w
        .iter()
        .map(|&p| random_unitary(d, rng) * C64::new(p.sqrt(), 0.0))
        .collect();
    Channel::from_kraus(d, d, &kraus).expect("mixed unitary channel")
}

/// Random diagonal unitary.
pub fn random_diagonal_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let mut u = identity(d);
    for i in 0..d {
        u[(i, i)] = C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
    }
    u
}

/// Random classical probability vector embedded as a diagonal state.
pub fn random_diagonal_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::new(diag(&random_probability(d, rng))).expect("diagonal probability")
}

/// Random pure-state projector `|v><v|`.
pub fn random_rank_one<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    ketbra(&random_ket(d, rng))
}
