//! Maximal projective post-processing and the inferential frame built on it.
//!
//! Outcomes of a POVM are joined whenever `P_x P_x'` or `P_x γ P_x'` is nonzero; the
//! connected components of that graph group the elements into the coarsest-possible
//! blocks whose sums `Π_y` are projectors commuting with the prior. From `Π` come the
//! resource-destroying map `Δ(·) = Σ_y tr[Π_y ·] Π_y γ Π_y / tr[Π_y γ]` and the
//! macroscopicity tests.

use serde::{Deserialize, Serialize};

use crate::entropy::{observational_deficit_with, EntropyValue};
use crate::error::{Error, Result};
use crate::numerics::{commutator, hermitian_part, trace_product_re, ComplexMatrix, Tolerance, C64};
use crate::par::{self, Execution};
use crate::quantum::{measure_and_prepare_map, Channel, DensityMatrix, LinearMap, Povm};
use crate::retrodiction::{coarse_graining_map_with, require_invertible_prior, CoarseGrainingMap, FIXED_POINT_TOL};

/// Largest outcome count accepted by the exhaustive partition search.
pub const BRUTE_FORCE_LIMIT: usize = 9;
/// Threshold on the deficit for the macroscopicity tests.
pub const DEFICIT_TOL: f64 = 1e-8;
/// Clustering radius around eigenvalue 1 and residual bound for fixed points.
pub const EIGENVALUE_TOL: f64 = 1e-6;
const COMMUTATION_TOL: f64 = 1e-9;
const IDEMPOTENCE_TOL: f64 = 1e-8;
const PRIOR_FIX_TOL: f64 = 1e-9;
const NEGATIVE_COEFFICIENT_TOL: f64 = 1e-9;

/// Disjoint blocks of outcome indices covering `0..n`, in canonical order: each block
/// ascending, blocks ordered by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::PreconditionViolated("empty block in partition".into()));
            }
            b.sort_unstable();
            for &x in b.iter() {
                if x >= n || seen[x] {
                    return Err(Error::PreconditionViolated(format!(
                        "index {x} repeated or out of range in partition"
                    )));
                }
                seen[x] = true;
            }
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Partition { blocks })
    }

    /// Partition from a block assignment `x ↦ block[x]`.
    pub fn from_assignment(assignment: &[usize]) -> Self {
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (x, &b) in assignment.iter().enumerate() {
            blocks[b].push(x);
        }
        blocks.retain(|b| !b.is_empty());
        blocks.sort_by_key(|b| b[0]);
        Partition { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// `x ↦` index of the block containing `x`.
    pub fn assignment(&self) -> Vec<usize> {
        let mut a = vec![0; self.num_elements()];
        for (y, b) in self.blocks.iter().enumerate() {
            for &x in b {
                a[x] = y;
            }
        }
        a
    }

    /// True when every block of `self` is a union of blocks of `finer`.
    pub fn is_coarsening_of(&self, finer: &Partition) -> bool {
        let mine = self.assignment();
        finer.blocks.iter().all(|b| b.iter().all(|&x| mine[x] == mine[b[0]]))
    }

    /// The deterministic map sending block `y` of `self` to the block of `coarser`
    /// containing it.
    pub fn merge_map(&self, coarser: &Partition) -> Result<crate::quantum::StochasticMap> {
        if !coarser.is_coarsening_of(self) {
            return Err(Error::PreconditionViolated("target partition is not coarser".into()));
        }
        let target = coarser.assignment();
        let mut groups = vec![Vec::new(); coarser.len()];
        for (y, b) in self.blocks.iter().enumerate() {
            groups[target[b[0]]].push(y);
        }
        crate::quantum::StochasticMap::from_blocks(self.len(), &groups)
    }

    /// Blocks expressed with the POVM's outcome labels.
    pub fn labels(&self, p: &Povm) -> Vec<Vec<String>> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&x| p.labels()[x].clone()).collect())
            .collect()
    }
}

/// Edge list of the γ-disconnection graph on the outcome set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisconnectionGraph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Whether `P_x` and `P_x'` are joined: `P_x P_x'` or `P_x γ P_x'` fails the zero test
/// relative to the product of the input norms.
pub(crate) fn joined(a: &ComplexMatrix, b: &ComplexMatrix, gamma: &ComplexMatrix, tol: &Tolerance) -> bool {
    let (na, nb, ng) = (a.norm(), b.norm(), gamma.norm());
    !tol.is_zero((a * b).norm(), na * nb) || !tol.is_zero((a * gamma * b).norm(), na * ng * nb)
}

pub fn disconnection_graph(p: &Povm, gamma: &DensityMatrix, tol: &Tolerance) -> Result<DisconnectionGraph> {
    check_frame_dims(p, gamma)?;
    require_invertible_prior(gamma, tol)?;
    let n = p.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if joined(p.element(i), p.element(j), gamma.matrix(), tol) {
                edges.push((i, j));
            }
        }
    }
    Ok(DisconnectionGraph { vertices: n, edges })
}

fn check_frame_dims(p: &Povm, gamma: &DensityMatrix) -> Result<()> {
    if p.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: gamma.dim(),
        });
    }
    Ok(())
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected components of the graph, canonically ordered.
pub fn components(graph: &DisconnectionGraph) -> Partition {
    let mut uf = UnionFind::new(graph.vertices);
    for &(a, b) in &graph.edges {
        uf.union(a, b);
    }
    let mut label = vec![usize::MAX; graph.vertices];
    let mut next = 0;
    let assignment: Vec<usize> = (0..graph.vertices)
        .map(|x| {
            let r = uf.find(x);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            label[r]
        })
        .collect();
    Partition::from_assignment(&assignment)
}

/// A POVM and an invertible prior together with everything derived from them.
#[derive(Debug, Clone)]
pub struct InferentialFrame {
    povm: Povm,
    prior: DensityMatrix,
    partition: Partition,
    mppp: Povm,
    rdm: Channel,
    cg: CoarseGrainingMap,
    extreme_points: Vec<DensityMatrix>,
    tol: Tolerance,
}

impl InferentialFrame {
    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn prior(&self) -> &DensityMatrix {
        &self.prior
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// The projective post-processing `Π`.
    pub fn mppp(&self) -> &Povm {
        &self.mppp
    }

    /// The resource-destroying map `Δ`.
    pub fn rdm(&self) -> &Channel {
        &self.rdm
    }

    pub fn cg(&self) -> &CoarseGrainingMap {
        &self.cg
    }

    pub fn tolerance(&self) -> &Tolerance {
        &self.tol
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    /// `|Y|`.
    pub fn num_macrostates(&self) -> usize {
        self.mppp.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.mppp.len() == 1
    }

    /// The normalized blocks `Π_y γ Π_y / tr[Π_y γ]`.
    pub fn extreme_points(&self) -> &[DensityMatrix] {
        &self.extreme_points
    }
}

pub fn compute_mppp(p: &Povm, gamma: &DensityMatrix) -> Result<InferentialFrame> {
    compute_mppp_with(p, gamma, &Tolerance::default())
}

pub fn compute_mppp_with(p: &Povm, gamma: &DensityMatrix, tol: &Tolerance) -> Result<InferentialFrame> {
    let graph = disconnection_graph(p, gamma, tol)?;
    let partition = components(&graph);
    frame_from_partition(p, gamma, partition, tol)
}

fn frame_from_partition(
    p: &Povm,
    gamma: &DensityMatrix,
    partition: Partition,
    tol: &Tolerance,
) -> Result<InferentialFrame> {
    let d = p.dim();
    let g = gamma.matrix();
    let mut elements = Vec::with_capacity(partition.len());
    for block in partition.blocks() {
        let mut pi = ComplexMatrix::zeros(d, d);
        for &x in block {
            pi += p.element(x);
        }
        elements.push(hermitian_part(&pi));
    }
    let labels = (0..elements.len()).map(|y| y.to_string()).collect();
    let mppp = Povm::with_labels(labels, elements, tol)?;
    if !mppp.is_pvm(tol) {
        return Err(Error::FrameInvariant("block sums are not orthogonal projectors".into()));
    }
    for (y, pi) in mppp.elements().iter().enumerate() {
        let c = commutator(pi, g).norm();
        if c > COMMUTATION_TOL * g.norm().max(1.0) * pi.norm().max(1.0) {
            return Err(Error::FrameInvariant(format!(
                "block {y} does not commute with the prior ({c:.3e})"
            )));
        }
    }
    let extreme_points = mppp
        .elements()
        .iter()
        .map(|pi| {
            let block = hermitian_part(&(pi * g * pi));
            let w = trace_product_re(pi, g);
            DensityMatrix::from_channel_output(&(block / C64::new(w, 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let rdm = Channel::new(measure_and_prepare_map(&mppp, extreme_points.iter().map(|s| s.matrix()))?)?;
    let s = rdm.superop();
    let idem = (s * s - s).norm();
    if idem > IDEMPOTENCE_TOL * s.norm().max(1.0) {
        return Err(Error::FrameInvariant(format!("resource-destroying map is not idempotent ({idem:.3e})")));
    }
    let fixed = (rdm.apply(g)? - g).norm();
    if fixed > PRIOR_FIX_TOL {
        return Err(Error::FrameInvariant(format!(
            "resource-destroying map moves the prior by {fixed:.3e}"
        )));
    }
    let cg = coarse_graining_map_with(p, gamma, tol)?;
    Ok(InferentialFrame {
        povm: p.clone(),
        prior: gamma.clone(),
        partition,
        mppp,
        rdm,
        cg,
        extreme_points,
        tol: *tol,
    })
}

/// Every set partition of `0..n` as a restricted growth string.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut a = vec![0usize; n];
    let mut max = vec![0usize; n];
    loop {
        out.push(a.clone());
        // Rightmost position that can still be incremented.
        let mut i = n - 1;
        loop {
            if i == 0 {
                return out;
            }
            if a[i] <= max[i - 1] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        max[i] = max[i - 1].max(a[i]);
        for j in (i + 1)..n {
            a[j] = 0;
            max[j] = max[i];
        }
    }
}

/// All γ-disconnected partitions of the outcome set, found by exhaustive search.
pub fn disconnected_partitions(p: &Povm, gamma: &DensityMatrix, tol: &Tolerance, mode: Execution) -> Result<Vec<Partition>> {
    check_frame_dims(p, gamma)?;
    require_invertible_prior(gamma, tol)?;
    let n = p.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooManyOutcomes(n, BRUTE_FORCE_LIMIT));
    }
    let mut zero = vec![vec![true; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                zero[i][j] = !joined(p.element(i), p.element(j), gamma.matrix(), tol);
            }
        }
    }
    let candidates = set_partitions(n);
    let keep = par::map(&candidates, mode, |a| {
        (0..n).all(|i| (0..n).all(|j| a[i] == a[j] || zero[i][j]))
    });
    Ok(candidates
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(a, _)| Partition::from_assignment(a))
        .collect())
}

/// The finest γ-disconnected partition by exhaustive search. Also checks that every
/// other γ-disconnected partition coarsens it.
pub fn brute_force_mppp(p: &Povm, gamma: &DensityMatrix) -> Result<Partition> {
    brute_force_mppp_with(p, gamma, &Tolerance::default(), Execution::available())
}

pub fn brute_force_mppp_with(p: &Povm, gamma: &DensityMatrix, tol: &Tolerance, mode: Execution) -> Result<Partition> {
    let all = disconnected_partitions(p, gamma, tol, mode)?;
    let finest = all
        .iter()
        .max_by_key(|q| q.len())
        .cloned()
        .ok_or_else(|| Error::TheoremViolation("no disconnected partition found".into()))?;
    if let Some(bad) = all.iter().find(|q| !q.is_coarsening_of(&finest)) {
        return Err(Error::TheoremViolation(format!(
            "disconnected partition {:?} does not coarsen the finest one {:?}",
            bad.blocks(),
            finest.blocks()
        )));
    }
    Ok(finest)
}

/// `Δ` of the frame.
pub fn rdm(frame: &InferentialFrame) -> &Channel {
    frame.rdm()
}

/// Outcome of the four equivalent macroscopicity tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroReport {
    pub deficit: EntropyValue,
    pub deficit_zero: bool,
    pub cg_residual: f64,
    pub cg_fixed: bool,
    pub rdm_residual: f64,
    pub rdm_fixed: bool,
    /// Weights of the block decomposition; present when it reproduces the state.
    pub coefficients: Option<Vec<f64>>,
    pub decomposition_residual: f64,
    pub decomposition_holds: bool,
    pub verdict: bool,
}

impl MacroReport {
    /// Assembles a report and demands that all four flags agree.
    pub(crate) fn consensus(
        deficit: EntropyValue,
        deficit_zero: bool,
        cg: (f64, bool),
        rdm: (f64, bool),
        decomposition: (f64, bool),
        coefficients: Vec<f64>,
    ) -> Result<MacroReport> {
        let flags = [deficit_zero, cg.1, rdm.1, decomposition.1];
        let report = MacroReport {
            deficit,
            deficit_zero,
            cg_residual: cg.0,
            cg_fixed: cg.1,
            rdm_residual: rdm.0,
            rdm_fixed: rdm.1,
            coefficients: decomposition.1.then_some(coefficients),
            decomposition_residual: decomposition.0,
            decomposition_holds: decomposition.1,
            verdict: flags[0],
        };
        if flags.iter().any(|&f| f != flags[0]) {
            return Err(Error::TheoremViolation(format!(
                "conditions disagree: deficit {:.3e} ({}), coarse-graining residual {:.3e} ({}), \
                 destroying-map residual {:.3e} ({}), decomposition residual {:.3e} ({})",
                deficit.as_f64(),
                flags[0],
                cg.0,
                flags[1],
                rdm.0,
                flags[2],
                decomposition.0,
                flags[3]
            )));
        }
        Ok(report)
    }
}

pub(crate) fn residual_test(e: &LinearMap, rho: &ComplexMatrix) -> (f64, bool) {
    let r = (e.apply_unchecked(rho) - rho).norm();
    (r, r <= FIXED_POINT_TOL * rho.norm().max(1.0))
}

/// Evaluates the four equivalent conditions for `ρ` being macroscopic in the frame.
pub fn macro_test(rho: &DensityMatrix, frame: &InferentialFrame) -> Result<MacroReport> {
    if rho.dim() != frame.dim() {
        return Err(Error::DimensionMismatch {
            expected: frame.dim(),
            got: rho.dim(),
        });
    }
    let deficit = observational_deficit_with(rho, &frame.prior, &frame.povm, &frame.tol)?;
    let deficit_zero = deficit.finite && deficit.value <= DEFICIT_TOL;
    let cg = residual_test(frame.cg.channel(), rho.matrix());
    let rd = residual_test(&frame.rdm, rho.matrix());

    // The blocks Π_y γ are mutually orthogonal, so nonnegative least squares separates
    // into one clamped projection per block.
    let g = frame.prior.matrix();
    let mut fit = ComplexMatrix::zeros(frame.dim(), frame.dim());
    let mut coefficients = Vec::with_capacity(frame.num_macrostates());
    let mut most_negative = 0.0f64;
    for pi in frame.mppp.elements() {
        let block = pi * g * pi;
        let c = trace_product_re(&block, rho.matrix()) / trace_product_re(&block, &block);
        most_negative = most_negative.min(c);
        let c = c.max(0.0);
        fit += &block * C64::new(c, 0.0);
        coefficients.push(c);
    }
    let dec_res = (rho.matrix() - fit).norm();
    let dec_ok = dec_res <= FIXED_POINT_TOL * rho.matrix().norm().max(1.0) && most_negative >= -NEGATIVE_COEFFICIENT_TOL;
    MacroReport::consensus(deficit, deficit_zero, cg, rd, (dec_res, dec_ok), coefficients)
}

/// Eigenvalues of a general square matrix from its complex Schur form.
pub fn general_eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    let n = m.nrows();
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 100_000)
        .ok_or_else(|| Error::FixedPointMismatch("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let scale = t.norm().max(1.0);
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].norm() > 1e-13 * scale {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = (half_tr * half_tr - (a * d - b * c)).sqrt();
            out.push(half_tr + disc);
            out.push(half_tr - disc);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    Ok(out)
}

/// Dimension of the fixed-point space of a map: eigenvalues within `EIGENVALUE_TOL`
/// of 1, confirmed by the same number of near-null right singular vectors of `S − 1`
/// with residual at most `EIGENVALUE_TOL`.
pub fn fixed_point_space_dim(e: &LinearMap) -> Result<usize> {
    if e.dim_in() != e.dim_out() {
        return Err(Error::DimensionMismatch {
            expected: e.dim_in(),
            got: e.dim_out(),
        });
    }
    let s = e.superop();
    let n = s.nrows();
    let count = general_eigenvalues(s)?
        .iter()
        .filter(|l| (*l - C64::new(1.0, 0.0)).norm() <= EIGENVALUE_TOL)
        .count();
    let shifted = s - ComplexMatrix::identity(n, n);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    for &k in order.iter().take(count) {
        let v = v_t.row(k).adjoint();
        let residual = (s * &v - &v).norm();
        if residual > EIGENVALUE_TOL {
            return Err(Error::FixedPointMismatch(format!(
                "{count} eigenvalues near 1 but only a smaller fixed subspace (residual {residual:.3e})"
            )));
        }
    }
    let null = order
        .iter()
        .filter(|&&k| svd.singular_values[k] <= EIGENVALUE_TOL)
        .count();
    if null != count {
        return Err(Error::FixedPointMismatch(format!(
            "{count} eigenvalues near 1 but {null} near-null singular values"
        )));
    }
    Ok(count)
}
