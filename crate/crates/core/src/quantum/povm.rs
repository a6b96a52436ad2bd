use crate::error::{Error, Result};
use crate::numerics::{
    check_finite, check_square, frobenius, hermitian_eig, identity, matrix_unit, trace_product_re, zeros,
    ComplexMatrix, Tolerance, C64,
};

use super::DensityMatrix;

/// Completeness tolerance for `Σ_x P_x = 1`, per unit of `‖1‖_F`.
pub const COMPLETENESS_TOL: f64 = 1e-9;
const STOCHASTIC_TOL: f64 = 1e-12;

/// A labeled POVM with no zero elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    labels: Vec<String>,
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    /// Builds a POVM labeled `"0", "1", ...` with the default tolerance.
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let labels = (0..elements.len()).map(|i| i.to_string()).collect();
        Self::with_labels(labels, elements, &Tolerance::default())
    }

    /// Validates and builds a POVM. Elements with Frobenius norm at or below
    /// `rank_eps` are dropped with a warning.
    pub fn with_labels(labels: Vec<String>, elements: Vec<ComplexMatrix>, tol: &Tolerance) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidPovm("no elements".into()));
        }
        if labels.len() != elements.len() {
            return Err(Error::InvalidPovm(format!(
                "{} labels for {} elements",
                labels.len(),
                elements.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidPovm(format!("duplicate label {l:?}")));
            }
        }
        let d = check_square(&elements[0])?;
        let mut sum = zeros(d);
        let mut kept_labels = Vec::new();
        let mut kept = Vec::new();
        for (label, p) in labels.into_iter().zip(elements) {
            if check_square(&p)? != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.nrows(),
                });
            }
            check_finite(&p)?;
            let eig = hermitian_eig(&p, tol)
                .map_err(|_| Error::InvalidPovm(format!("element {label:?} is not Hermitian")))?;
            let scale = eig.max_eigenvalue().abs().max(eig.min_eigenvalue().abs());
            if eig.min_eigenvalue() < -(tol.rank_eps * scale.max(1.0)) {
                return Err(Error::InvalidPovm(format!(
                    "element {label:?} has negative eigenvalue {:.3e}",
                    eig.min_eigenvalue()
                )));
            }
            sum += &p;
            if frobenius(&p) <= tol.rank_eps {
                log::warn!("dropping zero POVM element {label:?}");
                continue;
            }
            kept_labels.push(label);
            kept.push(crate::numerics::hermitian_part(&p));
        }
        let defect = (sum - identity(d)).norm();
        if defect > COMPLETENESS_TOL * (d as f64).sqrt() {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {defect:.3e}"
            )));
        }
        if kept.is_empty() {
            return Err(Error::InvalidPovm("all elements are zero".into()));
        }
        Ok(Povm {
            labels: kept_labels,
            elements: kept,
        })
    }

    /// Projective measurement in the computational basis.
    pub fn basis(d: usize) -> Self {
        Povm {
            labels: (0..d).map(|i| i.to_string()).collect(),
            elements: (0..d).map(|i| matrix_unit(d, i, i)).collect(),
        }
    }

    /// The single-outcome POVM `{1}`.
    pub fn trivial(d: usize) -> Self {
        Povm {
            labels: vec!["0".into()],
            elements: vec![identity(d)],
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &ComplexMatrix {
        &self.elements[i]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Outcome distribution `tr[P_x ρ]`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rho.dim(),
            });
        }
        Ok(self
            .elements
            .iter()
            .map(|p| trace_product_re(p, rho.matrix()))
            .collect())
    }

    /// Projection-valued: `P_x P_x' = δ_{xx'} P_x` for all pairs.
    pub fn is_pvm(&self, tol: &Tolerance) -> bool {
        let norms: Vec<f64> = self.elements.iter().map(frobenius).collect();
        for (i, p) in self.elements.iter().enumerate() {
            for (j, q) in self.elements.iter().enumerate().skip(i) {
                let mut prod = p * q;
                if i == j {
                    prod -= p;
                }
                if !tol.is_zero(prod.norm(), norms[i] * norms[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// `Q_y = Σ_x p(y|x) P_x`.
    pub fn post_process(&self, t: &StochasticMap) -> Result<Povm> {
        let raw = self.post_process_raw(t)?;
        Povm::new(raw)
    }

    /// Post-processing without validation or pruning.
    pub(crate) fn post_process_raw(&self, t: &StochasticMap) -> Result<Vec<ComplexMatrix>> {
        if t.rows() != self.len() {
            return Err(Error::InvalidStochasticMap(format!(
                "map has {} rows but the POVM has {} outcomes",
                t.rows(),
                self.len()
            )));
        }
        let d = self.dim();
        Ok((0..t.cols())
            .map(|y| {
                self.elements
                    .iter()
                    .enumerate()
                    .fold(zeros(d), |acc, (x, p)| acc + p * C64::new(t.get(x, y), 0.0))
            })
            .collect())
    }

    /// Merges outcomes according to `blocks` (lists of outcome indices).
    pub fn coarsen(&self, blocks: &[Vec<usize>]) -> Result<Povm> {
        self.post_process(&StochasticMap::from_blocks(self.len(), blocks)?)
    }
}

/// Classical channel `p(y|x)`: rows indexed by input `x`, columns by output `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StochasticMap {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidStochasticMap("no rows".into()));
        }
        let c = rows[0].len();
        if c == 0 {
            return Err(Error::InvalidStochasticMap("no columns".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::InvalidStochasticMap(format!("row {x} has {} entries, expected {c}", row.len())));
            }
            for (y, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < -STOCHASTIC_TOL || v > 1.0 + STOCHASTIC_TOL {
                    return Err(Error::InvalidStochasticMap(format!("entry ({x}, {y}) = {v} outside [0, 1]")));
                }
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidStochasticMap(format!("row {x} sums to {s}")));
            }
            data.extend(row.iter().map(|v| v.clamp(0.0, 1.0)));
        }
        Ok(StochasticMap { rows: r, cols: c, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        StochasticMap { rows: n, cols: n, data }
    }

    /// Deterministic map sending every index in `blocks[y]` to `y`.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut rows = vec![vec![0.0; blocks.len()]; n];
        let mut hit = vec![false; n];
        for (y, block) in blocks.iter().enumerate() {
            for &x in block {
                if x >= n || hit[x] {
                    return Err(Error::InvalidStochasticMap(format!("index {x} missing or repeated in blocks")));
                }
                hit[x] = true;
                rows[x][y] = 1.0;
            }
        }
        if let Some(x) = hit.iter().position(|h| !h) {
            return Err(Error::InvalidStochasticMap(format!("index {x} not covered by blocks")));
        }
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.cols + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.cols..(x + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|x| self.row(x).to_vec()).collect()
    }

    /// Apply `self` first, then `next`: the matrix product `self · next`.
    pub fn then(&self, next: &StochasticMap) -> Result<StochasticMap> {
        if self.cols != next.rows {
            return Err(Error::InvalidStochasticMap(format!(
                "cannot compose {}x{} with {}x{}",
                self.rows, self.cols, next.rows, next.cols
            )));
        }
        let mut data = vec![0.0; self.rows * next.cols];
        for x in 0..self.rows {
            for z in 0..self.cols {
                let a = self.get(x, z);
                if a == 0.0 {
                    continue;
                }
                for y in 0..next.cols {
                    data[x * next.cols + y] += a * next.get(z, y);
                }
            }
        }
        Ok(StochasticMap {
            rows: self.rows,
            cols: next.cols,
            data,
        })
    }

    /// Every entry within `eps` of 0 or 1.
    pub fn is_deterministic(&self, eps: f64) -> bool {
        self.data.iter().all(|&v| v.abs() <= eps || (v - 1.0).abs() <= eps)
    }
}

/// Decides whether the stochastic map taking `p` to the PVM `q` is deterministic.
///
/// Errors when `t` does not actually map `p` to `q` or when `q` is not projective.
pub fn check_deterministic_postprocessing(p: &Povm, q: &Povm, t: &StochasticMap) -> Result<bool> {
    let tol = Tolerance::default();
    if !q.is_pvm(&tol) {
        return Err(Error::PreconditionViolated("target POVM is not projective".into()));
    }
    let image = p.post_process_raw(t)?;
    if image.len() != q.len() {
        return Err(Error::PreconditionViolated(format!(
            "map produces {} outcomes, target has {}",
            image.len(),
            q.len()
        )));
    }
    for (y, (a, b)) in image.iter().zip(q.elements()).enumerate() {
        let err = (a - b).norm();
        if err > 1e-9 {
            return Err(Error::PreconditionViolated(format!(
                "map does not produce target element {y} (error {err:.3e})"
            )));
        }
    }
    Ok(t.is_deterministic(1e-9))
}
