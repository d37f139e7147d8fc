//! Dense complex-matrix state representation and the instantaneous-measurement
//! algebra.
//!
//! States are density matrices expressed in the field-free energy eigenbasis.
//! An ideal instantaneous measurement of an observable `A` destroys the
//! coherences between nondegenerate eigenspaces of `A` while leaving the
//! populations in each eigenvector untouched; for a single projector `P` the
//! map reduces to `ρ → PρP + (1−P)ρ(1−P) = ρ − [P,[P,ρ]]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Hermiticity tolerance for accepting operator/state input.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Unit-trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Positivity tolerance: min eigenvalue of a state must stay above `-PSD_TOL`.
pub const PSD_TOL: f64 = 1e-9;
/// Idempotency tolerance for projectors, `‖P² − P‖_max`.
pub const IDEMPOTENCY_TOL: f64 = 1e-10;
/// Default absolute tolerance for grouping degenerate eigenvalues.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

fn max_abs_dev_from_hermitian(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Symmetrize `(M + M†)/2` in place; suppresses floating-point drift after
/// long operation chains.
pub(crate) fn rehermitize(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
    }
}

/// A Hermitian observable on an `n`-level system.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<C64>,
}

impl HermitianOperator {
    /// Validate Hermiticity (to within [`HERMITICITY_TOL`]) and wrap.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let dev = max_abs_dev_from_hermitian(&entries);
        if dev > HERMITICITY_TOL {
            return Err(Error::NotHermitian { max_dev: dev });
        }
        let mut entries = entries;
        rehermitize(&mut entries);
        Ok(Self { entries })
    }

    /// Operator with the given real diagonal and zero off-diagonal entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Self { entries: m }
    }

    /// Operator from a real symmetric matrix given in row-major order.
    pub fn from_real_symmetric(n: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: rows.len(),
            });
        }
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(rows[i * n + j], 0.0));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Eigenvalues (ascending), orthonormal eigenvectors, and the partition of
    /// eigenvalue indices into degeneracy groups.
    ///
    /// Deterministic for a fixed input: eigenpairs are sorted by eigenvalue
    /// and each eigenvector is rephased so its largest-magnitude component is
    /// real and positive.
    pub fn eigendecompose(&self, degeneracy_tol: f64) -> EigenDecomposition {
        let n = self.dim();
        let se = self.entries.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            se.eigenvalues[a]
                .partial_cmp(&se.eigenvalues[b])
                .expect("eigenvalues of a Hermitian matrix are finite")
        });
        let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            let mut v: DVector<C64> = se.eigenvectors.column(k).into_owned();
            // Phase convention: largest-magnitude component made real-positive.
            let mut imax = 0;
            let mut amax = 0.0f64;
            for (i, z) in v.iter().enumerate() {
                let a = z.norm();
                if a > amax {
                    amax = a;
                    imax = i;
                }
            }
            if amax > 0.0 {
                let phase = v[imax].conj() / C64::new(amax, 0.0);
                v *= phase;
            }
            vectors.set_column(col, &v);
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            match groups.last_mut() {
                Some(g) if values[i] - values[*g.last().unwrap()] <= degeneracy_tol => {
                    g.push(i);
                }
                _ => groups.push(vec![i]),
            }
        }
        EigenDecomposition {
            values,
            vectors,
            groups,
        }
    }
}

/// Result of diagonalizing a [`HermitianOperator`].
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered to match `values`.
    pub vectors: DMatrix<C64>,
    /// Partition of eigenvalue indices into groups of mutually degenerate
    /// eigenvalues under the requested tolerance.
    pub groups: Vec<Vec<usize>>,
}

impl EigenDecomposition {
    /// Group index of each eigenvalue, flattened for lookup.
    pub fn group_of(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.values.len()];
        for (g, members) in self.groups.iter().enumerate() {
            for &i in members {
                out[i] = g;
            }
        }
        out
    }
}

/// An idempotent Hermitian operator; stored together with its defining state
/// vector when it is rank one.
#[derive(Clone, Debug)]
pub struct Projector {
    entries: DMatrix<C64>,
    vector: Option<DVector<C64>>,
}

impl Projector {
    /// Rank-1 projector `|ψ⟩⟨ψ|` from the (not necessarily normalized)
    /// amplitudes of `ψ`. Rejects a zero-norm input.
    pub fn from_state_vector(amplitudes: &DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNormVector);
        }
        let v = amplitudes / C64::new(norm, 0.0);
        let n = v.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        Ok(Self {
            entries: m,
            vector: Some(v),
        })
    }

    /// Population projector `|k⟩⟨k|` on an `n`-level system.
    pub fn basis_state(n: usize, k: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[k] = C64::new(1.0, 0.0);
        Self::from_state_vector(&v).expect("basis vector has unit norm")
    }

    /// General idempotent Hermitian matrix (rank unrestricted). Validates
    /// `‖P² − P‖_max ≤` [`IDEMPOTENCY_TOL`].
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        let dev = max_abs_dev_from_hermitian(&entries);
        if dev > HERMITICITY_TOL {
            return Err(Error::NotHermitian { max_dev: dev });
        }
        let sq = &entries * &entries;
        let idem_dev = (&sq - &entries)
            .iter()
            .fold(0.0f64, |acc, z| acc.max(z.norm()));
        if idem_dev > IDEMPOTENCY_TOL {
            return Err(Error::NotIdempotent { max_dev: idem_dev });
        }
        Ok(Self {
            entries,
            vector: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Defining state vector, when the projector was built rank-1.
    pub fn state_vector(&self) -> Option<&DVector<C64>> {
        self.vector.as_ref()
    }

    /// View as a Hermitian observable (eigenvalues 0 and 1).
    pub fn as_operator(&self) -> HermitianOperator {
        HermitianOperator {
            entries: self.entries.clone(),
        }
    }
}

/// Hermitian, unit-trace, positive state of an `n`-level system, expressed in
/// the energy eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validate all state invariants (Hermiticity, unit trace, positivity)
    /// and wrap.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let dev = max_abs_dev_from_hermitian(&entries);
        if dev > HERMITICITY_TOL {
            return Err(Error::NotHermitian { max_dev: dev });
        }
        let tr_dev = (entries.trace() - C64::new(1.0, 0.0)).norm();
        if tr_dev > TRACE_TOL {
            return Err(Error::NotUnitTrace { dev: tr_dev });
        }
        let mut entries = entries;
        rehermitize(&mut entries);
        let min_eig = entries
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if min_eig < -PSD_TOL {
            return Err(Error::NotPositive { min_eig });
        }
        Ok(Self { entries })
    }

    /// Skip invariant validation; for internal paths that preserve the
    /// invariants by construction.
    pub(crate) fn from_matrix_unchecked(mut entries: DMatrix<C64>) -> Self {
        rehermitize(&mut entries);
        Self { entries }
    }

    /// Pure basis state `|k⟩⟨k|`.
    pub fn pure_state(n: usize, k: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(k, k)] = C64::new(1.0, 0.0);
        Self { entries: m }
    }

    /// Pure state `|ψ⟩⟨ψ|` from normalized amplitudes.
    pub fn from_state_vector(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { norm });
        }
        let n = psi.len();
        let m = DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj());
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Maximally mixed state `I/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        let p = C64::new(1.0 / n as f64, 0.0);
        for i in 0..n {
            m[(i, i)] = p;
        }
        Self { entries: m }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Population of basis state `k`, `Re ρ_kk`.
    pub fn population(&self, k: usize) -> f64 {
        self.entries[(k, k)].re
    }

    /// All diagonal populations.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.population(k)).collect()
    }

    /// Purity `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum()
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim() != other {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other,
            });
        }
        Ok(())
    }

    /// Instantaneous observation of the projector `P`:
    /// `ρ → PρP + (1−P)ρ(1−P)`, the state change ("kick") being
    /// `−[P,[P,ρ]]`. Trace, Hermiticity, and the diagonal of ρ in the
    /// eigenbasis of `P` are preserved.
    pub fn measure_projector(&self, p: &Projector) -> Result<DensityMatrix> {
        self.check_dim(p.dim())?;
        let pm = p.matrix();
        let prp = pm * &self.entries * pm;
        // (1−P)ρ(1−P) = ρ − Pρ − ρP + PρP
        let out = &self.entries - pm * &self.entries - &self.entries * pm + &prp + prp.clone();
        Ok(Self::from_matrix_unchecked(out))
    }

    /// Instantaneous observation of the Hermitian quantity `A`: coherences
    /// between eigenvectors of `A` in different degeneracy groups are set to
    /// zero, coherences within a group and all eigenvector populations are
    /// kept.
    pub fn measure_observable(
        &self,
        a: &HermitianOperator,
        degeneracy_tol: f64,
    ) -> Result<DensityMatrix> {
        self.check_dim(a.dim())?;
        let eig = a.eigendecompose(degeneracy_tol);
        self.measure_in_eigenbasis(&eig)
    }

    /// Same as [`measure_observable`](Self::measure_observable), reusing a
    /// precomputed decomposition.
    pub fn measure_in_eigenbasis(&self, eig: &EigenDecomposition) -> Result<DensityMatrix> {
        self.check_dim(eig.values.len())?;
        let v = &eig.vectors;
        let mut w = v.adjoint() * &self.entries * v;
        let group = eig.group_of();
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                if group[i] != group[j] {
                    w[(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
        let out = v * w * v.adjoint();
        Ok(Self::from_matrix_unchecked(out))
    }

    /// Expectation value `Re Tr(ρA)`.
    pub fn expectation(&self, a: &HermitianOperator) -> Result<f64> {
        self.check_dim(a.dim())?;
        Ok(trace_product_re(&self.entries, a.matrix()))
    }

    /// Expectation value `Tr(ρP)` of a projector, e.g. a target-state yield.
    pub fn expectation_projector(&self, p: &Projector) -> Result<f64> {
        self.check_dim(p.dim())?;
        Ok(trace_product_re(&self.entries, p.matrix()))
    }

    /// Smallest eigenvalue; diagnostic for the positivity invariant.
    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// `‖ρ − ρ†‖_max`; diagnostic for the Hermiticity invariant.
    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs_dev_from_hermitian(&self.entries)
    }

    /// `Tr ρ` (the imaginary part is a numerical residual).
    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }
}

/// `Re Tr(AB)` without forming the product matrix.
pub(crate) fn trace_product_re(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            let z = a[(i, k)] * b[(k, i)];
            acc += z.re;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn projector_on_own_eigenstate_is_identity_map() {
        let rho = DensityMatrix::pure_state(5, 0);
        let p = Projector::basis_state(5, 0);
        let out = rho.measure_projector(&p).unwrap();
        let dev = (out.matrix() - rho.matrix())
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(dev <= 1e-12, "dev = {dev}");
    }

    #[test]
    fn superposition_projector_kick_splits_population() {
        // ρ = |0⟩⟨0| (dim 5), P = |ψ⟩⟨ψ| with ψ = (|0⟩+|4⟩)/√2:
        // the two coherence contributions cancel, leaving diag(1/2,0,0,0,1/2).
        let rho = DensityMatrix::pure_state(5, 0);
        let mut v = DVector::zeros(5);
        v[0] = c(1.0, 0.0);
        v[4] = c(1.0, 0.0);
        let p = Projector::from_state_vector(&v).unwrap();
        let out = rho.measure_projector(&p).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if (i, j) == (0, 0) || (i, j) == (4, 4) {
                    0.5
                } else {
                    0.0
                };
                assert!(
                    (out.matrix()[(i, j)] - c(expect, 0.0)).norm() <= 1e-12,
                    "entry ({i},{j}) = {}",
                    out.matrix()[(i, j)]
                );
            }
        }
    }

    #[test]
    fn measurement_map_is_idempotent() {
        let mut v = DVector::zeros(5);
        v[0] = c(0.3, 0.1);
        v[2] = c(-0.5, 0.4);
        v[4] = c(0.2, -0.6);
        let p = Projector::from_state_vector(&v).unwrap();
        let rho = DensityMatrix::maximally_mixed(5);
        // start from something with coherences
        let mut m = rho.matrix().clone();
        m[(0, 4)] = c(0.05, 0.02);
        m[(4, 0)] = c(0.05, -0.02);
        let rho = DensityMatrix::new(m).unwrap();
        let once = rho.measure_projector(&p).unwrap();
        let twice = once.measure_projector(&p).unwrap();
        let dev = (once.matrix() - twice.matrix())
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(dev <= 1e-12, "dev = {dev}");
    }

    #[test]
    fn identity_observable_leaves_state_unchanged() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = c(0.5, 0.0);
        m[(1, 1)] = c(0.3, 0.0);
        m[(2, 2)] = c(0.2, 0.0);
        m[(0, 1)] = c(0.1, 0.05);
        m[(1, 0)] = c(0.1, -0.05);
        let rho = DensityMatrix::new(m).unwrap();
        let eye = HermitianOperator::from_diagonal(&[1.0, 1.0, 1.0]);
        let out = rho
            .measure_observable(&eye, DEFAULT_DEGENERACY_TOL)
            .unwrap();
        let dev = (out.matrix() - rho.matrix())
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(dev <= 1e-10, "dev = {dev}");
    }

    #[test]
    fn nondegenerate_diagonal_observable_fully_dephases() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = c(0.5, 0.0);
        m[(1, 1)] = c(0.3, 0.0);
        m[(2, 2)] = c(0.2, 0.0);
        m[(0, 2)] = c(0.12, -0.07);
        m[(2, 0)] = c(0.12, 0.07);
        let rho = DensityMatrix::new(m).unwrap();
        let h0 = HermitianOperator::from_diagonal(&[1.0, 2.0, 3.0]);
        let out = rho.measure_observable(&h0, DEFAULT_DEGENERACY_TOL).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(out.matrix()[(i, j)].norm() <= 1e-12);
                } else {
                    assert!((out.matrix()[(i, j)] - rho.matrix()[(i, j)]).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn eigendecompose_sorted_diagonal() {
        let a = HermitianOperator::from_diagonal(&[3.0, 1.0, 2.0]);
        let eig = a.eigendecompose(DEFAULT_DEGENERACY_TOL);
        assert_eq!(eig.values.len(), 3);
        assert!((eig.values[0] - 1.0).abs() <= 1e-12);
        assert!((eig.values[1] - 2.0).abs() <= 1e-12);
        assert!((eig.values[2] - 3.0).abs() <= 1e-12);
        assert_eq!(eig.groups.len(), 3);
        // columns are the permuted identity with positive phase
        assert!((eig.vectors[(1, 0)] - c(1.0, 0.0)).norm() <= 1e-12);
        assert!((eig.vectors[(2, 1)] - c(1.0, 0.0)).norm() <= 1e-12);
        assert!((eig.vectors[(0, 2)] - c(1.0, 0.0)).norm() <= 1e-12);
    }

    #[test]
    fn degenerate_pair_grouped() {
        let a = HermitianOperator::from_diagonal(&[2.0, 2.0 + 1e-12, 5.0]);
        let eig = a.eigendecompose(1e-9);
        assert_eq!(eig.groups.len(), 2);
        assert_eq!(eig.groups[0].len(), 2);
    }

    #[test]
    fn eigendecomposition_reconstructs_input() {
        // small complex Hermitian matrix
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(0.5, 0.25),
                c(0.0, -0.3),
                c(0.5, -0.25),
                c(-0.7, 0.0),
                c(0.1, 0.0),
                c(0.0, 0.3),
                c(0.1, 0.0),
                c(0.4, 0.0),
            ],
        );
        let a = HermitianOperator::new(m.clone()).unwrap();
        let eig = a.eigendecompose(DEFAULT_DEGENERACY_TOL);
        let mut rec = DMatrix::<C64>::zeros(3, 3);
        for k in 0..3 {
            let v = eig.vectors.column(k);
            for i in 0..3 {
                for j in 0..3 {
                    rec[(i, j)] += C64::new(eig.values[k], 0.0) * v[i] * v[j].conj();
                }
            }
        }
        let dev = (&rec - &m).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(dev <= 1e-10, "reconstruction dev = {dev}");
        // orthonormality
        let g = eig.vectors.adjoint() * &eig.vectors;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - c(expect, 0.0)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn expectation_of_projector_on_pure_state() {
        let rho = DensityMatrix::pure_state(4, 0);
        let p = Projector::basis_state(4, 0);
        assert!((rho.expectation_projector(&p).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn expectation_of_maximally_mixed_is_trace_over_n() {
        let rho = DensityMatrix::maximally_mixed(5);
        let a = HermitianOperator::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((rho.expectation(&a).unwrap() - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let rho = DensityMatrix::pure_state(3, 0);
        let p = Projector::basis_state(4, 0);
        assert!(matches!(
            rho.measure_projector(&p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_idempotent_matrix_rejected() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.5, 0.0);
        m[(1, 1)] = c(0.5, 0.0);
        assert!(matches!(
            Projector::from_matrix(m),
            Err(Error::NotIdempotent { .. })
        ));
    }

    #[test]
    fn zero_vector_rejected() {
        let v = DVector::<C64>::zeros(5);
        assert!(matches!(
            Projector::from_state_vector(&v),
            Err(Error::ZeroNormVector)
        ));
    }
}
