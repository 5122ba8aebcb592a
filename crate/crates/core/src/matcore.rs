//! Dense symmetric linear-algebra substrate.
//!
//! Everything downstream manipulates real symmetric matrices. This module
//! provides eigendecompositions with a deterministic sign convention,
//! orthonormal range bases, numerical rank with a relative cutoff, orthogonal
//! projectors, the isometric symmetric vectorization `svec`/`smat`, and
//! rank-revealing column selection. All tolerances are explicit.

use std::f64::consts::SQRT_2;
use std::fmt;

use nalgebra::{DMatrix, DVector};

/// Relative asymmetry allowed before construction rejects the input.
/// File-loaded matrices carry rounding noise, so small asymmetry is repaired
/// by symmetrization rather than rejected.
const ASYM_REL_TOL: f64 = 1e-6;

/// Deviation of `QᵗQ` from the identity accepted by [`orth_projector`].
const ORTHO_TOL: f64 = 1e-8;

/// Errors raised by the linear-algebra substrate.
#[derive(Debug, Clone, PartialEq)]
pub enum MatError {
    /// Input contains NaN or infinite entries.
    NonFinite,
    /// Input matrix is not square.
    NotSquare { rows: usize, cols: usize },
    /// `‖X − Xᵗ‖_max` exceeds the asymmetry tolerance.
    AsymmetricInput { max_deviation: f64 },
    /// An eigenvalue falls below `−psd_tol·λ_max`.
    NotPsd { min_eigenvalue: f64 },
    /// `QᵗQ` deviates from the identity beyond tolerance.
    NotOrthonormal { max_deviation: f64 },
    /// An operation received an empty input list.
    EmptyInput,
    /// Vector or matrix dimensions do not match.
    DimensionMismatch { expected: usize, actual: usize },
    /// A tolerance field is outside the open interval (0, 1).
    BadTolerance(&'static str),
}

impl fmt::Display for MatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonFinite => write!(f, "matrix contains NaN or infinite entries"),
            Self::NotSquare { rows, cols } => {
                write!(f, "expected a square matrix, got {rows}x{cols}")
            }
            Self::AsymmetricInput { max_deviation } => {
                write!(f, "matrix is asymmetric beyond tolerance (max dev {max_deviation:.3e})")
            }
            Self::NotPsd { min_eigenvalue } => {
                write!(f, "matrix is not positive semidefinite (min eig {min_eigenvalue:.3e})")
            }
            Self::NotOrthonormal { max_deviation } => {
                write!(f, "columns are not orthonormal (max dev {max_deviation:.3e})")
            }
            Self::EmptyInput => write!(f, "input list is empty"),
            Self::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            Self::BadTolerance(name) => {
                write!(f, "tolerance `{name}` must lie strictly inside (0, 1)")
            }
        }
    }
}

impl std::error::Error for MatError {}

/// Numerical tolerances shared across the decomposition pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative eigenvalue cutoff for rank decisions.
    pub rank_rel_tol: f64,
    /// Allowed negative-eigenvalue magnitude relative to the largest eigenvalue.
    pub psd_tol: f64,
    /// Max deviation of a rank-one factor entry from ±1 before rounding fails.
    pub round_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rank_rel_tol: 1e-8, psd_tol: 1e-8, round_tol: 1e-4 }
    }
}

impl Tolerances {
    /// Builds a tolerance set, rejecting values outside (0, 1).
    pub fn new(rank_rel_tol: f64, psd_tol: f64, round_tol: f64) -> Result<Self, MatError> {
        let t = Self { rank_rel_tol, psd_tol, round_tol };
        t.validate()?;
        Ok(t)
    }

    /// Checks that every field lies strictly inside (0, 1).
    pub fn validate(&self) -> Result<(), MatError> {
        for (value, name) in [
            (self.rank_rel_tol, "rank_rel_tol"),
            (self.psd_tol, "psd_tol"),
            (self.round_tol, "round_tol"),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(MatError::BadTolerance(name));
            }
        }
        Ok(())
    }
}

/// A dense real symmetric matrix. Storage is exactly symmetric: construction
/// symmetrizes via `(X + Xᵗ)/2` after checking the asymmetry tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    /// Wraps a square matrix, symmetrizing it. Rejects inputs whose asymmetry
    /// `‖X − Xᵗ‖_max` exceeds `1e−6·‖X‖_max`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, MatError> {
        if m.nrows() != m.ncols() {
            return Err(MatError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let n = m.nrows();
        let mut max_abs: f64 = 0.0;
        let mut max_dev: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                max_abs = max_abs.max(m[(i, j)].abs()).max(m[(j, i)].abs());
                max_dev = max_dev.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if max_dev > ASYM_REL_TOL * max_abs.max(f64::MIN_POSITIVE) && max_dev.is_finite() {
            return Err(MatError::AsymmetricInput { max_deviation: max_dev });
        }
        let mut data = m;
        for j in 0..n {
            for i in 0..j {
                let avg = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = avg;
                data[(j, i)] = avg;
            }
        }
        Ok(Self { data })
    }

    /// Builds a symmetric matrix from a function of the index pair (i ≤ j).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Self { data }
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { data: DMatrix::identity(n, n) }
    }

    /// Rank-one matrix `v vᵗ`.
    pub fn outer(v: &DVector<f64>) -> Self {
        Self { data: v * v.transpose() }
    }

    /// Linear combination `ca·A + cb·B` of two symmetric matrices.
    pub fn combine(ca: f64, a: &SymMatrix, cb: f64, b: &SymMatrix) -> Self {
        Self { data: ca * &a.data + cb * &b.data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.data.diagonal()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Frobenius inner product `trace(AB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.data.iter().zip(other.data.iter()).map(|(a, b)| a * b).sum()
    }

    /// Wraps a matrix that is symmetric by construction, skipping the
    /// asymmetry check but still averaging the two triangles.
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        debug_assert_eq!(n, m.ncols());
        let mut data = m;
        for j in 0..n {
            for i in 0..j {
                let avg = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = avg;
                data[(j, i)] = avg;
            }
        }
        Self { data }
    }
}

/// Eigendecomposition of a symmetric matrix. Eigenvalues are sorted in
/// descending order; eigenvector columns are orthonormal and carry a fixed
/// sign convention (the entry of largest magnitude is nonnegative, ties
/// resolved toward the lowest index).
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigDecomposition {
    /// Reconstructs `V diag(λ) Vᵗ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&self.eigenvalues);
        &self.eigenvectors * lam * self.eigenvectors.transpose()
    }
}

/// Symmetric eigendecomposition, deterministic for a fixed input.
pub fn sym_eig(x: &SymMatrix) -> Result<EigDecomposition, MatError> {
    if !x.is_finite() {
        return Err(MatError::NonFinite);
    }
    let n = x.dim();
    let se = x.data.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut eigenvalues = DVector::zeros(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = se.eigenvalues[src];
        let mut col = se.eigenvectors.column(src).clone_owned();
        // Sign convention: entry of largest magnitude made nonnegative.
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(EigDecomposition { eigenvalues, eigenvectors })
}

/// Number of eigenvalues exceeding `rank_rel_tol` times the largest magnitude.
/// Returns 0 for the zero matrix.
pub fn numerical_rank(x: &SymMatrix, tol: &Tolerances) -> Result<usize, MatError> {
    let eig = sym_eig(x)?;
    Ok(rank_from_eigenvalues(&eig.eigenvalues, tol.rank_rel_tol))
}

pub(crate) fn rank_from_eigenvalues(eigenvalues: &DVector<f64>, rel_tol: f64) -> usize {
    let max_abs = eigenvalues.iter().fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    eigenvalues.iter().filter(|&&l| l.abs() > rel_tol * max_abs).count()
}

/// Orthonormal basis for the range of a PSD matrix: the eigenvectors of the
/// retained eigenvalues, as an n×r matrix.
pub fn orth_basis(x: &SymMatrix, tol: &Tolerances) -> Result<DMatrix<f64>, MatError> {
    let eig = sym_eig(x)?;
    let max_abs = eig.eigenvalues.iter().fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    let min = eig.eigenvalues.min();
    if min < -tol.psd_tol * max_abs {
        return Err(MatError::NotPsd { min_eigenvalue: min });
    }
    let r = rank_from_eigenvalues(&eig.eigenvalues, tol.rank_rel_tol);
    Ok(eig.eigenvectors.columns(0, r).clone_owned())
}

/// Orthogonal projector `QQᵗ` onto the column span of an orthonormal matrix.
pub fn orth_projector(q: &DMatrix<f64>) -> Result<SymMatrix, MatError> {
    if q.iter().any(|x| !x.is_finite()) {
        return Err(MatError::NonFinite);
    }
    let gram = q.transpose() * q;
    let r = gram.nrows();
    let mut max_dev: f64 = 0.0;
    for j in 0..r {
        for i in 0..r {
            let target = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((gram[(i, j)] - target).abs());
        }
    }
    if max_dev > ORTHO_TOL {
        return Err(MatError::NotOrthonormal { max_deviation: max_dev });
    }
    Ok(SymMatrix::from_symmetric_unchecked(q * q.transpose()))
}

/// Isometric symmetric vectorization: off-diagonal entries are scaled by √2
/// so that `⟨svec(X), svec(Y)⟩ = trace(XY)`. Entries are ordered by upper
/// triangle, column-major: (0,0), (0,1), (1,1), (0,2), ...
pub fn svec(x: &SymMatrix) -> DVector<f64> {
    let n = x.dim();
    let mut v = DVector::zeros(n * (n + 1) / 2);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            v[k] = if i == j { x.entry(i, j) } else { SQRT_2 * x.entry(i, j) };
            k += 1;
        }
    }
    v
}

/// Inverse of [`svec`].
pub fn smat(v: &DVector<f64>) -> Result<SymMatrix, MatError> {
    let len = v.len();
    // Solve n(n+1)/2 = len in integers.
    let n = ((((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1)) / 2;
    let n = [n.saturating_sub(1), n, n + 1]
        .into_iter()
        .find(|&m| m * (m + 1) / 2 == len)
        .ok_or(MatError::DimensionMismatch { expected: 0, actual: len })?;
    let mut x = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            let val = if i == j { v[k] } else { v[k] / SQRT_2 };
            x[(i, j)] = val;
            x[(j, i)] = val;
            k += 1;
        }
    }
    Ok(SymMatrix { data: x })
}

/// Greedy rank-revealing column selection over a list of vectors.
///
/// Pivots on the largest residual norm (ties to the lowest index) and stops
/// once the residual falls to `rank_rel_tol` times the largest input norm.
/// The returned index set is sorted ascending; its size equals the numerical
/// rank of the stacked matrix.
pub fn rrqr_select(vectors: &[DVector<f64>], tol: &Tolerances) -> Result<Vec<usize>, MatError> {
    if vectors.is_empty() {
        return Err(MatError::EmptyInput);
    }
    let d = vectors[0].len();
    for v in vectors {
        if v.len() != d {
            return Err(MatError::DimensionMismatch { expected: d, actual: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(MatError::NonFinite);
        }
    }
    let mut residuals: Vec<DVector<f64>> = vectors.to_vec();
    let mut selected = vec![false; vectors.len()];
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let max_norm = residuals.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
    let threshold = tol.rank_rel_tol * max_norm;
    let mut chosen = Vec::new();
    loop {
        let mut pivot = None;
        let mut best = threshold;
        for (i, r) in residuals.iter().enumerate() {
            if !selected[i] {
                let norm = r.norm();
                if norm > best {
                    best = norm;
                    pivot = Some(i);
                }
            }
        }
        let Some(p) = pivot else { break };
        selected[p] = true;
        chosen.push(p);
        // Re-orthogonalize the winner once against the current basis before
        // normalizing; guards against drift in long selections.
        let mut q = residuals[p].clone();
        for b in &basis {
            let coef = b.dot(&q);
            q.axpy(-coef, b, 1.0);
        }
        q /= q.norm();
        for (i, r) in residuals.iter_mut().enumerate() {
            if !selected[i] {
                let coef = q.dot(r);
                r.axpy(-coef, &q, 1.0);
            }
        }
        basis.push(q);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn sym(entries: &[&[f64]]) -> SymMatrix {
        let n = entries.len();
        SymMatrix::from_fn(n, |i, j| entries[i][j])
    }

    #[test]
    fn eig_identity() {
        let eig = sym_eig(&SymMatrix::identity(3)).unwrap();
        for i in 0..3 {
            assert!((eig.eigenvalues[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_diagonal() {
        let x = sym(&[&[2.0, 0.0], &[0.0, -1.0]]);
        let eig = sym_eig(&x).unwrap();
        assert!((eig.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] + 1.0).abs() < 1e-12);
        // Eigenvectors are the standard basis, sign convention positive.
        assert!((eig.eigenvectors[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((eig.eigenvectors[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_rank_one_sign_outer() {
        // ssᵗ·s = (sᵗs)s = 3s, so s/√3 is the top eigenvector with eigenvalue 3.
        let s = DVector::from_vec(vec![1.0, -1.0, 1.0]);
        let x = SymMatrix::outer(&s);
        let eig = sym_eig(&x).unwrap();
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-10);
        assert!(eig.eigenvalues[1].abs() < 1e-10);
        assert!(eig.eigenvalues[2].abs() < 1e-10);
        let v = eig.eigenvectors.column(0);
        let expected = &s / 3.0_f64.sqrt();
        for i in 0..3 {
            assert!((v[i] - expected[i]).abs() < 1e-10, "entry {i}");
        }
    }

    #[test]
    fn eig_rejects_non_finite() {
        let x = sym(&[&[f64::NAN, 0.0], &[0.0, 1.0]]);
        assert!(matches!(sym_eig(&x), Err(MatError::NonFinite)));
    }

    #[test]
    fn eig_reconstruction_bound() {
        let x = sym(&[
            &[1.0, 0.3, -0.2, 0.5],
            &[0.3, 2.0, 0.1, -0.4],
            &[-0.2, 0.1, 0.7, 0.0],
            &[0.5, -0.4, 0.0, 1.5],
        ]);
        let eig = sym_eig(&x).unwrap();
        let err = (eig.reconstruct() - x.as_matrix()).norm();
        assert!(err <= 1e-8 * x.fro_norm().max(1.0));
        let vtv_dev = (eig.eigenvectors.transpose() * &eig.eigenvectors
            - DMatrix::identity(4, 4))
        .amax();
        assert!(vtv_dev <= 1e-10);
    }

    #[test]
    fn construction_rejects_asymmetry() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 0.5;
        assert!(matches!(
            SymMatrix::from_matrix(m),
            Err(MatError::AsymmetricInput { .. })
        ));
    }

    #[test]
    fn construction_symmetrizes_rounding_noise() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 0.5;
        m[(1, 0)] = 0.5 + 1e-9;
        let x = SymMatrix::from_matrix(m).unwrap();
        assert_eq!(x.entry(0, 1), x.entry(1, 0));
    }

    #[test]
    fn rank_zero_matrix() {
        assert_eq!(numerical_rank(&SymMatrix::zeros(4), &tol()).unwrap(), 0);
    }

    #[test]
    fn rank_one_sign_outer() {
        let s = DVector::from_vec(vec![1.0, -1.0, 1.0, 1.0, -1.0]);
        assert_eq!(numerical_rank(&SymMatrix::outer(&s), &tol()).unwrap(), 1);
    }

    #[test]
    fn rank_two_mixture() {
        // s₁, s₂ linearly independent: Gram [[4,0],[0,4]] has determinant 16 ≠ 0.
        let s1 = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
        let s2 = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let x = SymMatrix::combine(0.5, &SymMatrix::outer(&s1), 0.5, &SymMatrix::outer(&s2));
        assert_eq!(numerical_rank(&x, &tol()).unwrap(), 2);
    }

    #[test]
    fn orth_basis_rank_one() {
        let s = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let q = orth_basis(&SymMatrix::outer(&s), &tol()).unwrap();
        assert_eq!(q.ncols(), 1);
        let expected = &s / 2.0;
        let matches_plus = (0..4).all(|i| (q[(i, 0)] - expected[i]).abs() < 1e-10);
        let matches_minus = (0..4).all(|i| (q[(i, 0)] + expected[i]).abs() < 1e-10);
        assert!(matches_plus || matches_minus);
    }

    #[test]
    fn orth_basis_identity_contract() {
        let q = orth_basis(&SymMatrix::identity(3), &tol()).unwrap();
        assert_eq!(q.ncols(), 3);
        let dev = (q.transpose() * &q - DMatrix::identity(3, 3)).amax();
        assert!(dev <= 1e-10);
        let proj = (&q * q.transpose() - DMatrix::identity(3, 3)).amax();
        assert!(proj <= 1e-10);
    }

    #[test]
    fn orth_basis_projection_identity() {
        let s1 = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
        let s2 = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let x = SymMatrix::combine(0.5, &SymMatrix::outer(&s1), 0.5, &SymMatrix::outer(&s2));
        let q = orth_basis(&x, &tol()).unwrap();
        assert_eq!(q.ncols(), 2);
        let p = &q * q.transpose();
        for s in [&s1, &s2] {
            let err = (&p * s - s).norm();
            assert!(err <= 1e-8, "projection should fix span members");
        }
    }

    #[test]
    fn orth_basis_rejects_indefinite() {
        let x = sym(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(matches!(orth_basis(&x, &tol()), Err(MatError::NotPsd { .. })));
    }

    #[test]
    fn projector_standard_basis() {
        let q = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let p = orth_projector(&q).unwrap();
        assert_eq!(p.entry(0, 0), 1.0);
        assert_eq!(p.entry(1, 1), 0.0);
        assert_eq!(p.entry(0, 1), 0.0);
    }

    #[test]
    fn projector_identity() {
        let p = orth_projector(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(p.as_matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn projector_ones_direction() {
        let c = 1.0 / 3.0_f64.sqrt();
        let q = DMatrix::from_column_slice(3, 1, &[c, c, c]);
        let p = orth_projector(&q).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((p.entry(i, j) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        // P² = P.
        let p2 = p.as_matrix() * p.as_matrix();
        assert!((p2 - p.as_matrix()).amax() < 1e-8);
    }

    #[test]
    fn projector_rejects_skewed_columns() {
        let q = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(orth_projector(&q), Err(MatError::NotOrthonormal { .. })));
    }

    #[test]
    fn svec_ordering_and_isometry() {
        let x = sym(&[&[3.0, 0.0], &[0.0, 7.0]]);
        let v = svec(&x);
        assert_eq!(v.as_slice(), &[3.0, 0.0, 7.0]);

        let id = SymMatrix::identity(2);
        let vi = svec(&id);
        assert!((vi.dot(&vi) - 2.0).abs() < 1e-15);

        // X = [[0,1],[1,0]]: X² = I so trace(X²) = 2.
        let x = sym(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let vx = svec(&x);
        assert!((vx.dot(&vx) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn smat_inverts_svec() {
        let x = sym(&[&[1.0, 0.25, -2.0], &[0.25, 4.0, 0.5], &[-2.0, 0.5, 8.0]]);
        let back = smat(&svec(&x)).unwrap();
        // Entries here scale by powers of two under √2, so the round trip is exact.
        assert_eq!(back.as_matrix(), x.as_matrix());
    }

    #[test]
    fn smat_rejects_bad_length() {
        let v = DVector::from_vec(vec![1.0, 2.0]);
        assert!(smat(&v).is_err());
    }

    #[test]
    fn rrqr_duplicate_removal() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        let j = rrqr_select(&[e1.clone(), e1.clone(), e2.clone()], &tol()).unwrap();
        assert_eq!(j, vec![0, 2]);
    }

    #[test]
    fn rrqr_dependent_triple() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        let sum = &e1 + &e2;
        let j = rrqr_select(&[e1, e2, sum], &tol()).unwrap();
        assert_eq!(j.len(), 2);
    }

    #[test]
    fn rrqr_empty_input() {
        assert_eq!(rrqr_select(&[], &tol()), Err(MatError::EmptyInput));
    }

    #[test]
    fn tolerances_validate() {
        assert!(Tolerances::new(1e-8, 1e-8, 1e-4).is_ok());
        assert!(Tolerances::new(0.0, 1e-8, 1e-4).is_err());
        assert!(Tolerances::new(1e-8, 1.0, 1e-4).is_err());
    }
}
