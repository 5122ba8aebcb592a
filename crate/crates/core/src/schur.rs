//! Schur-independence certification and random instance generation.
//!
//! A family of sign vectors is Schur independent when `{e}` together with all
//! pairwise Schur (entrywise) products is linearly independent. That regularity
//! condition is what makes the decompositions in [`crate::scd`] and
//! [`crate::bcd`] unique and tractable, so this module is the gatekeeper: it
//! certifies families, enforces the cardinality bound, and produces random
//! certified instances for fixtures and simulations.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matcore::{rank_from_eigenvalues, SymMatrix, Tolerances};

/// Rejection-sampling cap for the certified generators. Failure beyond this
/// many rounds signals that `n` is too small relative to `r`.
const MAX_REJECTIONS: usize = 1000;

/// Errors raised by family generation.
#[derive(Debug, Clone, PartialEq)]
pub enum SchurError {
    /// Requested more components than the capacity bound allows.
    RankTooLarge { requested: usize, capacity: usize },
    /// Rejection sampling failed to find a certified family.
    GenerationFailed { rounds: usize },
    /// Invalid matrix entries (not ±1 or not 0/1).
    InvalidEntries,
    /// Empty family or zero ambient dimension.
    EmptyFamily,
}

impl fmt::Display for SchurError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RankTooLarge { requested, capacity } => {
                write!(f, "requested {requested} components but capacity is {capacity}")
            }
            Self::GenerationFailed { rounds } => {
                write!(f, "no Schur-independent family found after {rounds} rejection rounds")
            }
            Self::InvalidEntries => write!(f, "matrix entries must be exactly ±1 (or 0/1)"),
            Self::EmptyFamily => write!(f, "family must have at least one column in dimension ≥ 1"),
        }
    }
}

impl std::error::Error for SchurError {}

/// An n×r matrix with entries in {+1, −1}; columns are sign components.
#[derive(Debug, Clone, PartialEq)]
pub struct SignMatrix {
    data: DMatrix<f64>,
}

impl SignMatrix {
    /// Validates that every entry is exactly ±1.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self, SchurError> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(SchurError::EmptyFamily);
        }
        if data.iter().any(|&x| x != 1.0 && x != -1.0) {
            return Err(SchurError::InvalidEntries);
        }
        Ok(Self { data })
    }

    pub fn from_columns(cols: &[DVector<f64>]) -> Result<Self, SchurError> {
        if cols.is_empty() {
            return Err(SchurError::EmptyFamily);
        }
        let n = cols[0].len();
        let mut data = DMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            if c.len() != n {
                return Err(SchurError::InvalidEntries);
            }
            data.set_column(j, c);
        }
        Self::from_matrix(data)
    }

    /// Ambient dimension n.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of components r.
    pub fn r(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.data.column(j).clone_owned()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Keeps only the listed columns.
    pub fn select_columns(&self, idx: &[usize]) -> Result<Self, SchurError> {
        let cols: Vec<DVector<f64>> = idx.iter().map(|&j| self.column(j)).collect();
        Self::from_columns(&cols)
    }
}

/// An n×r matrix with entries in {0, 1}; columns are binary components.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMatrix {
    data: DMatrix<f64>,
}

impl BinaryMatrix {
    /// Validates that every entry is exactly 0 or 1.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self, SchurError> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(SchurError::EmptyFamily);
        }
        if data.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(SchurError::InvalidEntries);
        }
        Ok(Self { data })
    }

    pub fn from_columns(cols: &[DVector<f64>]) -> Result<Self, SchurError> {
        if cols.is_empty() {
            return Err(SchurError::EmptyFamily);
        }
        let n = cols[0].len();
        let mut data = DMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            if c.len() != n {
                return Err(SchurError::InvalidEntries);
            }
            data.set_column(j, c);
        }
        Self::from_matrix(data)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn r(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.data.column(j).clone_owned()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Lifts every column through `F(z) = 2z − e`.
    pub fn to_sign_matrix(&self) -> SignMatrix {
        let data = self.data.map(|z| 2.0 * z - 1.0);
        SignMatrix { data }
    }
}

/// Deterministic random stream. The generator is pinned to ChaCha8 seeded via
/// `seed_from_u64`, so identical seeds produce identical streams on every
/// platform.
#[derive(Debug, Clone)]
pub struct RngState {
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn from_seed(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform sign in {+1.0, −1.0}.
    pub fn sign(&mut self) -> f64 {
        if self.rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform bit in {0.0, 1.0}.
    pub fn bit(&mut self) -> f64 {
        if self.rng.random::<bool>() {
            1.0
        } else {
            0.0
        }
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(rand_distr::StandardNormal)
    }

    /// Standard normal vector of length n.
    pub fn normal_vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.normal())
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in [0, bound).
    pub fn below(&mut self, bound: usize) -> usize {
        self.rng.random_range(0..bound)
    }
}

/// Largest r such that a Schur-independent family of r sign vectors can exist
/// in dimension n, i.e. the largest r with `C(r,2) + 1 ≤ n`. Equals
/// `⌊(1 + √(8n − 7)) / 2⌋`, evaluated in exact integer arithmetic.
pub fn max_schur_rank(n: usize) -> usize {
    assert!(n >= 1, "ambient dimension must be positive");
    let d = 8 * (n as u128) - 7;
    let mut root = (d as f64).sqrt() as u128;
    while root * root > d {
        root -= 1;
    }
    while (root + 1) * (root + 1) <= d {
        root += 1;
    }
    let r = ((1 + root) / 2) as usize;
    debug_assert!(r * (r - 1) / 2 + 1 <= n && (r + 1) * r / 2 + 1 > n);
    r
}

/// The pairwise-product family `{e} ∪ {s_i ⊙ s_j : i < j}` whose linear
/// independence defines Schur independence.
fn schur_product_family(s: &SignMatrix) -> Vec<DVector<f64>> {
    let n = s.n();
    let r = s.r();
    let mut family = Vec::with_capacity(r * (r - 1) / 2 + 1);
    family.push(DVector::from_element(n, 1.0));
    for i in 0..r {
        for j in (i + 1)..r {
            let prod = s.column(i).component_mul(&s.column(j));
            family.push(prod);
        }
    }
    family
}

/// Numerical rank of a vector family via the eigenvalue count of its Gram
/// matrix. The Gram matrix of ±1-valued vectors is integer-valued and
/// well-scaled, so a relative cutoff is reliable here.
fn gram_rank(family: &[DVector<f64>], tol: &Tolerances) -> usize {
    let m = family.len();
    let gram = SymMatrix::from_fn(m, |i, j| family[i].dot(&family[j]));
    let eig = crate::matcore::sym_eig(&gram).expect("gram matrix of finite vectors");
    rank_from_eigenvalues(&eig.eigenvalues, tol.rank_rel_tol)
}

/// Achieved and required ranks for the sign-family test; the family is Schur
/// independent exactly when the two are equal.
pub fn schur_rank_signs(s: &SignMatrix, tol: &Tolerances) -> (usize, usize) {
    let required = s.r() * (s.r() - 1) / 2 + 1;
    let family = schur_product_family(s);
    (gram_rank(&family, tol), required)
}

/// True iff `{e} ∪ {s_i ⊙ s_j : i < j}` is linearly independent.
pub fn is_schur_independent_signs(s: &SignMatrix, tol: &Tolerances) -> bool {
    let (achieved, required) = schur_rank_signs(s, tol);
    achieved == required
}

/// Achieved and required ranks for the binary-family test via the augmented
/// sign family `{e, F(z_1), …, F(z_r)}`.
pub fn schur_rank_binary(z: &BinaryMatrix, tol: &Tolerances) -> (usize, usize) {
    let augmented = augmented_sign_family(z);
    schur_rank_signs(&augmented, tol)
}

/// True iff the binary family is Schur independent with `z₀ = e`.
///
/// Implemented through the equivalence with the augmented sign family
/// `{e, F(z_1), …, F(z_r)}`. Debug builds also evaluate the direct route —
/// the span of all pairwise products `z_i ⊙ z_j` over `0 ≤ i ≤ j ≤ r` — and
/// assert the two agree, which guards against index slips around `z₀ = e`.
pub fn is_schur_independent_binary(z: &BinaryMatrix, tol: &Tolerances) -> bool {
    let via_signs = {
        let augmented = augmented_sign_family(z);
        is_schur_independent_signs(&augmented, tol)
    };
    debug_assert_eq!(
        via_signs,
        binary_schur_direct(z, tol),
        "sign-lift and direct binary Schur tests disagree"
    );
    via_signs
}

/// `{e, F(z_1), …, F(z_r)}` as a sign matrix.
fn augmented_sign_family(z: &BinaryMatrix) -> SignMatrix {
    let n = z.n();
    let lifted = z.to_sign_matrix();
    let mut cols = Vec::with_capacity(z.r() + 1);
    cols.push(DVector::from_element(n, 1.0));
    for j in 0..z.r() {
        cols.push(lifted.column(j));
    }
    SignMatrix::from_columns(&cols).expect("augmented family is a valid sign matrix")
}

/// Direct route: rank of `span{z_i ⊙ z_j : 0 ≤ i ≤ j ≤ r}` with `z₀ = e`,
/// compared to the full dimension of the augmented product family.
fn binary_schur_direct(z: &BinaryMatrix, tol: &Tolerances) -> bool {
    let n = z.n();
    let r = z.r();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity((r + 1) * (r + 2) / 2);
    cols.push(DVector::from_element(n, 1.0));
    for i in 0..r {
        cols.push(z.column(i)); // z₀ ⊙ z_i = z_i, and z_i ⊙ z_i = z_i
        for j in (i + 1)..r {
            cols.push(z.column(i).component_mul(&z.column(j)));
        }
    }
    let required = (r + 1) * r / 2 + 1;
    gram_rank(&cols, tol) == required
}

/// Exact rank of an integer vector family via fraction-free (Bareiss)
/// Gaussian elimination. Slow, but exact; used as a verification path when
/// testing the floating-point Gram route.
pub fn exact_integer_rank(rows: &[Vec<i64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = rows.len();
    let n = rows[0].len();
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut rank = 0;
    let mut prev_pivot: i128 = 1;
    let mut row = 0;
    for col in 0..n {
        if row >= m {
            break;
        }
        let Some(p) = (row..m).find(|&i| a[i][col] != 0) else { continue };
        a.swap(row, p);
        let pivot = a[row][col];
        for i in (row + 1)..m {
            for j in (col + 1)..n {
                a[i][j] = (pivot * a[i][j] - a[i][col] * a[row][j]) / prev_pivot;
            }
            a[i][col] = 0;
        }
        prev_pivot = pivot;
        row += 1;
        rank += 1;
    }
    rank
}

/// Sign family with entries i.i.d. uniform on {±1}. Does not guarantee Schur
/// independence; the caller checks.
pub fn random_sign_family(
    n: usize,
    r: usize,
    rng: &mut RngState,
) -> Result<SignMatrix, SchurError> {
    if n == 0 || r == 0 {
        return Err(SchurError::EmptyFamily);
    }
    let capacity = max_schur_rank(n);
    if r > capacity {
        return Err(SchurError::RankTooLarge { requested: r, capacity });
    }
    let data = DMatrix::from_fn(n, r, |_, _| rng.sign());
    Ok(SignMatrix { data })
}

/// Rejection-samples a Schur-independent sign family with no column equal to
/// ± another column. Random families pass with overwhelming probability in
/// the valid regime, so the cap converts pathological parameters into a
/// clean error.
pub fn random_schur_independent_signs(
    n: usize,
    r: usize,
    rng: &mut RngState,
) -> Result<SignMatrix, SchurError> {
    let tol = Tolerances::default();
    for _ in 0..MAX_REJECTIONS {
        let s = random_sign_family(n, r, rng)?;
        if has_pm_duplicate_columns(s.as_matrix()) {
            continue;
        }
        if is_schur_independent_signs(&s, &tol) {
            return Ok(s);
        }
    }
    Err(SchurError::GenerationFailed { rounds: MAX_REJECTIONS })
}

/// Rejection-samples a Schur-independent binary family (entries i.i.d.
/// uniform on {0,1}), certified through [`is_schur_independent_binary`].
pub fn random_binary_family_schur_independent(
    n: usize,
    r: usize,
    rng: &mut RngState,
) -> Result<BinaryMatrix, SchurError> {
    if n == 0 || r == 0 {
        return Err(SchurError::EmptyFamily);
    }
    // The augmented family {e, F(z_1), …, F(z_r)} has r+1 members, so the
    // capacity bound applies at r+1.
    let capacity = max_schur_rank(n).saturating_sub(1);
    if r > capacity {
        return Err(SchurError::RankTooLarge { requested: r, capacity });
    }
    let tol = Tolerances::default();
    for _ in 0..MAX_REJECTIONS {
        let data = DMatrix::from_fn(n, r, |_, _| rng.bit());
        let z = BinaryMatrix { data };
        if is_schur_independent_binary(&z, &tol) {
            return Ok(z);
        }
    }
    Err(SchurError::GenerationFailed { rounds: MAX_REJECTIONS })
}

fn has_pm_duplicate_columns(data: &DMatrix<f64>) -> bool {
    for i in 0..data.ncols() {
        for j in (i + 1)..data.ncols() {
            let ci = data.column(i);
            let cj = data.column(j);
            let same = ci.iter().zip(cj.iter()).all(|(a, b)| a == b);
            let negated = ci.iter().zip(cj.iter()).all(|(a, b)| *a == -*b);
            if same || negated {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn sign_from_cols(cols: &[&[f64]]) -> SignMatrix {
        let vecs: Vec<DVector<f64>> =
            cols.iter().map(|c| DVector::from_column_slice(c)).collect();
        SignMatrix::from_columns(&vecs).unwrap()
    }

    #[test]
    fn single_column_is_independent() {
        let s = sign_from_cols(&[&[1.0, -1.0, 1.0]]);
        assert!(is_schur_independent_signs(&s, &tol()));
    }

    #[test]
    fn duplicate_columns_fail() {
        let s = sign_from_cols(&[&[1.0, -1.0, 1.0, 1.0], &[1.0, -1.0, 1.0, 1.0]]);
        assert!(!is_schur_independent_signs(&s, &tol()));
    }

    #[test]
    fn walsh_triple_is_independent() {
        // Family {e, (1,1,−1,−1), (1,−1,1,−1), (1,−1,−1,1)} stacks into a ±1
        // matrix with nonzero determinant (it is the 4×4 Walsh matrix).
        let s = sign_from_cols(&[
            &[1.0, 1.0, 1.0, 1.0],
            &[1.0, 1.0, -1.0, -1.0],
            &[1.0, -1.0, 1.0, -1.0],
        ]);
        assert!(is_schur_independent_signs(&s, &tol()));
        let (achieved, required) = schur_rank_signs(&s, &tol());
        assert_eq!((achieved, required), (4, 4));
    }

    #[test]
    fn max_schur_rank_examples() {
        assert_eq!(max_schur_rank(7), 4);
        assert_eq!(max_schur_rank(1), 1);
        // Largest r with r(r−1)/2 + 1 ≤ 11 is r = 5 (5·4/2 + 1 = 11).
        assert_eq!(max_schur_rank(11), 5);
    }

    #[test]
    fn max_schur_rank_matches_iterative_oracle() {
        for n in 1..=2000 {
            let mut r = 1;
            while (r + 1) * r / 2 + 1 <= n {
                r += 1;
            }
            assert_eq!(max_schur_rank(n), r, "n = {n}");
        }
    }

    #[test]
    fn random_family_deterministic() {
        let a = random_sign_family(8, 2, &mut RngState::from_seed(0)).unwrap();
        let b = random_sign_family(8, 2, &mut RngState::from_seed(0)).unwrap();
        assert_eq!(a.as_matrix(), b.as_matrix());
    }

    #[test]
    fn random_family_rejects_over_capacity() {
        // max_schur_rank(4) = 3 since C(4,2) + 1 = 7 > 4.
        let err = random_sign_family(4, 4, &mut RngState::from_seed(1)).unwrap_err();
        assert!(matches!(err, SchurError::RankTooLarge { capacity: 3, .. }));
    }

    #[test]
    fn certified_generator_postcondition() {
        let s = random_schur_independent_signs(16, 3, &mut RngState::from_seed(7)).unwrap();
        assert!(is_schur_independent_signs(&s, &tol()));
        assert!(!has_pm_duplicate_columns(s.as_matrix()));
    }

    #[test]
    fn boundary_case_n7_r4_succeeds_for_most_seeds() {
        let mut successes = 0;
        for seed in 0..100 {
            if random_schur_independent_signs(7, 4, &mut RngState::from_seed(seed)).is_ok() {
                successes += 1;
            }
        }
        assert!(successes > 0, "boundary case should succeed for some seeds");
    }

    #[test]
    fn tiny_dimension_fails_cleanly() {
        let err = random_schur_independent_signs(3, 3, &mut RngState::from_seed(0)).unwrap_err();
        assert!(matches!(err, SchurError::RankTooLarge { .. } | SchurError::GenerationFailed { .. }));
    }

    #[test]
    fn binary_all_ones_column_fails() {
        // z = e duplicates z₀ = e, so the span degenerates.
        let z = BinaryMatrix::from_matrix(DMatrix::from_element(4, 1, 1.0)).unwrap();
        assert!(!is_schur_independent_binary(&z, &tol()));
    }

    #[test]
    fn binary_pair_routes_agree() {
        let z = BinaryMatrix::from_columns(&[
            DVector::from_column_slice(&[1.0, 1.0, 0.0, 0.0]),
            DVector::from_column_slice(&[1.0, 0.0, 1.0, 0.0]),
        ])
        .unwrap();
        let via_signs = is_schur_independent_binary(&z, &tol());
        assert_eq!(via_signs, binary_schur_direct(&z, &tol()));
    }

    #[test]
    fn binary_generator_postcondition() {
        let z = random_binary_family_schur_independent(16, 3, &mut RngState::from_seed(3)).unwrap();
        assert!(is_schur_independent_binary(&z, &tol()));
        // The sign lift of the augmented family passes the sign test.
        let augmented = augmented_sign_family(&z);
        assert!(is_schur_independent_signs(&augmented, &tol()));
    }

    #[test]
    fn binary_generator_tiny_dimension_fails() {
        let err =
            random_binary_family_schur_independent(2, 2, &mut RngState::from_seed(0)).unwrap_err();
        assert!(matches!(err, SchurError::RankTooLarge { .. } | SchurError::GenerationFailed { .. }));
    }

    #[test]
    fn exact_rank_matches_gram_rank_on_random_families() {
        for seed in 0..30 {
            let mut rng = RngState::from_seed(seed);
            let s = random_sign_family(12, 3, &mut rng).unwrap();
            let family = schur_product_family(&s);
            let rows: Vec<Vec<i64>> = family
                .iter()
                .map(|v| v.iter().map(|&x| x as i64).collect())
                .collect();
            assert_eq!(exact_integer_rank(&rows), gram_rank(&family, &tol()), "seed {seed}");
        }
    }
}
