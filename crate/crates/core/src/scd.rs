//! Sign component decomposition.
//!
//! A rank-r correlation matrix of the form `A = Σ τᵢ sᵢsᵢᵗ` with Schur
//! independent sign components is factored back into its components by
//! repeatedly (1) exposing the simplicial face of the elliptope that contains
//! the current iterate, (2) maximizing a random linear functional over that
//! face, which lands on a rank-one vertex almost surely, (3) rounding the
//! vertex to an exact sign vector, and (4) deflating the iterate along the ray
//! through the extracted vertex. The coefficients come from one least-squares
//! solve at the end.
//!
//! Both formulations are provided: [`sign_component_decomposition`] runs the
//! semidefinite programs over n×n matrices; [`scd_compressed`] compresses
//! everything onto an orthonormal range basis and solves r×r programs with a
//! rank-revealing subset of the lifted diagonal constraints.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::matcore::{
    orth_basis, orth_projector, rrqr_select, svec, sym_eig, MatError, SymMatrix, Tolerances,
};
use crate::schur::{is_schur_independent_signs, max_schur_rank, RngState, SignMatrix};
use crate::sdpcore::{deflate_zeta, solve_sdp, SdpProblem, SdpStatus, SolverOptions};

/// Second-eigenvalue ratio above which a candidate is rejected as not rank-one.
const RANK_ONE_TOL: f64 = 1e-4;
/// Entrywise verification bound for the rounded rank-one factor.
const VERIFY_MAX_TOL: f64 = 1e-3;
/// Reconstruction residual bound, relative to the dimension.
const RESIDUAL_REL_TOL: f64 = 1e-6;

/// Pipeline stage in which a decomposition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Rank,
    Face,
    ConstraintSelection,
    Sdp,
    Extract,
    Deflate,
    Coefficients,
    Residual,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rank => "rank",
            Self::Face => "face",
            Self::ConstraintSelection => "constraint-selection",
            Self::Sdp => "sdp",
            Self::Extract => "extract",
            Self::Deflate => "deflate",
            Self::Coefficients => "coefficients",
            Self::Residual => "residual",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Decomposition failure with the stage that caused it. This is the expected
/// outcome when the input violates the Schur-independence hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScdError {
    pub stage: Stage,
    pub detail: String,
}

impl ScdError {
    fn new(stage: Stage, detail: impl Into<String>) -> Self {
        Self { stage, detail: detail.into() }
    }
}

impl fmt::Display for ScdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "decomposition failed at stage `{}`: {}", self.stage, self.detail)
    }
}

impl std::error::Error for ScdError {}

/// Errors rejecting a matrix at [`CorrelationMatrix`] construction.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrError {
    DiagonalNotUnit { max_deviation: f64 },
    NotPsd { min_eigenvalue: f64 },
    Mat(MatError),
}

impl fmt::Display for CorrError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DiagonalNotUnit { max_deviation } => {
                write!(f, "diagonal deviates from ones by {max_deviation:.3e}")
            }
            Self::NotPsd { min_eigenvalue } => {
                write!(f, "matrix is not PSD (min eigenvalue {min_eigenvalue:.3e})")
            }
            Self::Mat(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CorrError {}

impl From<MatError> for CorrError {
    fn from(e: MatError) -> Self {
        Self::Mat(e)
    }
}

/// A symmetric PSD matrix with unit diagonal (an element of the elliptope).
/// The diagonal is snapped to exactly one at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    data: SymMatrix,
}

impl CorrelationMatrix {
    /// Accepts matrices whose diagonal is within `1e−10` of ones.
    pub fn new(x: SymMatrix, tol: &Tolerances) -> Result<Self, CorrError> {
        Self::with_diag_snap(x, tol, 1e-10)
    }

    /// Same as [`CorrelationMatrix::new`] with a caller-chosen snap tolerance;
    /// empirical covariance estimates carry more diagonal noise than exact
    /// mixtures do.
    pub fn with_diag_snap(
        x: SymMatrix,
        tol: &Tolerances,
        snap_tol: f64,
    ) -> Result<Self, CorrError> {
        let n = x.dim();
        let mut max_dev: f64 = 0.0;
        for i in 0..n {
            max_dev = max_dev.max((x.entry(i, i) - 1.0).abs());
        }
        if max_dev > snap_tol {
            return Err(CorrError::DiagonalNotUnit { max_deviation: max_dev });
        }
        let mut m = x.into_matrix();
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        let data = SymMatrix::from_symmetric_unchecked(m);
        let eig = sym_eig(&data)?;
        let max_abs = eig.eigenvalues.amax();
        let min = eig.eigenvalues.min();
        if min < -tol.psd_tol * max_abs - snap_tol {
            return Err(CorrError::NotPsd { min_eigenvalue: min });
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.data
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.data.as_matrix()
    }
}

/// Strictly positive weights summing to one (the open probability simplex).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexWeights(Vec<f64>);

impl ConvexWeights {
    /// Accepts strictly positive weights whose sum is within `1e−6` of one,
    /// then rescales so the sum is exactly one.
    pub fn new(mut weights: Vec<f64>) -> Result<Self, ScdError> {
        if weights.is_empty() {
            return Err(ScdError::new(Stage::Coefficients, "empty weight vector"));
        }
        if weights.iter().any(|&w| w <= 1e-10) {
            return Err(ScdError::new(
                Stage::Coefficients,
                "weights must be strictly positive",
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ScdError::new(
                Stage::Coefficients,
                format!("weights sum to {sum}, not 1"),
            ));
        }
        for w in &mut weights {
            *w /= sum;
        }
        Ok(Self(weights))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Canonicalized output of a decomposition: each component's first entry is
/// +1 and columns are sorted by weight descending (lexicographic tie-break),
/// pinning the "up to trivial symmetries" equivalence class to a single
/// representative.
#[derive(Debug, Clone, PartialEq)]
pub struct SignDecomposition {
    pub components: SignMatrix,
    pub weights: ConvexWeights,
    pub residual_fro: f64,
}

/// Per-iteration trace record.
#[derive(Debug, Clone, Copy)]
pub struct IterationTrace {
    /// Objective value ⟨g, s̃⟩² of the chosen vertex.
    pub vertex_objective: f64,
    /// Deflation step length ζ⋆ (absent for the final rank-one extraction).
    pub zeta: Option<f64>,
    /// Max-norm gap between the SDP solution and the rounded vertex.
    pub extract_residual: f64,
    pub sdp_iterations: usize,
    pub redraws: usize,
    pub sdp_time: Duration,
}

/// Aggregate run statistics, consumed by the CLI's verbose mode and by the
/// full-versus-compressed timing comparison.
#[derive(Debug, Clone, Default)]
pub struct ScdTrace {
    pub iterations: Vec<IterationTrace>,
    pub sdp_solves: usize,
    pub total_sdp_iterations: usize,
    pub sdp_time_total: Duration,
}

/// A decomposition together with its trace.
#[derive(Debug, Clone)]
pub struct ScdRun {
    pub decomposition: SignDecomposition,
    pub trace: ScdTrace,
}

/// Options shared by both decomposition algorithms.
#[derive(Debug, Clone)]
pub struct ScdOptions {
    pub tolerances: Tolerances,
    pub solver: SolverOptions,
    /// Redraw budget for the random direction g, consumed on near-ties and
    /// extraction failures.
    pub max_redraws: usize,
}

impl Default for ScdOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            solver: SolverOptions::default(),
            max_redraws: 20,
        }
    }
}

/// Verification report for a finished decomposition.
#[derive(Debug, Clone, Copy)]
pub struct VerificationReport {
    pub residual_fro: f64,
    /// True certifies that the decomposition is the unique one up to trivial
    /// symmetries.
    pub schur_independent: bool,
}

/// Orthogonal projector onto the range of `A`. The functional
/// `ψ(X) = trace(PX)/n` exposes the simplicial face containing `A`:
/// `ψ ≤ 1` on the elliptope with equality exactly on the face.
pub fn face_separator(a: &CorrelationMatrix, tol: &Tolerances) -> Result<SymMatrix, MatError> {
    let q = orth_basis(a.as_sym(), tol)?;
    orth_projector(&q)
}

/// Evaluates `ψ(X) = trace(PX)/n` for a separator `P`.
pub fn psi(p: &SymMatrix, x: &SymMatrix) -> f64 {
    p.inner(x) / p.dim() as f64
}

/// Errors from rank-one extraction; both indicate that the input violated the
/// Schur-independence hypothesis or that the solver returned a poor iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractError {
    NotRankOne { second_ratio: f64 },
    RoundingFailed { worst_deviation: f64 },
}

impl fmt::Display for ExtractError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotRankOne { second_ratio } => {
                write!(f, "matrix is not rank one (second eigenvalue ratio {second_ratio:.3e})")
            }
            Self::RoundingFailed { worst_deviation } => {
                write!(f, "rank-one factor is not a sign vector (deviation {worst_deviation:.3e})")
            }
        }
    }
}

impl std::error::Error for ExtractError {}

/// Rounds a numerically rank-one matrix with unit diagonal to the sign vector
/// generating it. The returned vector is canonical (first entry +1).
pub fn extract_sign_vector(x: &SymMatrix, tol: &Tolerances) -> Result<DVector<f64>, ExtractError> {
    let eig = sym_eig(x).map_err(|_| ExtractError::NotRankOne { second_ratio: f64::NAN })?;
    let l1 = eig.eigenvalues[0];
    let l2 = if x.dim() > 1 { eig.eigenvalues[1].abs() } else { 0.0 };
    if l1 <= 0.0 || l2 > RANK_ONE_TOL * l1 {
        return Err(ExtractError::NotRankOne { second_ratio: l2 / l1.max(f64::MIN_POSITIVE) });
    }
    let raw = eig.eigenvectors.column(0) * l1.sqrt();
    let mut worst: f64 = 0.0;
    for v in raw.iter() {
        worst = worst.max((v.abs() - 1.0).abs());
    }
    if worst > tol.round_tol {
        return Err(ExtractError::RoundingFailed { worst_deviation: worst });
    }
    let mut s = raw.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
    if s[0] < 0.0 {
        s.neg_mut();
    }
    // Entrywise recheck against the rounded vertex.
    let mut max_dev: f64 = 0.0;
    let n = x.dim();
    for j in 0..n {
        for i in 0..=j {
            max_dev = max_dev.max((x.entry(i, j) - s[i] * s[j]).abs());
        }
    }
    if max_dev > VERIFY_MAX_TOL {
        return Err(ExtractError::RoundingFailed { worst_deviation: max_dev });
    }
    Ok(s)
}

/// Least-squares solve of `A = Σ τᵢ sᵢsᵢᵗ` in svec coordinates, requiring a
/// strictly positive solution with a small residual.
pub fn solve_coefficients(
    a: &CorrelationMatrix,
    s: &SignMatrix,
) -> Result<ConvexWeights, ScdError> {
    let n = a.dim();
    let r = s.r();
    if s.n() != n {
        return Err(ScdError::new(Stage::Coefficients, "component dimension mismatch"));
    }
    let rows = n * (n + 1) / 2;
    let mut design = DMatrix::zeros(rows, r);
    for j in 0..r {
        let col = svec(&SymMatrix::outer(&s.column(j)));
        design.set_column(j, &col);
    }
    let target = svec(a.as_sym());
    let svd = design.clone().svd(true, true);
    let sv_max = svd.singular_values.max();
    let sv_min = svd.singular_values.min();
    if sv_min <= 1e-10 * sv_max {
        return Err(ScdError::new(Stage::Coefficients, "components are not linearly independent"));
    }
    let tau = svd
        .solve(&target, 1e-12 * sv_max)
        .map_err(|e| ScdError::new(Stage::Coefficients, e))?;
    let residual = (&design * &tau - &target).norm();
    if residual > RESIDUAL_REL_TOL * n as f64 {
        return Err(ScdError::new(
            Stage::Coefficients,
            format!("reconstruction residual {residual:.3e} too large"),
        ));
    }
    let weights: Vec<f64> = tau.iter().copied().collect();
    ConvexWeights::new(weights)
}

/// Builds the canonical decomposition: flips each component so its first
/// entry is +1 and sorts by weight descending, lexicographic on entries for
/// ties. Verifies the reconstruction residual.
fn assemble_decomposition(
    a: &CorrelationMatrix,
    components: Vec<DVector<f64>>,
    weights: &ConvexWeights,
) -> Result<SignDecomposition, ScdError> {
    let n = a.dim();
    let mut pairs: Vec<(f64, DVector<f64>)> = weights
        .as_slice()
        .iter()
        .zip(components)
        .map(|(&w, mut c)| {
            if c[0] < 0.0 {
                c.neg_mut();
            }
            (w, c)
        })
        .collect();
    pairs.sort_by(|(wa, ca), (wb, cb)| {
        wb.partial_cmp(wa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                for (x, y) in ca.iter().zip(cb.iter()) {
                    match x.partial_cmp(y) {
                        Some(std::cmp::Ordering::Equal) | None => continue,
                        Some(o) => return o,
                    }
                }
                std::cmp::Ordering::Equal
            })
    });
    let sorted_weights: Vec<f64> = pairs.iter().map(|(w, _)| *w).collect();
    let sorted_components: Vec<DVector<f64>> = pairs.into_iter().map(|(_, c)| c).collect();
    let mut recon = DMatrix::zeros(n, n);
    for (w, c) in sorted_weights.iter().zip(&sorted_components) {
        recon += *w * c * c.transpose();
    }
    let residual_fro = (a.as_matrix() - recon).norm();
    if residual_fro > RESIDUAL_REL_TOL * n as f64 {
        return Err(ScdError::new(
            Stage::Residual,
            format!("final residual {residual_fro:.3e} exceeds bound"),
        ));
    }
    let components = SignMatrix::from_columns(&sorted_components)
        .map_err(|e| ScdError::new(Stage::Residual, e.to_string()))?;
    let weights = ConvexWeights::new(sorted_weights)?;
    Ok(SignDecomposition { components, weights, residual_fro })
}

fn unit_diag_constraint(n: usize, i: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |r, c| if r == c && r == i { 1.0 } else { 0.0 })
}

/// One Step-1 solve with the redraw policy: draws g, solves the SDP over the
/// current face, and tries to round the solution to a sign vector. Near-ties
/// and poor iterates surface as extraction failures and consume a redraw.
fn extract_vertex(
    dim: usize,
    constraints: &[(SymMatrix, f64)],
    lift_solution: impl Fn(&SymMatrix) -> SymMatrix,
    known: &[DVector<f64>],
    rng: &mut RngState,
    opts: &ScdOptions,
    trace: &mut ScdTrace,
) -> Result<(DVector<f64>, IterationTrace), ScdError> {
    let mut last_err = String::from("no attempts made");
    for attempt in 0..opts.max_redraws {
        let g = rng.normal_vector(dim);
        let problem = SdpProblem::new(SymMatrix::outer(&g), constraints.to_vec())
            .map_err(|e| ScdError::new(Stage::Sdp, e.to_string()))?;
        let started = Instant::now();
        let sol = match solve_sdp(&problem, &opts.solver) {
            Ok(sol) => sol,
            Err(e) => {
                last_err = e.to_string();
                continue;
            }
        };
        let elapsed = started.elapsed();
        trace.sdp_solves += 1;
        trace.total_sdp_iterations += sol.iterations;
        trace.sdp_time_total += elapsed;
        if sol.status == SdpStatus::Infeasible {
            last_err = "step-1 SDP reported infeasible".to_string();
            continue;
        }
        let lifted = lift_solution(&sol.x_star);
        match extract_sign_vector(&lifted, &opts.tolerances) {
            Ok(s) => {
                if known.iter().any(|k| k == &s) {
                    last_err = "extracted an already-known component".to_string();
                    continue;
                }
                let mut max_dev: f64 = 0.0;
                for j in 0..lifted.dim() {
                    for i in 0..=j {
                        max_dev = max_dev.max((lifted.entry(i, j) - s[i] * s[j]).abs());
                    }
                }
                let vertex_objective = g.dot(&s).powi(2);
                return Ok((
                    s,
                    IterationTrace {
                        vertex_objective,
                        zeta: None,
                        extract_residual: max_dev,
                        sdp_iterations: sol.iterations,
                        redraws: attempt,
                        sdp_time: elapsed,
                    },
                ));
            }
            Err(e) => {
                last_err = e.to_string();
            }
        }
    }
    Err(ScdError::new(
        Stage::Extract,
        format!("no sign vertex after {} redraws: {last_err}", opts.max_redraws),
    ))
}

/// Full-size sign component decomposition: Step-1 programs run over n×n
/// matrix variables.
pub fn sign_component_decomposition(
    a: &CorrelationMatrix,
    rng: &mut RngState,
    opts: &ScdOptions,
) -> Result<ScdRun, ScdError> {
    opts.tolerances
        .validate()
        .map_err(|e| ScdError::new(Stage::Rank, e.to_string()))?;
    let n = a.dim();
    let tol = &opts.tolerances;
    let q0 = orth_basis(a.as_sym(), tol).map_err(|e| ScdError::new(Stage::Rank, e.to_string()))?;
    let r = q0.ncols();
    check_capacity(n, r)?;

    let mut trace = ScdTrace::default();
    let mut components: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut work = a.as_sym().clone();
    let mut current_rank = r;
    for _ in 0..r.saturating_sub(1) {
        let q = orth_basis(&work, tol).map_err(|e| ScdError::new(Stage::Face, e.to_string()))?;
        if q.ncols() != current_rank {
            return Err(ScdError::new(
                Stage::Deflate,
                format!("rank dropped to {} instead of {current_rank}", q.ncols()),
            ));
        }
        let proj = orth_projector(&q).map_err(|e| ScdError::new(Stage::Face, e.to_string()))?;
        let mut constraints = vec![(proj, n as f64)];
        for i in 0..n {
            constraints.push((unit_diag_constraint(n, i), 1.0));
        }
        let (s, mut record) = extract_vertex(
            n,
            &constraints,
            |x| x.clone(),
            &components,
            rng,
            opts,
            &mut trace,
        )?;
        let vertex = SymMatrix::outer(&s);
        let zeta = deflate_zeta(&work, &vertex, tol)
            .map_err(|e| ScdError::new(Stage::Deflate, e.to_string()))?;
        record.zeta = Some(zeta);
        trace.iterations.push(record);
        work = SymMatrix::combine(zeta, &work, 1.0 - zeta, &vertex);
        work = snap_unit_diagonal(work);
        components.push(s);
        current_rank -= 1;
    }
    // Final iterate is rank one.
    let s_last = extract_sign_vector(&work, tol)
        .map_err(|e| ScdError::new(Stage::Extract, e.to_string()))?;
    if components.iter().any(|k| k == &s_last) {
        return Err(ScdError::new(Stage::Extract, "final component repeats an earlier one"));
    }
    components.push(s_last);

    let s_mat = SignMatrix::from_columns(&components)
        .map_err(|e| ScdError::new(Stage::Extract, e.to_string()))?;
    let weights = solve_coefficients(a, &s_mat)?;
    let decomposition = assemble_decomposition(a, components, &weights)?;
    Ok(ScdRun { decomposition, trace })
}

/// Compressed sign component decomposition: the input is conjugated onto an
/// orthonormal range basis once, the lifted diagonal constraints are thinned
/// to a maximal linearly independent subset, and every program runs over r×r
/// matrix variables.
pub fn scd_compressed(
    a: &CorrelationMatrix,
    rng: &mut RngState,
    opts: &ScdOptions,
) -> Result<ScdRun, ScdError> {
    opts.tolerances
        .validate()
        .map_err(|e| ScdError::new(Stage::Rank, e.to_string()))?;
    let n = a.dim();
    let tol = &opts.tolerances;
    let q = orth_basis(a.as_sym(), tol).map_err(|e| ScdError::new(Stage::Rank, e.to_string()))?;
    let r = q.ncols();
    check_capacity(n, r)?;

    let mut trace = ScdTrace::default();
    if r == 1 {
        let s = extract_sign_vector(a.as_sym(), tol)
            .map_err(|e| ScdError::new(Stage::Extract, e.to_string()))?;
        let s_mat = SignMatrix::from_columns(&[s.clone()])
            .map_err(|e| ScdError::new(Stage::Extract, e.to_string()))?;
        let weights = solve_coefficients(a, &s_mat)?;
        let decomposition = assemble_decomposition(a, vec![s], &weights)?;
        return Ok(ScdRun { decomposition, trace });
    }

    // Row outer products q_jq_jᵗ are the diagonal constraints seen through
    // the compression; most are linearly dependent.
    let row_cons: Vec<SymMatrix> = (0..n)
        .map(|j| {
            let row = q.row(j).transpose().clone_owned();
            SymMatrix::outer(&row)
        })
        .collect();
    let vectorized: Vec<DVector<f64>> = row_cons.iter().map(svec).collect();
    let selected = rrqr_select(&vectorized, tol)
        .map_err(|e| ScdError::new(Stage::ConstraintSelection, e.to_string()))?;
    let expected = r * (r - 1) / 2 + 1;
    if selected.len() < expected {
        return Err(ScdError::new(
            Stage::ConstraintSelection,
            format!("only {} independent constraints, expected {expected}", selected.len()),
        ));
    }

    let mut work = compress(a.as_sym(), &q);
    let mut components: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut current_rank = r;
    for _ in 0..(r - 1) {
        let qi = orth_basis(&work, tol).map_err(|e| ScdError::new(Stage::Face, e.to_string()))?;
        if qi.ncols() != current_rank {
            return Err(ScdError::new(
                Stage::Deflate,
                format!("rank dropped to {} instead of {current_rank}", qi.ncols()),
            ));
        }
        let face_proj =
            orth_projector(&qi).map_err(|e| ScdError::new(Stage::Face, e.to_string()))?;
        // The face constraint can be linearly dependent on the selected row
        // constraints (it always is in the first round), so re-select a
        // maximal independent subset with the face constraint first.
        let mut family = vec![svec(&face_proj)];
        family.extend(selected.iter().map(|&j| vectorized[j].clone()));
        let keep = rrqr_select(&family, tol)
            .map_err(|e| ScdError::new(Stage::ConstraintSelection, e.to_string()))?;
        let mut constraints: Vec<(SymMatrix, f64)> = Vec::with_capacity(keep.len());
        for &k in &keep {
            if k == 0 {
                constraints.push((face_proj.clone(), n as f64));
            } else {
                constraints.push((row_cons[selected[k - 1]].clone(), 1.0));
            }
        }
        let (s, mut record) = extract_vertex(
            r,
            &constraints,
            |y| lift(y, &q),
            &components,
            rng,
            opts,
            &mut trace,
        )?;
        let w_comp = q.transpose() * &s;
        let vertex = SymMatrix::outer(&w_comp);
        let zeta = deflate_zeta(&work, &vertex, tol)
            .map_err(|e| ScdError::new(Stage::Deflate, e.to_string()))?;
        record.zeta = Some(zeta);
        trace.iterations.push(record);
        work = SymMatrix::combine(zeta, &work, 1.0 - zeta, &vertex);
        components.push(s);
        current_rank -= 1;
    }
    let lifted = lift(&work, &q);
    let s_last = extract_sign_vector(&lifted, tol)
        .map_err(|e| ScdError::new(Stage::Extract, e.to_string()))?;
    if components.iter().any(|k| k == &s_last) {
        return Err(ScdError::new(Stage::Extract, "final component repeats an earlier one"));
    }
    components.push(s_last);

    let s_mat = SignMatrix::from_columns(&components)
        .map_err(|e| ScdError::new(Stage::Extract, e.to_string()))?;
    let weights = solve_coefficients(a, &s_mat)?;
    let decomposition = assemble_decomposition(a, components, &weights)?;
    Ok(ScdRun { decomposition, trace })
}

/// Recomputes the reconstruction residual and certifies uniqueness by testing
/// Schur independence of the recovered components.
pub fn verify_decomposition(
    a: &CorrelationMatrix,
    d: &SignDecomposition,
    tol: &Tolerances,
) -> VerificationReport {
    let n = a.dim();
    let mut recon = DMatrix::zeros(n, n);
    for (w, j) in d.weights.as_slice().iter().zip(0..d.components.r()) {
        let c = d.components.column(j);
        recon += *w * &c * c.transpose();
    }
    VerificationReport {
        residual_fro: (a.as_matrix() - recon).norm(),
        schur_independent: is_schur_independent_signs(&d.components, tol),
    }
}

/// Random full-rank correlation matrix (normalized Gram matrix of Gaussian
/// vectors); a generic elliptope point used in tests and hypothesis-violation
/// experiments.
pub fn random_correlation_matrix(n: usize, rng: &mut RngState) -> CorrelationMatrix {
    let b = DMatrix::from_fn(n, n, |_, _| rng.normal());
    let gram = &b * b.transpose();
    let scale = DVector::from_fn(n, |i, _| 1.0 / gram[(i, i)].sqrt());
    let normalized = DMatrix::from_fn(n, n, |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let sym = SymMatrix::from_symmetric_unchecked(normalized);
    CorrelationMatrix::new(sym, &Tolerances::default())
        .expect("normalized Gram matrix lies in the elliptope")
}

fn check_capacity(n: usize, r: usize) -> Result<(), ScdError> {
    if r == 0 {
        return Err(ScdError::new(Stage::Rank, "input has numerical rank zero"));
    }
    let capacity = max_schur_rank(n);
    if r > capacity {
        return Err(ScdError::new(
            Stage::Rank,
            format!("rank {r} exceeds the Schur-independence capacity {capacity} at n = {n}"),
        ));
    }
    Ok(())
}

fn compress(x: &SymMatrix, q: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_symmetric_unchecked(q.transpose() * x.as_matrix() * q)
}

fn lift(y: &SymMatrix, q: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_symmetric_unchecked(q * y.as_matrix() * q.transpose())
}

fn snap_unit_diagonal(x: SymMatrix) -> SymMatrix {
    let n = x.dim();
    let mut m = x.into_matrix();
    for i in 0..n {
        m[(i, i)] = 1.0;
    }
    SymMatrix::from_symmetric_unchecked(m)
}

/// Mixture fixture `Σ τᵢ sᵢsᵢᵗ` as a correlation matrix.
pub fn mix_components(s: &SignMatrix, weights: &[f64]) -> CorrelationMatrix {
    assert_eq!(s.r(), weights.len());
    let n = s.n();
    let mut m = DMatrix::zeros(n, n);
    for (j, &w) in weights.iter().enumerate() {
        let c = s.column(j);
        m += w * &c * c.transpose();
    }
    CorrelationMatrix::new(SymMatrix::from_symmetric_unchecked(m), &Tolerances::default())
        .expect("convex mixtures of sign vertices are correlation matrices")
}

/// Dirichlet(1, …, 1) draw with all coordinates kept above a mass floor by
/// resampling; tiny weights make an instance numerically indistinguishable
/// from a lower-rank one.
pub fn random_open_simplex(r: usize, min_mass: f64, rng: &mut RngState) -> Vec<f64> {
    assert!(r >= 1);
    for _ in 0..10_000 {
        let raw: Vec<f64> = (0..r).map(|_| -rng.uniform().max(1e-300).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        if weights.iter().all(|&w| w >= min_mass) {
            return weights;
        }
    }
    vec![1.0 / r as f64; r]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schur::random_schur_independent_signs;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn sign_vec(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn separator_rank_one() {
        let s = sign_vec(&[1.0, -1.0, 1.0, 1.0]);
        let a = mix_components(&SignMatrix::from_columns(&[s.clone()]).unwrap(), &[1.0]);
        let p = face_separator(&a, &tol()).unwrap();
        // P = ssᵗ/n for a rank-one face.
        for j in 0..4 {
            for i in 0..4 {
                assert!((p.entry(i, j) - s[i] * s[j] / 4.0).abs() < 1e-10);
            }
        }
        assert!((psi(&p, a.as_sym()) - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn separator_identity_value() {
        let mut rng = RngState::from_seed(11);
        let s = random_schur_independent_signs(16, 3, &mut rng).unwrap();
        let a = mix_components(&s, &[0.5, 0.3, 0.2]);
        let p = face_separator(&a, &tol()).unwrap();
        // trace(P) = r, so ψ(I) = r/n.
        let id = SymMatrix::identity(16);
        assert!((psi(&p, &id) - 3.0 / 16.0).abs() < 1e-10);
    }

    #[test]
    fn separator_bounds_random_elliptope_points() {
        let mut rng = RngState::from_seed(3);
        let s = random_schur_independent_signs(12, 3, &mut rng).unwrap();
        let a = mix_components(&s, &[0.4, 0.35, 0.25]);
        let p = face_separator(&a, &tol()).unwrap();
        for seed in 0..50 {
            let x = random_correlation_matrix(12, &mut RngState::from_seed(900 + seed));
            assert!(psi(&p, x.as_sym()) <= 1.0 + 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn extract_exact_rank_one() {
        let s = sign_vec(&[1.0, -1.0, 1.0, -1.0, 1.0]);
        let x = SymMatrix::outer(&s);
        let got = extract_sign_vector(&x, &tol()).unwrap();
        assert_eq!(got, s);
        // A negated generator canonicalizes to the same output.
        let x2 = SymMatrix::outer(&(-&s));
        assert_eq!(extract_sign_vector(&x2, &tol()).unwrap(), s);
    }

    #[test]
    fn extract_tolerates_small_perturbation() {
        let s = sign_vec(&[1.0, 1.0, -1.0, 1.0]);
        let mut rng = RngState::from_seed(8);
        let noise = SymMatrix::from_fn(4, |_, _| 1e-6 * (2.0 * rng.uniform() - 1.0));
        let x = SymMatrix::combine(1.0, &SymMatrix::outer(&s), 1.0, &noise);
        assert_eq!(extract_sign_vector(&x, &tol()).unwrap(), s);
    }

    #[test]
    fn extract_rejects_rank_two() {
        let s1 = sign_vec(&[1.0, 1.0, 1.0, 1.0]);
        let s2 = sign_vec(&[1.0, 1.0, -1.0, -1.0]);
        let x = SymMatrix::combine(0.5, &SymMatrix::outer(&s1), 0.5, &SymMatrix::outer(&s2));
        assert!(matches!(
            extract_sign_vector(&x, &tol()),
            Err(ExtractError::NotRankOne { .. })
        ));
    }

    #[test]
    fn coefficients_single_component() {
        let s = sign_vec(&[1.0, -1.0, 1.0]);
        let sm = SignMatrix::from_columns(&[s]).unwrap();
        let a = mix_components(&sm, &[1.0]);
        let w = solve_coefficients(&a, &sm).unwrap();
        assert!((w.as_slice()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coefficients_recover_mixture() {
        let mut rng = RngState::from_seed(21);
        let s = random_schur_independent_signs(12, 2, &mut rng).unwrap();
        let a = mix_components(&s, &[0.3, 0.7]);
        let w = solve_coefficients(&a, &s).unwrap();
        assert!((w.as_slice()[0] - 0.3).abs() < 1e-10);
        assert!((w.as_slice()[1] - 0.7).abs() < 1e-10);
    }

    #[test]
    fn coefficients_reject_boundary() {
        // A = s₁s₁ᵗ expressed against [s₁, s₂]: τ₂ = 0 is outside the open simplex.
        let mut rng = RngState::from_seed(22);
        let s = random_schur_independent_signs(12, 2, &mut rng).unwrap();
        let a = mix_components(&s.select_columns(&[0]).unwrap(), &[1.0]);
        let err = solve_coefficients(&a, &s).unwrap_err();
        assert_eq!(err.stage, Stage::Coefficients);
    }

    #[test]
    fn decomposition_rank_one_no_sdp() {
        let s = sign_vec(&[1.0, -1.0, -1.0, 1.0, 1.0]);
        let sm = SignMatrix::from_columns(&[s.clone()]).unwrap();
        let a = mix_components(&sm, &[1.0]);
        let mut rng = RngState::from_seed(0);
        let run = sign_component_decomposition(&a, &mut rng, &ScdOptions::default()).unwrap();
        assert_eq!(run.trace.sdp_solves, 0);
        assert_eq!(run.decomposition.components.column(0), s);
        assert!((run.decomposition.weights.as_slice()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_small_fixture() {
        let n = 16;
        let r = 3;
        let mut rng = RngState::from_seed(77);
        let s = random_schur_independent_signs(n, r, &mut rng).unwrap();
        let weights = [0.5, 0.3, 0.2];
        let a = mix_components(&s, &weights);
        let run =
            sign_component_decomposition(&a, &mut RngState::from_seed(5), &ScdOptions::default())
                .unwrap();
        assert_roundtrip(&s, &weights, &run.decomposition, 1e-6);
        let report = verify_decomposition(&a, &run.decomposition, &tol());
        assert!(report.schur_independent);
        assert!(report.residual_fro <= 1e-6 * n as f64);
    }

    #[test]
    fn compressed_matches_full() {
        let n = 24;
        let r = 4;
        let mut rng = RngState::from_seed(123);
        let s = random_schur_independent_signs(n, r, &mut rng).unwrap();
        let weights = random_open_simplex(r, 0.05, &mut rng);
        let a = mix_components(&s, &weights);
        let full =
            sign_component_decomposition(&a, &mut RngState::from_seed(9), &ScdOptions::default())
                .unwrap();
        let compressed =
            scd_compressed(&a, &mut RngState::from_seed(9), &ScdOptions::default()).unwrap();
        assert_eq!(
            full.decomposition.components.as_matrix(),
            compressed.decomposition.components.as_matrix()
        );
        for (wf, wc) in full
            .decomposition
            .weights
            .as_slice()
            .iter()
            .zip(compressed.decomposition.weights.as_slice())
        {
            assert!((wf - wc).abs() <= 1e-9);
        }
    }

    #[test]
    fn hypothesis_violation_fails_with_stage() {
        let a = random_correlation_matrix(16, &mut RngState::from_seed(33));
        let err =
            sign_component_decomposition(&a, &mut RngState::from_seed(1), &ScdOptions::default())
                .unwrap_err();
        // Full-rank Gram matrices exceed the Schur capacity outright.
        assert_eq!(err.stage, Stage::Rank);
    }

    #[test]
    fn deflation_steps_move_outward() {
        let n = 16;
        let mut rng = RngState::from_seed(55);
        let s = random_schur_independent_signs(n, 4, &mut rng).unwrap();
        let weights = [0.4, 0.3, 0.2, 0.1];
        let a = mix_components(&s, &weights);
        let run =
            sign_component_decomposition(&a, &mut RngState::from_seed(2), &ScdOptions::default())
                .unwrap();
        assert_eq!(run.trace.iterations.len(), 3);
        for rec in &run.trace.iterations {
            let zeta = rec.zeta.unwrap();
            assert!(zeta > 1.0, "deflation must move outward");
        }
    }

    pub(crate) fn assemble_reference(s: &SignMatrix, weights: &[f64]) -> Vec<(Vec<i64>, f64)> {
        let mut pairs: Vec<(Vec<i64>, f64)> = (0..s.r())
            .map(|j| {
                let mut c = s.column(j);
                if c[0] < 0.0 {
                    c.neg_mut();
                }
                (c.iter().map(|&x| x as i64).collect(), weights[j])
            })
            .collect();
        pairs.sort_by(|(ca, wa), (cb, wb)| wb.partial_cmp(wa).unwrap().then_with(|| ca.cmp(cb)));
        pairs
    }

    pub(crate) fn assert_roundtrip(
        s: &SignMatrix,
        weights: &[f64],
        got: &SignDecomposition,
        weight_tol: f64,
    ) {
        let expected = assemble_reference(s, weights);
        assert_eq!(got.components.r(), expected.len());
        for (j, (comp, w)) in expected.iter().enumerate() {
            let got_col: Vec<i64> = got.components.column(j).iter().map(|&x| x as i64).collect();
            assert_eq!(&got_col, comp, "component {j}");
            assert!(
                (got.weights.as_slice()[j] - w).abs() <= weight_tol,
                "weight {j}: {} vs {w}",
                got.weights.as_slice()[j]
            );
        }
    }
}
