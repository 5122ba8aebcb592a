//! Dense small-scale semidefinite programming and the exact deflation step.
//!
//! [`solve_sdp`] handles equality-constrained trace-objective SDPs
//! (maximize `trace(CX)` subject to `trace(A_k X) = b_k`, `X ⪰ 0`) with a
//! primal-dual path-following interior-point method using Nesterov–Todd
//! scaling. Matrices are dense and small (up to a few hundred rows), so every
//! factorization is a direct dense one.
//!
//! [`deflate_zeta`] removes one identified rank-one component from a PSD
//! matrix by walking the ray through the component to the boundary of the
//! feasible cone. The maximal step has a closed spectral form, so no SDP is
//! solved here.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::matcore::{rank_from_eigenvalues, sym_eig, MatError, SymMatrix, Tolerances};

/// Errors raised by [`solve_sdp`].
#[derive(Debug, Clone, PartialEq)]
pub enum SdpError {
    /// Malformed problem: dimension mismatches, empty constraints, non-finite data.
    BadProblem(&'static str),
    /// A factorization failed beyond the regularization retry.
    NumericalBreakdown,
}

impl fmt::Display for SdpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadProblem(msg) => write!(f, "malformed SDP: {msg}"),
            Self::NumericalBreakdown => write!(f, "interior-point factorization broke down"),
        }
    }
}

impl std::error::Error for SdpError {}

/// Errors raised by [`deflate_zeta`].
#[derive(Debug, Clone, PartialEq)]
pub enum DeflateError {
    /// `range(Y)` is not contained in `range(M)` within tolerance.
    RangeMismatch { relative: f64 },
    /// An input matrix is not positive semidefinite.
    NotPsd,
    /// `M` has rank below two, so there is nothing to deflate onto.
    RankDegenerate,
    /// No eigenvalue exceeds one: the ray never leaves the cone.
    NoFiniteBound,
    /// Propagated substrate error.
    Mat(MatError),
}

impl fmt::Display for DeflateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RangeMismatch { relative } => {
                write!(f, "range(Y) leaves range(M) (relative leakage {relative:.3e})")
            }
            Self::NotPsd => write!(f, "deflation inputs must be positive semidefinite"),
            Self::RankDegenerate => write!(f, "deflation needs rank(M) >= 2"),
            Self::NoFiniteBound => write!(f, "deflation ray is unbounded"),
            Self::Mat(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for DeflateError {}

impl From<MatError> for DeflateError {
    fn from(e: MatError) -> Self {
        Self::Mat(e)
    }
}

/// A dense linear SDP in a symmetric matrix variable:
/// maximize `trace(objective · X)` subject to `trace(A_k X) = b_k` and `X ⪰ 0`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub dim: usize,
    pub objective: SymMatrix,
    pub constraints: Vec<(SymMatrix, f64)>,
}

impl SdpProblem {
    pub fn new(
        objective: SymMatrix,
        constraints: Vec<(SymMatrix, f64)>,
    ) -> Result<Self, SdpError> {
        let dim = objective.dim();
        if constraints.is_empty() {
            return Err(SdpError::BadProblem("constraint list is empty"));
        }
        if !objective.is_finite() {
            return Err(SdpError::BadProblem("objective contains non-finite entries"));
        }
        for (a, b) in &constraints {
            if a.dim() != dim {
                return Err(SdpError::BadProblem("constraint dimension mismatch"));
            }
            if !a.is_finite() || !b.is_finite() {
                return Err(SdpError::BadProblem("constraint contains non-finite entries"));
            }
        }
        Ok(Self { dim, objective, constraints })
    }
}

/// Options for the interior-point solver.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub duality_gap_tol: f64,
    /// Fraction of the step to the cone boundary taken each iteration.
    pub step_fraction: f64,
    /// Scale for the initial iterate `X₀ = αI`. When unset, α is chosen to
    /// satisfy the trace constraint if the constraints agree on one value,
    /// and falls back to `mean(b)/dim` otherwise.
    pub initial_scale: Option<f64>,
    /// Record per-iteration statistics in the solution.
    pub collect_log: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            duality_gap_tol: 1e-8,
            step_fraction: 0.98,
            initial_scale: None,
            collect_log: false,
        }
    }
}

/// Termination state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

/// One line of the iteration log (useful for verbose CLI output).
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mu: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Certified primal solution.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x_star: SymMatrix,
    pub objective_value: f64,
    /// Max constraint violation `max_k |trace(A_k X) − b_k|`.
    pub primal_residual: f64,
    pub min_eig: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    pub log: Vec<IterationRecord>,
}

/// Constraint matrices that are a single unit diagonal entry get a fast path
/// in the Schur-complement assembly; `diag(X) = e` constraints dominate the
/// workload here.
enum ConstraintKind {
    DiagUnit(usize),
    General,
}

fn classify(a: &SymMatrix) -> ConstraintKind {
    let n = a.dim();
    let mut unit = None;
    for j in 0..n {
        for i in 0..=j {
            let v = a.entry(i, j);
            if v != 0.0 {
                if i == j && v == 1.0 && unit.is_none() {
                    unit = Some(i);
                } else {
                    return ConstraintKind::General;
                }
            }
        }
    }
    match unit {
        Some(i) => ConstraintKind::DiagUnit(i),
        None => ConstraintKind::General,
    }
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Largest step α such that `M + α·ΔM ⪰ 0`, given the Cholesky factor of M.
/// Returns `f64::INFINITY` when the whole ray stays inside the cone.
fn max_step(chol_l: &DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    // K = L⁻¹ ΔM L⁻ᵗ; feasibility means 1 + αλ ≥ 0 for every eigenvalue of K.
    let Some(z) = chol_l.solve_lower_triangular(delta) else {
        return 0.0;
    };
    let Some(kt) = chol_l.solve_lower_triangular(&z.transpose()) else {
        return 0.0;
    };
    let mut k = kt.transpose();
    symmetrize(&mut k);
    let eigs = k.symmetric_eigenvalues();
    let min = eigs.min();
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

enum KktFactor {
    Chol(DMatrix<f64>),
    /// Eigenvalue-clamped pseudo-solve; last resort when the Schur complement
    /// has lost positive definiteness to roundoff.
    Eig { vectors: DMatrix<f64>, inv_values: DVector<f64> },
}

struct KktFactors {
    matrix: DMatrix<f64>,
    /// Jacobi scaling applied before factorization; the Schur complement's
    /// diagonal spreads over many orders near the end of the path.
    scaling: DVector<f64>,
    factor: KktFactor,
}

impl KktFactors {
    /// Factors the Jacobi-scaled Schur complement: plain Cholesky first, one
    /// retry with a `1e−12`-scaled diagonal bump, then an eigenvalue-clamped
    /// pseudo-solve.
    fn new(m: &DMatrix<f64>) -> Result<Self, SdpError> {
        let mm = m.nrows();
        let scaling = DVector::from_fn(mm, |i, _| {
            let d = m[(i, i)];
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        });
        let mut ms = m.clone();
        for i in 0..mm {
            for j in 0..mm {
                ms[(i, j)] *= scaling[i] * scaling[j];
            }
        }
        // The mapped constraint system loses rank as the iterate approaches a
        // low-dimensional face (most constraints become implied there), so the
        // scaled Schur complement can be numerically singular. A truncated
        // pseudo-inverse keeps the dual direction minimum-norm in that regime
        // instead of amplifying null-space noise.
        let se = ms.clone().symmetric_eigen();
        let max = se.eigenvalues.max();
        if !max.is_finite() || max <= 0.0 {
            return Err(SdpError::NumericalBreakdown);
        }
        if se.eigenvalues.min() > 1e-14 * max {
            if let Some(ch) = nalgebra::linalg::Cholesky::new(ms.clone()) {
                return Ok(Self { matrix: m.clone(), scaling, factor: KktFactor::Chol(ch.l()) });
            }
            let mut reg = ms;
            for i in 0..mm {
                reg[(i, i)] += 1e-12;
            }
            if let Some(ch) = nalgebra::linalg::Cholesky::new(reg) {
                return Ok(Self { matrix: m.clone(), scaling, factor: KktFactor::Chol(ch.l()) });
            }
        }
        let floor = 1e-12 * max;
        let inv_values = se.eigenvalues.map(|l| if l > floor { 1.0 / l } else { 0.0 });
        Ok(Self {
            matrix: m.clone(),
            scaling,
            factor: KktFactor::Eig { vectors: se.eigenvectors, inv_values },
        })
    }

    fn solve_once(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, SdpError> {
        let scaled_rhs = rhs.component_mul(&self.scaling);
        let scaled = match &self.factor {
            KktFactor::Chol(l) => {
                let y = l
                    .solve_lower_triangular(&scaled_rhs)
                    .ok_or(SdpError::NumericalBreakdown)?;
                l.transpose()
                    .solve_upper_triangular(&y)
                    .ok_or(SdpError::NumericalBreakdown)?
            }
            KktFactor::Eig { vectors, inv_values } => {
                let coeffs = vectors.transpose() * scaled_rhs;
                vectors * coeffs.component_mul(inv_values)
            }
        };
        Ok(scaled.component_mul(&self.scaling))
    }

    /// Solve with iterative refinement; the Schur complement is severely
    /// ill-conditioned near the end of the path.
    fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, SdpError> {
        let mut sol = self.solve_once(rhs)?;
        for _ in 0..2 {
            let residual = rhs - &self.matrix * &sol;
            let correction = self.solve_once(&residual)?;
            sol += correction;
        }
        if sol.iter().all(|v| v.is_finite()) {
            Ok(sol)
        } else {
            Err(SdpError::NumericalBreakdown)
        }
    }

}

/// Solves the SDP with an infeasible-start primal-dual path-following method.
///
/// `status == Optimal` certifies `primal_residual ≤ 1e−7·max(1, max|b_k|)`,
/// a complementarity gap at most `duality_gap_tol·(1 + |objective_value|)`,
/// and a dual residual at the same relative scale. Non-optimal statuses return
/// the best iterate seen; the caller decides what to do with it.
pub fn solve_sdp(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    if !(opts.step_fraction > 0.0 && opts.step_fraction < 1.0) {
        return Err(SdpError::BadProblem("step_fraction must lie in (0, 1)"));
    }
    let d = p.dim;
    let m = p.constraints.len();
    let c = p.objective.as_matrix().clone();

    // Normalize every constraint to unit Frobenius norm. The Schur complement
    // is badly conditioned near the end of the path, and mixed constraint
    // scales make it worse. Residuals are reported in the original scale.
    let mut cons: Vec<(SymMatrix, f64)> = Vec::with_capacity(m);
    let mut factors = Vec::with_capacity(m);
    for (a, bk) in &p.constraints {
        let f = a.fro_norm();
        if f == 0.0 {
            return Err(SdpError::BadProblem("zero constraint matrix"));
        }
        cons.push((
            SymMatrix::from_symmetric_unchecked(a.as_matrix() / f),
            bk / f,
        ));
        factors.push(f);
    }
    let kinds: Vec<ConstraintKind> = cons.iter().map(|(a, _)| classify(a)).collect();
    let b: DVector<f64> = DVector::from_iterator(m, cons.iter().map(|(_, bk)| *bk));
    let b_scale_ext = p
        .constraints
        .iter()
        .fold(1.0_f64, |acc, (_, bk)| acc.max(bk.abs()));
    let c_scale = c.iter().fold(1.0_f64, |acc, &x| acc.max(x.abs()));
    let tol_p = 1e-7 * b_scale_ext;
    let tol_d = 1e-7 * c_scale;

    let con_value = |a: &SymMatrix, kind: &ConstraintKind, t: &DMatrix<f64>| -> f64 {
        match kind {
            ConstraintKind::DiagUnit(i) => t[(*i, *i)],
            ConstraintKind::General => inner(a.as_matrix(), t),
        }
    };

    // Initial iterate X₀ = αI.
    let alpha = opts.initial_scale.unwrap_or_else(|| {
        let candidates: Vec<f64> = p
            .constraints
            .iter()
            .filter_map(|(a, bk)| {
                let tr = a.trace();
                (tr.abs() > 1e-12).then(|| bk / tr)
            })
            .collect();
        let agree = !candidates.is_empty()
            && candidates.iter().all(|&x| {
                let base = candidates[0];
                (x - base).abs() <= 0.1 * base.abs().max(1e-12)
            });
        let base = if agree {
            candidates.iter().sum::<f64>() / candidates.len() as f64
        } else {
            b.iter().sum::<f64>() / (m as f64 * d as f64)
        };
        base.abs().max(1e-6)
    });
    let mut x = DMatrix::identity(d, d) * alpha;
    let beta = 1.0 + c.norm();
    let mut s = DMatrix::identity(d, d) * beta;
    let mut y = DVector::zeros(m);

    let mut log = Vec::new();
    let mut best: Option<(f64, f64, DMatrix<f64>)> = None;
    let mut stalls = 0usize;
    let mut no_progress = 0usize;
    let mut iterations = 0usize;
    let mut status = SdpStatus::MaxIterations;

    for iter in 0..=opts.max_iterations {
        iterations = iter;
        // Residuals in external units for the certificate.
        let rp: DVector<f64> = DVector::from_iterator(
            m,
            cons.iter().zip(&kinds).map(|((a, bk), k)| bk - con_value(a, k, &x)),
        );
        let rp_norm = rp
            .iter()
            .zip(&factors)
            .fold(0.0_f64, |acc, (r, f)| acc.max((r * f).abs()));
        // R_d = C − A*(y) + S; dual feasibility is S = A*(y) − C.
        let mut rd = &c + &s;
        for (k, (a, _)) in cons.iter().enumerate() {
            rd -= a.as_matrix() * y[k];
        }
        let rd_norm = rd.amax();
        let gap = inner(&x, &s);
        // With an infeasible iterate the complementarity alone understates the
        // suboptimality; the multiplier-weighted residual term restores it.
        let true_gap = gap + y.dot(&rp).abs();
        let obj = inner(&c, &x);
        let mu = gap / d as f64;
        if opts.collect_log {
            log.push(IterationRecord {
                iteration: iter,
                mu,
                primal_residual: rp_norm,
                dual_residual: rd_norm,
            });
        }
        let gap_tol = opts.duality_gap_tol * (1.0 + obj.abs());
        let score = (rp_norm / tol_p)
            .max(rd_norm / tol_d)
            .max(true_gap / gap_tol);
        match &mut best {
            Some((s0, g0, xb)) if score < *s0 => {
                if score < 0.99 * *s0 {
                    no_progress = 0;
                } else {
                    no_progress += 1;
                }
                *s0 = score;
                *g0 = true_gap;
                xb.copy_from(&x);
            }
            Some(_) => no_progress += 1,
            None => best = Some((score, true_gap, x.clone())),
        }
        if rp_norm <= tol_p && rd_norm <= tol_d && true_gap <= gap_tol {
            status = SdpStatus::Optimal;
            break;
        }
        if iter == opts.max_iterations {
            break;
        }
        // The path can flatten out when the feasible set has empty interior;
        // hand the best iterate back instead of burning the iteration budget.
        if no_progress >= 20 || stalls >= 5 {
            status = if rp_norm > 100.0 * tol_p {
                SdpStatus::Infeasible
            } else {
                SdpStatus::MaxIterations
            };
            break;
        }

        // Nesterov–Todd scaling point R with W = RRᵗ and R⁻¹XR⁻ᵗ = RᵗSR = Λ
        // diagonal: X = LLᵗ, LᵗSL = U D Uᵗ, R = L U D^{−1/4}. Iterates this
        // close to the cone boundary can defeat the factorizations; exit with
        // the best iterate then.
        let Some(chol_x) = nalgebra::linalg::Cholesky::new(x.clone()) else {
            break;
        };
        let Some(chol_s) = nalgebra::linalg::Cholesky::new(s.clone()) else {
            break;
        };
        let lx = chol_x.l();
        let mut k_mat = lx.transpose() * &s * &lx;
        symmetrize(&mut k_mat);
        let se = k_mat.symmetric_eigen();
        if se.eigenvalues.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
            break;
        }
        let lambda: DVector<f64> = se.eigenvalues.map(|l| l.sqrt());
        let r_scale = &lx * &se.eigenvectors * DMatrix::from_diagonal(&lambda.map(|l| l.powf(-0.5)));
        let mut w = &r_scale * r_scale.transpose();
        symmetrize(&mut w);
        let s_inv = chol_s.inverse();

        // Schur complement M_kl = ⟨A_k, W A_l W⟩ plus the σ-independent
        // right-hand-side pieces.
        let mut mat = DMatrix::zeros(m, m);
        let mut u = DVector::zeros(m); // ⟨A_k, S⁻¹⟩
        let mut v = DVector::zeros(m); // ⟨A_k, W R_d W⟩
        let wrdw = {
            let mut t = &w * &rd * &w;
            symmetrize(&mut t);
            t
        };
        for (l, (al, _)) in cons.iter().enumerate() {
            let t_l: DMatrix<f64> = match kinds[l] {
                ConstraintKind::DiagUnit(i) => {
                    let wcol = w.column(i).clone_owned();
                    &wcol * wcol.transpose()
                }
                ConstraintKind::General => {
                    let mut t = &w * al.as_matrix() * &w;
                    symmetrize(&mut t);
                    t
                }
            };
            for (k, (ak, _)) in cons.iter().enumerate() {
                mat[(k, l)] = con_value(ak, &kinds[k], &t_l);
            }
        }
        symmetrize(&mut mat);
        for (k, (ak, _)) in cons.iter().enumerate() {
            u[k] = con_value(ak, &kinds[k], &s_inv);
            v[k] = con_value(ak, &kinds[k], &wrdw);
        }
        let kkt = KktFactors::new(&mat)?;

        let direction = |sigma_mu: f64,
                         correction: Option<&DMatrix<f64>>|
         -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>), SdpError> {
            let mut rhs = sigma_mu * &u - &b + &v;
            if let Some(c2) = correction {
                for (k, (ak, _)) in cons.iter().enumerate() {
                    rhs[k] -= con_value(ak, &kinds[k], c2);
                }
            }
            let dy = kkt.solve(&rhs)?;
            let mut ds = -&rd;
            for (k, (a, _)) in cons.iter().enumerate() {
                ds += a.as_matrix() * dy[k];
            }
            symmetrize(&mut ds);
            let mut dx = sigma_mu * &s_inv - &x - &w * &ds * &w;
            if let Some(c2) = correction {
                dx -= c2;
            }
            symmetrize(&mut dx);
            Ok((dx, dy, ds))
        };

        // Mehrotra predictor-corrector: the affine direction fixes the
        // centering weight and feeds the second-order correction term.
        let (dx_aff, _, ds_aff) = direction(0.0, None)?;
        let ap_aff = (opts.step_fraction * max_step(&lx, &dx_aff)).min(1.0);
        let ad_aff = (opts.step_fraction * max_step(&chol_s.l(), &ds_aff)).min(1.0);
        let mu_aff =
            inner(&(&x + ap_aff * &dx_aff), &(&s + ad_aff * &ds_aff)).max(0.0) / d as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(1e-6, 0.999);

        // Second-order term in scaled coordinates: Δλx = R⁻¹ ΔX_aff R⁻ᵗ,
        // Δλs = Rᵗ ΔS_aff R, then solve Λ∘G = sym(Δλx·Δλs) and map back.
        let correction = (|| -> Option<DMatrix<f64>> {
            let j = {
                let z = lx.solve_lower_triangular(&dx_aff)?;
                let jt = lx.solve_lower_triangular(&z.transpose())?;
                jt.transpose()
            };
            let d_quarter = DMatrix::from_diagonal(&lambda.map(|l| l.sqrt()));
            let ut = se.eigenvectors.transpose();
            let dlx = &d_quarter * &ut * j * &se.eigenvectors * &d_quarter;
            let inv_quarter = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l.sqrt()));
            let lts = lx.transpose() * &ds_aff * &lx;
            let dls = &inv_quarter * &ut * lts * &se.eigenvectors * &inv_quarter;
            // Scale by the realized affine step product: the raw affine
            // direction is far too large at infeasible iterates.
            let h = (0.5 * ap_aff * ad_aff) * (&dlx * &dls + &dls * &dlx);
            let mut g = DMatrix::zeros(d, d);
            for i in 0..d {
                for jcol in 0..d {
                    g[(i, jcol)] = 2.0 * h[(i, jcol)] / (lambda[i] + lambda[jcol]);
                }
            }
            let mut c2 = &r_scale * g * r_scale.transpose();
            symmetrize(&mut c2);
            c2.iter().all(|x| x.is_finite()).then_some(c2)
        })();

        let (dx, dy, ds) = direction(sigma * mu, correction.as_ref())?;
        let ap = (opts.step_fraction * max_step(&lx, &dx)).min(1.0);
        let ad = (opts.step_fraction * max_step(&chol_s.l(), &ds)).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
        } else {
            stalls = 0;
        }
        x += ap * &dx;
        y += ad * &dy;
        s += ad * &ds;
        symmetrize(&mut x);
        symmetrize(&mut s);
    }

    let (best_gap, best_x) = match best {
        Some((_, g0, xb)) => (g0, xb),
        None => (f64::INFINITY, x),
    };
    let mut x_final = best_x;
    // Rank-one polishing. Interior-point accuracy degrades when the optimal
    // face is low-dimensional (the mapped constraint system loses rank there),
    // but a near-rank-one iterate pins down the optimal vertex well before
    // the path bottoms out. Refine the dominant eigenvector onto the
    // constraint set with Gauss-Newton; the polished point is exactly
    // feasible, so it is accepted whenever it does not lose more objective
    // than the iterate's own uncertainty. The Optimal label still requires a
    // dual bound.
    if status != SdpStatus::Infeasible {
        if let Some(xp) = rank_one_polish(p, &x_final) {
            let obj_p = inner(p.objective.as_matrix(), &xp);
            let obj_i = inner(p.objective.as_matrix(), &x_final);
            let slack = (3.0 * best_gap).max(1e-8 * (1.0 + obj_p.abs()));
            if obj_p >= obj_i - slack {
                // Upper bound from the (near-feasible) dual iterate.
                let mut s_bar = -&c;
                for (k, (a, _)) in cons.iter().enumerate() {
                    s_bar += a.as_matrix() * y[k];
                }
                symmetrize(&mut s_bar);
                let s_min = s_bar.symmetric_eigenvalues().min();
                let trace_p = xp.trace().max(1.0);
                let upper = b.dot(&y) + s_min.min(0.0).abs() * trace_p;
                if upper - obj_p <= opts.duality_gap_tol * (1.0 + obj_p.abs()) {
                    status = SdpStatus::Optimal;
                }
                x_final = xp;
            }
        }
    }
    let x_star = SymMatrix::from_symmetric_unchecked(x_final);
    let mut primal_residual = 0.0_f64;
    for (a, bk) in &p.constraints {
        primal_residual = primal_residual.max((a.inner(&x_star) - bk).abs());
    }
    let min_eig = x_star.as_matrix().clone().symmetric_eigenvalues().min();
    let objective_value = inner(p.objective.as_matrix(), x_star.as_matrix());
    Ok(SdpSolution {
        x_star,
        objective_value,
        primal_residual,
        min_eig,
        iterations,
        status,
        log,
    })
}

/// Gauss-Newton refinement of the dominant eigenvector onto the constraint
/// set `⟨A_k, vvᵗ⟩ = b_k`. Returns the polished rank-one matrix only when the
/// iterate is near rank-one to begin with and the refinement converges to a
/// feasible point; the caller still has to certify optimality.
fn rank_one_polish(p: &SdpProblem, x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = p.dim;
    let m = p.constraints.len();
    let se = x.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let l1 = se.eigenvalues[order[0]];
    let l2 = if n > 1 { se.eigenvalues[order[1]].abs() } else { 0.0 };
    if l1 <= 0.0 || l2 > 0.2 * l1 {
        return None;
    }
    let b_scale = p
        .constraints
        .iter()
        .fold(1.0_f64, |acc, (_, bk)| acc.max(bk.abs()));
    let mut v = se.eigenvectors.column(order[0]).clone_owned() * l1.sqrt();
    for _ in 0..30 {
        let f = DVector::from_iterator(
            m,
            p.constraints.iter().map(|(a, bk)| v.dot(&(a.as_matrix() * &v)) - bk),
        );
        if f.amax() <= 1e-11 * b_scale {
            return Some(&v * v.transpose());
        }
        let mut jac = DMatrix::zeros(m, n);
        for (k, (a, _)) in p.constraints.iter().enumerate() {
            jac.set_row(k, &(2.0 * (a.as_matrix() * &v)).transpose());
        }
        let svd = jac.svd(true, true);
        let delta = svd.solve(&f, 1e-10 * b_scale.max(1.0)).ok()?;
        v -= delta;
        if v.iter().any(|x| !x.is_finite()) {
            return None;
        }
    }
    None
}

/// Maximal ζ with `ζM + (1−ζ)Y ⪰ 0`, computed spectrally.
///
/// Restricts to the range of `M` (basis Q from the eigendecomposition), forms
/// `W = (QᵗMQ)^{−1/2}` and takes the eigenvalues of `W (QᵗYQ) W`; the bound is
/// the smallest `λ/(λ−1)` over eigenvalues `λ > 1`. For a mixture
/// `M = Σ αᵢuᵢuᵢᵗ` and `Y = u_ku_kᵗ` this evaluates to `(1−α_k)⁻¹`.
pub fn deflate_zeta(m: &SymMatrix, y: &SymMatrix, tol: &Tolerances) -> Result<f64, DeflateError> {
    if m.dim() != y.dim() {
        return Err(DeflateError::Mat(MatError::DimensionMismatch {
            expected: m.dim(),
            actual: y.dim(),
        }));
    }
    let eig_m = sym_eig(m)?;
    let max_abs = eig_m.eigenvalues.iter().fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    if eig_m.eigenvalues.min() < -tol.psd_tol * max_abs {
        return Err(DeflateError::NotPsd);
    }
    let rank = rank_from_eigenvalues(&eig_m.eigenvalues, tol.rank_rel_tol);
    if rank < 2 {
        return Err(DeflateError::RankDegenerate);
    }
    let y_eigs = y.as_matrix().clone().symmetric_eigenvalues();
    let y_max = y_eigs.iter().fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    if y_eigs.min() < -tol.psd_tol * y_max {
        return Err(DeflateError::NotPsd);
    }

    let q = eig_m.eigenvectors.columns(0, rank).clone_owned();
    let leakage = (y.as_matrix() - &q * (q.transpose() * y.as_matrix())).norm();
    let y_norm = y.fro_norm();
    if leakage > 1e-6 * y_norm {
        return Err(DeflateError::RangeMismatch { relative: leakage / y_norm });
    }

    // QᵗMQ is diagonal in this basis, so W is a diagonal rescaling.
    let w = DMatrix::from_diagonal(&DVector::from_iterator(
        rank,
        (0..rank).map(|i| eig_m.eigenvalues[i].powf(-0.5)),
    ));
    let y_compressed = q.transpose() * y.as_matrix() * &q;
    let mut k = &w * y_compressed * &w;
    symmetrize(&mut k);
    let lambdas = k.symmetric_eigenvalues();
    let gap = tol.rank_rel_tol;
    let zeta = lambdas
        .iter()
        .filter(|&&l| l > 1.0 + gap)
        .map(|&l| l / (l - 1.0))
        .fold(f64::INFINITY, f64::min);
    if zeta.is_finite() {
        Ok(zeta)
    } else {
        Err(DeflateError::NoFiniteBound)
    }
}
