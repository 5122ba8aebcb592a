//! Exact binary-valued factorizations of low-rank positive-semidefinite matrices.
//!
//! A correlation matrix that is a proper convex combination of rank-one sign
//! matrices `s sᵗ` with `s ∈ {±1}ⁿ` can be factored back into its components
//! exactly, provided the sign family is Schur independent. The same machinery
//! factors PSD matrices built from `{0,1}` components. This crate implements
//! the pipeline end to end:
//!
//! * [`matcore`] — dense symmetric eigendecompositions, orthonormal range
//!   bases, projectors, symmetric vectorization, rank-revealing selection;
//! * [`schur`] — Schur-independence certification, the cardinality bound, and
//!   random instance generation;
//! * [`sdpcore`] — a dense primal-dual interior-point solver for small
//!   trace-constrained SDPs, plus the spectral deflation step;
//! * [`scd`] — sign component decomposition, both the full n×n formulation and
//!   the compressed r×r formulation;
//! * [`bcd`] — binary component decomposition by reduction to the sign case;
//! * [`mimo`] — a stylized massive-MIMO activity-detection simulator driving
//!   the decomposition.

pub mod bcd;
pub mod matcore;
pub mod mimo;
pub mod scd;
pub mod schur;
pub mod sdpcore;

pub use matcore::{MatError, SymMatrix, Tolerances};
pub use schur::{BinaryMatrix, RngState, SchurError, SignMatrix};

/// Re-exported so downstream crates share a single linear-algebra stack.
pub use nalgebra;
