//! Worst-case (minimax) state estimation for discretized Neumann problems.
//!
//! The library assimilates noisy, incomplete observations taken through a
//! compact operator `C(t) = c(t)·K` and produces the estimate with the
//! smallest worst-case mean-squared error over all disturbances in the
//! bounding sets. On a quadrature grid this reduces to symmetric
//! positive-definite solves of the form `(γ²/ω · N² + K*K) φ̂ = data`, a
//! Tikhonov-type spectral filter whose `ω → ∞` limit is a regularized
//! pseudoinverse of `K`.
//!
//! Modules follow the pipeline:
//!
//! * [`grid`] — tensor trapezoid grids and nodal fields; the weighted inner
//!   product in which every adjoint below is exact.
//! * [`neumann`] — the model operator `N = −βΔ + μI` with reflective Neumann
//!   closure (assembly, application, direct/iterative solves).
//! * [`obsop`] — observation operators (Gaussian kernel, cumulative-integral
//!   Volterra), weighted adjoints and spectral decompositions.
//! * [`schedule`] — the burst observation schedule: per-burst closed-form
//!   time integrals and their limit constants.
//! * [`estimator`] — burst simulation, incremental assimilation, the bounded
//!   and unbounded minimax estimates, worst-case error values and the
//!   optimality/duality checks.
//! * [`spectral`] — the filter-factor route: closed-form estimates from an
//!   eigendecomposition of `K*K`, projection limits, truncated-SVD
//!   pseudoinverse.
//! * [`io`] — CSV/metadata serialization of fields and operators.

pub mod error;
pub mod estimator;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod neumann;
pub mod obsop;
pub mod par;
pub mod schedule;
pub mod spectral;

pub use error::{Error, Result};
pub use estimator::{AssimilationState, BurstDelta, EstimateReport};
pub use grid::{Field, Grid};
pub use neumann::NeumannOperator;
pub use obsop::{DiscreteOperator, Spectrum};
pub use schedule::{BurstSchedule, CumulativeWeights};
pub use spectral::FilterSpec;
