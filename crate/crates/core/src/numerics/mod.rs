//! One-dimensional numerics: certified tail truncation for log-concave
//! densities, nested-refinement quadrature on the truncated interval, exact
//! inverse-CDF sampling, compactified maximizers for ratio suprema, and the
//! counter-based random streams used by the chain runner.

mod density;
mod maximize;
mod quad;
mod rng;

pub use density::Density1D;
pub use maximize::{maximize_1d, maximize_2d, MaxResult};
pub use quad::{cumulative_rho_of, integrate, integrate_many, QuadratureResult};
pub use rng::{DrawStream, RngStream};

use thiserror::Error;

/// Maximum number of quadrature intervals before giving up (2^16).
pub const MAX_QUAD_INTERVALS: usize = 1 << 16;

/// Default certified bound on relative tail mass outside the truncation
/// interval.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Target CDF accuracy of inverse-CDF draws.
pub const CDF_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum NumericsError {
    /// Tail envelope needs a strictly positive convexity parameter.
    #[error("envelope failure: convexity parameter {0} is not positive")]
    EnvelopeFailure(f64),

    /// Successive quadrature refinements still disagree at the node budget.
    #[error("non-convergent quadrature: estimate {estimate:.3e} above tolerance {tolerance:.3e} at {nodes} nodes")]
    NonConvergent {
        estimate: f64,
        tolerance: f64,
        nodes: usize,
    },

    /// The running maximum keeps growing on the compactified boundary:
    /// the supremum is infinite.
    #[error("divergent sup: boundary of the compactified domain dominates under refinement (last value {0:.3e})")]
    DivergentSup(f64),

    /// Cumulative table stopped being strictly increasing inside the support.
    #[error("inverse-CDF table is not strictly monotone (density vanished inside the truncation interval)")]
    NonMonotoneCdf,

    /// Mode search failed to bracket a derivative sign change.
    #[error("mode bracketing failed: log-density derivative has no sign change within |x| <= {0:.3e}")]
    ModeBracketing(f64),
}
