//! Integral operators driven by a continuum of interval self-maps: build the
//! operator from expression-valued parameters, certify contraction, and
//! iterate to the fixed point on a grid.
//!
//! The pieces:
//! - [`expr`]: the `(t, x)` expression language with total error reporting.
//! - [`family`]: homotopy extensions of base maps, monotonicity analysis,
//!   inversion.
//! - [`hit`]: the time-sets `{t : x in image(l_t)}` and their measures.
//! - [`operator`]: the quadrature operator and its finite-sum counterpart.
//! - [`fixpoint`]: Picard iteration with a-posteriori error bounds.
//! - [`certify`]: contraction certificates, continuity diagnostics, the
//!   exact-embedding check, and the ramp-approximation study.
//! - [`cli`]: scenario configs, builtin scenarios, CSV/SVG/JSON export.

pub mod certify;
pub mod cli;
pub mod expr;
pub mod family;
pub mod fixpoint;
pub mod hit;
pub mod operator;
