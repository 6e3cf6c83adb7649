//! Joint+marginal moment-SOS relaxations for parametric polynomial optimization.
//!
//! For a parametric program `J(y) = inf_x { f(x, y) : (x, y) ∈ K }` with the
//! parameter `y` distributed by a probability measure `φ` on `Y`, the crate
//! builds the hierarchy of semidefinite relaxations whose optimal values
//! `ρ_i` increase to `∫ J dφ`, and from their solutions extracts
//!
//! - polynomial lower bounds `p_i(y) <= J(y)` and their running maximum,
//! - moments of the optimal coordinates `y ↦ x*_k(y)` (means, persistency of
//!   boolean variables, polynomial functionals),
//! - maximum-entropy reconstructions of the curves `y ↦ x*_k(y)`.
//!
//! A sampling-based [`oracle`] solves `J(y)` pointwise and serves as an
//! independent reference.

// links the system OpenBLAS used by the SDP backend
use openblas_src as _;

pub mod error;
pub mod format;
pub mod marginal;
pub mod maxent;
pub mod momentstruct;
pub mod oracle;
mod parse;
pub mod polyalg;
pub mod postproc;
pub mod problem;
pub mod quadrature;
pub mod relaxation;

pub use error::{Error, Result};
pub use marginal::MarginalMoments;
pub use momentstruct::{LinearForm, MomentSequence, StructuredMatrix};
pub use polyalg::{MultiIndex, Polynomial};
pub use problem::{Constraint, ConstraintKind, MarginalSpec, ParametricProblem};
pub use relaxation::{ClarabelBackend, ConicProgram, RelaxationSolution, SdpBackend, SolveStatus};
