//! Integer relation detection for real data known only up to a bounded error.
//!
//! The crate pairs a PSLQ engine whose loop stops once `|h_{n,n-1}|` drops below
//! a threshold `eps2` with an error budget calculus: given a target bound `eps`
//! on `|<alpha, m>|` for the unknown exact data `alpha`, it derives how accurate
//! the input must be (`eps1`) and where the loop may stop (`eps2`).

pub mod error_control;
pub mod hyperplane;
pub mod ingest;
pub mod matrix;
pub mod numerics;
pub mod pslq;

pub use error_control::{ErrorPlan, ErrorControlError};
pub use hyperplane::{HyperplaneMatrix, Normalized, UnitVector};
pub use numerics::{PrecisionContext, Real};
pub use pslq::{RelationResult, RelationStatus};
