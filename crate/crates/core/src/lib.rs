//! Movable intelligent surface (MIS) sensing: array geometry, echo model,
//! manifold optimization of the phase design and closed-form beam steering.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod echo;
pub mod closed_form;
pub mod error;
pub mod geometry;
pub mod manifold;
pub mod oracle;
pub mod ralm;
pub mod units;

pub use echo::{EchoModel, PhaseDesign, Schedule, Target, TargetScene};
pub use error::{MisError, Result};
pub use geometry::{Direction, MisGeometry, OverlapPattern};
pub use ralm::{ralm_solve, RalmConfig, RalmReport};
