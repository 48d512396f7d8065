//! Simulation and analysis of non-redundant cable-driven parallel robots
//! whose end-effectors are reconfigured passively by springs, helical
//! spline shafts and bearings.
//!
//! Three end-effector designs are modelled (see [`model::Variant`]); every
//! one has exactly as many configuration coordinates as cables, so the
//! cable tensions balancing a load are unique and the robot can be driven
//! by commanding cable lengths alone.

// `!(x > 0.0)` is used on purpose throughout: it rejects NaN along with
// the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod canonical;
pub mod cli;
pub mod control;
pub mod distribution;
pub mod dynamics;
pub mod error;
pub mod interference;
pub mod kinematics;
pub mod mechanism;
pub mod model;
pub mod optimize;
pub mod scenario;
pub mod statics;
pub mod trajectory;
pub mod workspace;

pub use error::{Error, Result};
