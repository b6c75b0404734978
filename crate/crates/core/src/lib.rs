//! Pseudo-spectral 2D incompressible Euler flow on the periodic box
//! `(R/2Z) x (R/2mZ)`, perturbations of stationary shear flows, their
//! Lagrangian flow maps and Jacobi fields, and the checks built on them.

// `!(x > 0.0)` style guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod error;
pub mod euler;
pub mod eval;
pub mod field;
pub mod grid;
pub mod harness;
pub mod lagrangian;
pub mod linear;
pub mod profile;
pub mod stepping;
pub mod velocity;

pub use error::{Error, Result};
pub use euler::{Diagnostics, Euler, FlowState};
pub use field::{Axis, SpectralField};
pub use grid::TorusGrid;
pub use lagrangian::{FlowMap, JacobiField, LabelGrid, ShearBase};
pub use linear::{InitialPerturbation, LinearState, LinearizedEuler};
pub use profile::{ProfileSpec, ShearProfile};
pub use stepping::{Dynamics, Evaluation, StageFields, TimeStepping, VelocityProvider};
pub use velocity::{velocity_from_vorticity, Velocity};
