//! Radial finite-volume simulator for the two-species cross-attraction
//! chemotaxis system with nonlocal degenerate diffusion in R^d, d >= 3.

// `!(x > 0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::too_many_arguments)]

pub mod criticality;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod grid;
pub mod potential;
pub mod scalar;

#[cfg(test)]
pub(crate) mod oracle;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases for the common case.
pub type Grid = grid::RadialGrid<f64>;
pub type Density = fields::DensityField<f64>;
pub type Potential = potential::PotentialField<f64>;
pub type State = dynamics::SystemState<f64>;
pub type Control = dynamics::StepControl<f64>;
pub type Report = energy::EnergyReport<f64>;
