//! Deterministic finite-difference tools for a chemotaxis system with
//! signal-dependent motility and logarithmic degradation:
//!
//! ```text
//! u_t = laplace(gamma(v) u) - u f(u)      (density)
//! v - laplace(v) = u                      (signal, Neumann boundary)
//! ```
//!
//! The crate provides the model presets, the constructive constants used by
//! the comparison-principle bounds (`beta1`, `s*`, `v*`, motility range and
//! splittings), grids and the Helmholtz solve, a positivity-preserving time
//! stepper, scalar comparison ODEs, and runtime diagnostics with a
//! bounded/growing classifier.
//!
//! All numerics are generic over the scalar type via [`scalar::Real`];
//! `f64` aliases for the main types live at the crate root.

pub mod comparison;
pub mod constants;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod model;
pub mod scalar;
pub mod scenario;
pub mod stepper;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` grid.
pub type Grid64 = grid::Grid<f64>;
/// `f64` field.
pub type Field64 = grid::Field<f64>;
/// `f64` motility spec.
pub type Motility64 = model::MotilitySpec<f64>;
/// `f64` source spec.
pub type Source64 = model::SourceSpec<f64>;
/// `f64` initial-condition spec.
pub type InitialCondition64 = model::InitialConditionSpec<f64>;
/// `f64` theory constants.
pub type TheoryConstants64 = constants::TheoryConstants<f64>;
/// `f64` simulation state.
pub type State64 = stepper::State<f64>;
/// `f64` scenario.
pub type Scenario64 = scenario::Scenario<f64>;
