//! Voltage regulation of a fuel-cell/boost-converter system with a PI
//! controller on a passive output, optionally made adaptive by an
//! immersion-and-invariance estimate of the inductor and load resistances.
//!
//! Module map:
//!
//! - [`pemfc`]: polarization curve, its inverse and least-squares fitting
//! - [`plant`]: averaged converter dynamics, passive output, storage function
//! - [`equilibrium`]: assignable equilibria, exact and grid-estimated
//! - [`controller`]: known-parameter and adaptive PI laws with saturation
//! - [`estimator`]: resistance estimator and its closed-form error decay
//! - [`sim`]: scenarios, closed-loop integration, traces
//! - [`config`], [`plot`], [`cli`]: scenario files, SVG figures, command front end

pub mod cli;
pub mod config;
pub mod controller;
pub mod equilibrium;
pub mod error;
pub mod estimator;
pub mod pemfc;
pub mod plant;
pub mod plot;
pub mod sim;

pub use controller::{PiGains, SaturationLimits};
pub use equilibrium::{solve_equilibrium, Equilibrium, EquilibriumGrid};
pub use error::{Error, Result};
pub use estimator::EstimatorGains;
pub use pemfc::{CurveSample, PolarizationParams};
pub use plant::{ControlInput, PlantParams, PlantState, Theta};
pub use sim::{run_scenario, Scenario, SimTrace};
