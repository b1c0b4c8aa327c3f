//! Simulation of a driven optical cavity with two mechanical membranes: the
//! mapping onto the open Dicke model, its superradiant transition, the
//! period-doubling (discrete time crystal) protocol, a small-N master-equation
//! treatment, and the cavity-spectrum feasibility analysis.
//!
//! Units: the membrane coupling `J` sets the scale; frequencies and rates are
//! in units of `J`, times in units of `1/J`.

pub mod error;
pub mod model;
pub mod meanfield;
pub mod dtc;
pub mod ode;
pub mod config;
pub mod quantum;
pub mod spectrum;
pub mod sweep;
pub mod validate;
pub mod runner;

pub use error::{Error, Result};
pub use model::{Branch, DickeParams, ModelParams, SteadyState};
