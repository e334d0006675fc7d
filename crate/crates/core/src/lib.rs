//! Heat flow through a ringed Klein-Gordon field held between two
//! Ornstein-Uhlenbeck baths: truncated linear operators, spectral
//! perturbation data, exact stationary currents, series predictions and a
//! Monte Carlo simulator.

pub mod config;
pub mod error;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod spectral;
pub mod stationary;
pub mod analytic;
pub mod simulate;
pub mod cli;

pub use error::{Error, Result};
pub use model::{Branch, CouplingSpec, ModeIndex, Nonlinearity, SystemParams, C64};
pub use operator::{assemble_drift, DriftSystem, Layout, TruncatedState};
