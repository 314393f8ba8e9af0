//! Parking on uniform random rooted plane trees.
//!
//! Cars arrive at the vertices of a rooted plane tree, drive towards the
//! root and take the first free parking space they find. This crate samples
//! the trees and the arrivals, runs the parking dynamics, solves the
//! distributional fixed-point equation for the number of cars reaching the
//! root of a critical geometric Galton–Watson tree, and evaluates the closed
//! forms that locate the phase transition at `sqrt(2) - 1`.
//!
//! Module map:
//!
//! * [`trees`]: plane trees, samplers, enumeration and the rotation
//!   correspondence with binary trees.
//! * [`parking`]: deterministic parking dynamics and the finite-`n`
//!   Monte Carlo experiment.
//! * [`rde`]: truncated probability mass functions and the fixed-point
//!   engine.
//! * [`analytics`]: closed-form quantities and the supercritical `p` solver.
//! * [`limit`]: simulation of the infinite spine model.
//! * [`cli`]: experiment drivers used by the `plane-parking` binary.

pub mod alpha;
pub mod analytics;
pub mod cli;
pub mod limit;
pub mod parking;
pub mod rde;
pub mod rng;
pub mod trees;

pub use alpha::DecimalAlpha;
pub use analytics::{AlphaProfile, ExtendedReal, Regime};
pub use parking::{ArrivalConfig, ParkingFlowResult};
pub use rde::{ArrivalSpec, OffspringSpec, Pmf};
pub use trees::{BinaryTree, PlaneTree};
