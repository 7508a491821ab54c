//! Link-level simulator for an IRS-aided multiuser MISO downlink with
//! imperfect CSI, together with the joint transmit-precoder /
//! reflection-coefficient optimizers that exploit both reflection amplitude
//! and phase-shift control.
//!
//! The crate is organized as a pipeline:
//!
//! * [`channel`] draws the propagation environment (geometry, path loss,
//!   Rician fading, cascaded AP-IRS-user channels),
//! * [`training`] runs uplink pilot training, forms the least-squares channel
//!   estimate and its exact error covariance,
//! * [`rate`] evaluates achievable rates, MSE quantities and reflection
//!   feasible sets,
//! * [`solver_su`] optimizes the single-user reflection vector with a
//!   penalized Dinkelbach-BSUM loop plus per-element coordinate refinement,
//! * [`solver_mu`] maximizes the multiuser weighted sum-rate with a
//!   penalty-dual-decomposition loop around WMMSE block updates,
//! * [`harness`] orchestrates seeded Monte-Carlo sweeps and exports
//!   plot-ready CSV/JSON.

pub mod channel;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod rate;
pub mod solver_mu;
pub mod solver_su;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{CMat, CVec};
