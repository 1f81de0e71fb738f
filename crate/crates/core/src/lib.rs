//! Desk-scale Born-rule test on a driven qubit.
//!
//! The crate generates outcome probabilities for `S_theta^n S |0>` under
//! configurable gate imperfections, samples shot counts, fits the
//! `A sin theta + B cos theta + C` law and checks analytic first-order
//! deviation formulas against brute-force propagation.

pub mod error;
pub mod expio;
pub mod gates;
pub mod models;
pub mod perturbation;
pub mod qcore;
pub mod stats;

pub use error::{Error, Result};
pub use gates::{grid, Angle, CircuitSpec};
pub use qcore::{ComplexMatrix, StateVector, C64};
