//! Force-limited compliant sliding control for mobile robots with a
//! force/torque-sensed bumper, together with a deterministic 2D contact
//! simulator and scenario harness.

pub mod avoidance;
pub mod cli;
pub mod contact_estimation;
pub mod controller;
pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
