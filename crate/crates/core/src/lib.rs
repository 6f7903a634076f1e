//! Continuous decoding of finger joint angles from multi-channel surface EMG.
//!
//! The pipeline: digital preprocessing of EMG and kinematics streams
//! ([`signal`]), multi-band covariance features on the SPD manifold with
//! tangent-space projection ([`riemann`]), a small from-scratch neural stack
//! with a GRU sequence regressor ([`neural`]), automatic EMG/kinematics
//! temporal alignment ([`sync`]), evaluation protocols and metrics
//! ([`eval`]), and session persistence plus a synthetic coupled generator
//! for desk-scale verification ([`data`]).

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod neural;
pub mod riemann;
pub mod rng;
pub mod signal;
pub mod sync;

pub use error::{Error, Result};
