//! Constructive KL approximation of densities by finite Gaussian mixtures.
//!
//! The crate provides target densities with certified tails, a validated
//! finite-mixture type, KL estimators, two constructive approximation routes
//! (a global one for continuous positive targets with finite log-moment and a
//! piecewise one for interval-supported targets), and machine-checkable
//! certificates for the second-moment necessity bound and the counterexamples.

pub mod certificates;
pub mod densities;
pub mod divergence;
pub mod entropy;
pub mod error;
pub mod gmm;
pub mod json;
pub mod numeric;
pub mod quadrature;
pub mod support;

pub use error::{Error, Result};
pub use gmm::{FiniteGMM, GaussComponent};
