//! Image restoration with a two-level non-stationary tight framelet
//! regularizer, solved by primal-dual three-operator splitting.
//!
//! The pipeline: [`sim`] degrades a ground truth (periodic 5x5 average blur
//! plus seeded Gaussian noise), [`solver`] restores the observation under one
//! of several regularizers (the two-level framelet model, TV baselines, and
//! single-level ablations), and [`metrics`] scores the result. [`framelet`],
//! [`linops`], [`prox`], and [`adapt`] supply the transform, the stacked
//! operators, the proximity operators, and the adaptive weight estimation.

pub mod adapt;
pub mod cli;
pub mod error;
pub mod framelet;
pub mod image;
pub mod linops;
pub mod metrics;
pub mod prox;
pub mod rng;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use image::Image;
