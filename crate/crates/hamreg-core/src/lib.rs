//! Learning mechanical-system dynamics from trajectory data with
//! physics-enhanced neural networks (baseline MLP, HNN, CHNN, LNN) and an
//! energy-level regularization term, plus the single/double-pendulum
//! ground-truth systems and the evaluation protocol built around them.
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats and the CLI
//! live in the companion `hamreg` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod integrator;
pub(crate) mod linalg;
pub(crate) mod math;
pub mod models;
pub mod nn;
pub mod physics;
pub mod training;

pub use error::{CoreError, Result};
