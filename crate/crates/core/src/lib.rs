//! Macroeconomic transfer-learning toolkit: small dense and LSTM networks
//! trained from scratch, Hyperband hyperparameter search, locked/unlocked
//! transfer between economies, classification and regression metrics, and
//! temporal disaggregation of quarterly series to monthly frequency.
//!
//! The building blocks are deliberately dependency-light and deterministic:
//! every stochastic component takes an explicit seed, and identical inputs
//! produce byte-identical outputs.

pub mod disagg;
pub mod error;
pub mod experiment;
pub mod grad;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod series;
pub mod synth;
pub mod transfer;
pub mod tuner;

pub use error::{Error, Result};
