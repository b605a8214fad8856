//! Label noise detection by repeated k-fold cross-validation.
//!
//! [`recov`] counts how often each sample lands in the worst validation fold
//! over many seeded splits; noisy samples collect more hits, and [`theory`]
//! plans the run count at which clean and noisy counts separate. [`fastrecov`]
//! replaces the count with a per-sample moving average of validation scores
//! that steers later splits. Both work for classification (logistic
//! regression, accuracy), survival (Cox, concordance) and ordinal grading
//! (least squares, quadratic weighted kappa), or any external learner.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common choices.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod learners;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod cv;
pub mod noise;
pub mod theory;
pub mod control;
pub mod recov;
pub mod fastrecov;
pub mod synth;
pub mod report;
pub mod cli;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Dataset = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type MemoryBank = fastrecov::MemoryBank<f64>;
pub type MemoryBank32 = fastrecov::MemoryBank<f32>;
pub type FastRecovOutcome = fastrecov::FastRecovOutcome<f64>;
