//! Newton, pseudo-Newton and gradient-descent backpropagation for
//! holomorphic complex-valued multilayer perceptrons.
//!
//! Derivatives are taken in the Wirtinger sense: a weight `w` and its
//! conjugate `w̄` are treated as independent variables, and the real error
//! `E` is minimized over both. The [`oracle`] module recomputes every
//! analytic derivative by finite differences so new activations can be
//! checked the same way.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod error;
pub mod grad;
pub mod io;
pub mod linalg;
pub mod network;
pub mod newton;
pub mod oracle;
pub mod par;
pub mod steplength;
pub mod trainer;

pub use activation::Activation;
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, SolverKind, C64};
pub use network::{Dataset, NetworkTopology, Sample, WeightSet};
pub use steplength::{StepConfig, StepMode};
pub use trainer::{Method, TrainConfig, TrialOutcome, TrialRecord, TrialStats};
