//! Large-margin unified machine (LUM) losses and their risk theory.

pub mod cli;
pub mod distributions;
pub mod error;
pub mod loss;
pub mod numeric;
pub mod pointwise;
pub mod risk;
pub mod trainer;
pub mod verifier;

pub use distributions::{DiscreteJoint, SampleSet};
pub use error::{LumError, Result};
pub use loss::{ExtendedParam, LumParams};
pub use pointwise::ExtendedReal;
pub use risk::{RiskReport, ScoreFunction};
