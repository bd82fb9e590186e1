//! Sleep-quality analysis from wrist electrodermal activity and actigraphy.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actigraphy;
pub mod causal;
pub mod eda_features;
pub mod exec;
pub mod factors;
pub mod ingest;
pub mod linalg;
pub mod optim;
pub mod pipeline;
pub mod predictors;
pub mod sem;
pub mod stats;
pub mod synth;

pub use exec::Exec;
