//! High-frequency limit-order-book analytics: message parsing, book
//! reconstruction, price-series cleaning, econometric feature
//! extraction, event-window labeling, and a small neural network stack
//! for training price-move predictors on the resulting feature matrix.
//!
//! Heavy per-window work is data-parallel via rayon when the default
//! `parallel` feature is enabled; disabling it yields a fully
//! sequential build with identical output.

pub mod book;
pub mod cleaning;
pub mod error;
pub mod features;
pub mod messages;
pub mod model;
pub mod pipeline;
pub mod protocol;
pub mod snapio;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
