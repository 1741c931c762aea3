//! Aspect-level sentiment classification with gradient-supervised saliency.
//!
//! The numeric core ([`autodiff`], [`model`], [`attribution`], [`training`])
//! is generic over the scalar type; the aliases below fix it to `f64`, which
//! is what every tolerance in the test suite assumes.

pub mod attribution;
pub mod autodiff;
pub mod data;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod training;

pub use scalar::Real;

pub type Tensor64 = autodiff::Tensor<f64>;
pub type Tape64 = autodiff::Tape<f64>;
pub type Parameters64 = model::Parameters<f64>;
pub type SaliencyMap64 = attribution::SaliencyMap<f64>;

pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tape32 = autodiff::Tape<f32>;
pub type Parameters32 = model::Parameters<f32>;
