//! Reverse-mode automatic differentiation over small dense tensors.
//!
//! The backward pass is itself recorded with tape primitives, so a gradient
//! obtained with [`Tape::grad_graph`] is an ordinary [`Var`] that can be fed
//! into further computation and differentiated again.

mod check;
mod tape;
mod tensor;

pub use check::{check_gradient, GradientCheck};
pub use tape::{Node, Op, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tensor::softmax_values;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape {shape:?} does not hold {len} values")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("gradient target must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("node {0} is not on this tape")]
    UnknownNode(usize),
    #[error("unknown op tag `{0}`")]
    UnknownOp(String),
    #[error("{op} expects {expected} inputs, got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
