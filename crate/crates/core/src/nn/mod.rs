//! Dense tensors, tape-based reverse-mode differentiation, and Adam.

mod params;
mod tape;
mod tensor;

pub use params::{Adam, ParamId, ParameterSet};
pub use tape::{gaussian_entropy, sigmoid, softmax_in_place, Tape, Var, HALF_LN_TWO_PI};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} values")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("only tensors of rank <= 2 are supported, got shape {0:?}")]
    UnsupportedRank(Vec<usize>),
    #[error("expected a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
}
