//! Third-order tensor completion in the tensor-train (TT) format.
//!
//! The crate provides:
//!
//! * dense and sampled third-order tensors with a fixed column-major
//!   unfolding convention ([`tensor`]),
//! * TT decompositions: TT-SVD, rounding, entry evaluation, and the gauged
//!   representation with simultaneous orthogonality conditions ([`tt`]),
//! * tangent-space and tangent-cone machinery on the fixed-rank TT
//!   manifold: projections, the six-term cone decomposition, retraction and
//!   transport ([`manifold`]),
//! * a Riemannian conjugate-gradient solver for masked least-squares
//!   completion ([`completion`]),
//! * rank estimation from the singular-value gaps of the two gradient side
//!   matrices ([`rank`]).

pub mod completion;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod rank;
pub mod tensor;
pub mod tt;

pub use error::{Error, Result};
pub use tensor::{DenseTensor3, Dims, SampleSet};
pub use tt::{GaugedTT, TTTensor};
