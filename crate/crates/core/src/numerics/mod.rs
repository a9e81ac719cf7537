//! Dense tensors, a small reverse-mode tape and the Adam optimizer.
//!
//! Only the operations the transformer needs are provided. All arithmetic is
//! 64-bit; every kernel is single-threaded with a fixed accumulation order, so
//! results are bit-identical between runs of the same build.

mod adam;
mod gradcheck;
mod graph;
pub mod kernels;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::{finite_difference_gradient, relative_error};
pub use graph::{Graph, Var};
pub use kernels::softmax_cross_entropy;
pub use tensor::{ParameterStore, Tensor};
