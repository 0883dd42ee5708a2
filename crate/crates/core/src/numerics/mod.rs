//! Dense kernels, the finite-difference oracle and the binary tensor
//! container shared by every other module.

mod gradcheck;
pub mod io;
mod ops;
mod scalar;
mod tensor;

pub use gradcheck::{finite_difference_gradient, relative_error};
pub use ops::{
    concat_feature_dim, gelu, gelu_backward, gelu_scalar, linear, linear_backward,
    linear_backward_params, max_pool_2x2, max_pool_2x2_backward, split_feature_dim, LinearGrads,
};
pub use scalar::Scalar;
pub use tensor::{GradPair, Tensor};
