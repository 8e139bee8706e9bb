//! Minimal differentiable numeric core: tensors, convolution, resampling,
//! pointwise maps, a parameter registry, and finite-difference checking.

pub mod conv;
pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod resize;
pub mod tensor;

pub use conv::{conv2d, ConvParams, Padding};
pub use gradcheck::grad_check;
pub use params::{Init, ParamRegistry};
pub use resize::bilinear_resize;
pub use tensor::Tensor;
