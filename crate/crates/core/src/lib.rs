pub mod autograd;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
mod kernels;
pub mod losses;
pub mod nets;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
