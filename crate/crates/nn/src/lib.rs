//! Dense-tensor reverse-mode autodiff for small transformer models.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root pin the 64-bit variants used for training,
//! gradient checking and checkpoints.
//!
//! A forward pass records onto a [`tape::Tape`] that borrows the model's
//! [`params::ParamStore`]. `Tape::backward` walks the record in reverse and
//! returns [`tape::Gradients`], which are then folded back into the store and
//! consumed by [`optim::AdamW`].

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use error::{NnError, Result};
pub use optim::{lr_schedule, OptimizerConfig};
pub use params::ParamId;
pub use scalar::Scalar;
pub use tape::Var;

/// 64-bit tensor.
pub type Tensor = tensor::Tensor<f64>;
/// 32-bit tensor.
pub type TensorF32 = tensor::Tensor<f32>;
/// 64-bit tape borrowing a parameter store for `'p`.
pub type Tape<'p> = tape::Tape<'p, f64>;
pub type Gradients = tape::Gradients<f64>;
pub type Parameter = params::Parameter<f64>;
pub type ParamStore = params::ParamStore<f64>;
pub type AdamW = optim::AdamW<f64>;
