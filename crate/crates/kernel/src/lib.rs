//! Minimal differentiable `f64` kernel.
//!
//! Values are dense [`Tensor`]s. A forward pass records operations on a
//! [`Tape`]; [`Tape::backward`] returns gradients for every recorded value.
//! Layers in [`layers`] keep their weights in a [`ParamStore`], which
//! [`AdamState`] updates in place. [`gradcheck`] compares analytic gradients
//! against central finite differences.
//!
//! ```
//! use sleepcast_kernel::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.input(Tensor::from_vec(vec![-1.0, 2.0]));
//! let y = tape.relu(x);
//! let s = tape.weighted_sum(y, vec![1.0, 1.0]).unwrap();
//! let grads = tape.backward(s).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.0]);
//! ```

mod adam;
mod error;
pub mod gradcheck;
pub mod layers;
pub mod ops;
mod param;
mod rng;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use error::{KernelError, Result};
pub use gradcheck::{grad_check, grad_check_params, GradCheckReport, HasParams};
pub use layers::{ForwardCtx, Mode};
pub use param::{Buffer, BufferId, ParamId, ParamStore, Parameter};
pub use rng::{derive_seed, Rng};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
