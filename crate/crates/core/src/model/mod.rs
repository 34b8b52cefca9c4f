//! The conv-recurrent forecaster with a domain-classifier head, and the
//! baselines it is compared against.

mod checkpoint;
mod hyper;
mod network;

pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use hyper::{HyperParams, SearchSpace};
pub use network::{build_adast, build_baseline, param_count, BaselineKind, ConvStack, Dims, ForwardOut, Model, ModelKind};
