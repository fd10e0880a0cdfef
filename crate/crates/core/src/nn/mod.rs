//! Small feed-forward network with explicit backward passes and Adam.

mod adam;
mod head;
mod layer;
mod loss;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use head::{GrowingHead, HeadBlock, HEAD_INIT_STD};
pub use layer::{AdapterLinear, LoraPair};
pub use loss::{cross_entropy, cross_entropy_within, half_squared_error, LossKind};
pub use mlp::{ForwardCache, Grads, Mlp};
