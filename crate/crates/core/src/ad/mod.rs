//! Reverse-mode differentiation, the rectified Q network and its optimizers.

mod kernels;
pub mod net;
pub mod optim;
pub mod tape;

pub use net::{
    decode_params, encode_params, grad, load_params, save_params, Dense, NetParams, NetShape,
    DEFAULT_HIDDEN,
};
pub use optim::{clip_global_norm, sgd_step, Adam};
pub use tape::{Gradients, Tape, Var};
