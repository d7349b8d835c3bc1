//! Dense-network machinery: layers, backprop, Adam, seeded randomness and
//! finite-difference gradient checking. All arithmetic is `f64`.

mod adam;
mod gradcheck;
mod mlp;
mod rng;

pub use adam::AdamState;
pub use gradcheck::{gradient_check, gradient_check_with, GradCheck, Stencil};
pub use mlp::{
    flatten_layers, sigmoid, Activation, ForwardPass, Gradients, LayerParams, LayerSnapshot, Mlp, MlpSnapshot,
};
pub use rng::{mix, Rng};
