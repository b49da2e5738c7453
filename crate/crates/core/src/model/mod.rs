//! Layer-structured parameters, the small perceptron used for classification
//! experiments and its SGD trainer.

pub mod mlp;
mod params;
mod train;

pub use params::{init_model, ArchSpec, Gradient, Layer, LayerSpec, LayeredParams};
pub use train::{
    evaluate, local_train, sgd, Classification, Constrained, Evaluation, LrSchedule, Objective,
    Quadratic, TrainingConfig,
};
