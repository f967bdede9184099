//! Trainable layers over correlation matrices with exact reverse-mode
//! gradients.

pub mod activation;
pub mod fc;
pub mod hyperplane;
pub mod loss;
pub mod mlr;
pub mod model;
pub mod ops;
pub mod params;
pub mod poincare;
pub mod tape;

pub use activation::{power_activation, tangent_relu, Activation};
pub use fc::{cor_conv, cor_fc, fc_logits, fc_outputs, phcm_fc};
pub use hyperplane::{assemble_prototype, prototype_coords};
pub use loss::{softmax, softmax_xent};
pub use mlr::{cor_mlr_logits, phcm_mlr};
pub use model::{Architecture, Example, Model, ModelVars, BLOCK_NAMES};
pub use params::{ConvParams, FcParams, MlrParams, ParamVars};
pub use tape::{Gradients, Tape, Var};
