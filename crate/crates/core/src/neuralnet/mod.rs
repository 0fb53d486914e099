//! Minimal dense network engine used by the adversarial estimators.
//!
//! Everything runs in `f64`. Networks are plain values: cloning one gives an
//! independent copy, and nothing is shared between instances.

mod gradcheck;
mod mlp;
mod optim;

pub use gradcheck::{relative_error, run_gradcheck, GradCheckConfig, GradCheckReport};
pub use mlp::{Activation, DenseLayer, ForwardCache, Gradients, Mlp, MlpParams, MlpSpec};
pub use optim::{
    lr_at, RmsPropState, ScheduleConfig, ScheduleMode, DEFAULT_RMSPROP_DECAY, DEFAULT_RMSPROP_EPS,
    LR_FLOOR,
};
