//! Feed-forward regressors for the time-reversal model and the forward
//! dynamics model.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod models;

pub use adam::{optimizer_step, AdamConfig, AdamState};
pub use checkpoint::{read_dynamics, read_trm, write_dynamics, write_trm};
pub use mlp::{gradient_check, Mlp};
pub use models::{
    dynamics_architecture, dynamics_heldout_error, dynamics_rollout, train_dynamics, trm_architecture, train_trm, trm_predict, DynamicsModel, Standardizer, TrainConfig,
    TrainReport, TrmModel,
};
