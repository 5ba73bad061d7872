//! Observation encoding, the stochastic policy with twin value heads, and
//! exact analytic gradients.

pub mod net;
pub mod nn;
pub mod obs;

pub use net::{
    config_hash, load_checkpoint, log_prob_and_entropy, save_checkpoint, CheckpointError,
    ObsBatch, PolicyConfig, PolicyOutputs, PolicyParams, ACTION_DIM, LOG_STD_MAX, LOG_STD_MIN,
};
pub use obs::{encode_observation, ObsLayout, Observation, ROBOT_DIM};
