//! Crowd-navigation simulation and uncertainty-aware planning toolkit.
//!
//! The pipeline: a deterministic crowd simulator (ORCA or social-force
//! pedestrians), constant-velocity trajectory prediction, online conformal
//! calibration of prediction-error radii, intrusion-based safety costs, and a
//! PPO-Lagrangian trainer that holds mean episodic cost at a configurable
//! limit. A benchmark harness computes the standard crowd-navigation metric
//! suite over scenario variants, including three distribution-shift families.

pub mod baselines;
pub mod conformal;
pub mod crowd;
pub mod geom;
pub mod metrics;
pub mod policy;
pub mod prediction;
pub mod runner;
pub mod safety;
pub mod trace;
pub mod trainer;
pub mod world;
