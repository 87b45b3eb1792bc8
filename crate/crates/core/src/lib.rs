//! Time-reversal self-supervision for planar block mating.
//!
//! The pipeline runs outward from solved states: reset a block pair to a mated
//! configuration, push it apart at random, and keep the trajectories reversed.
//! A regressor trained on those reversed trajectories (the time-reversal model)
//! then predicts, from any scene, the sequence of states leading back to a
//! mated square. A cross-entropy-method planner with a learned forward model
//! chooses pushes that follow that prediction.
//!
//! Modules, bottom-up:
//!
//! - [`geometry`]: SE(2) poses, polygons, convex hulls, penetration queries.
//! - [`blocks`]: the catalog of pieces that tile a 3×3 square.
//! - [`sim`]: a deterministic quasi-static push simulator.
//! - [`data`]: reverse-exploration and random-transition collection, encodings,
//!   dataset files.
//! - [`learn`]: the feed-forward regressor, Adam, training, checkpoints.
//! - [`plan`]: CEM, the three planning costs, the closed-loop episode.
//! - [`bench`]: experiment harness, success-rate tables, PPM rendering.
//! - [`pipeline`]: file-based stages over an artifact directory.
//! - [`config`]: flat `key=value` configuration covering every module.

pub mod bench;
pub mod blocks;
pub mod config;
pub mod data;
pub mod geometry;
pub mod learn;
pub mod pipeline;
pub mod plan;
pub mod rng;
pub mod sim;

pub use blocks::{BlockPair, BlockShape, Piece};
pub use geometry::{Polygon, Pose2, Vec2};
pub use sim::{PushAction, SimConfig, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid block shape: {0}")]
    InvalidShape(String),
    #[error("invalid block pair: {0}")]
    InvalidPair(String),
    #[error("infeasible sampling: {0}")]
    Infeasible(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("degenerate angle encoding (norm {0:e})")]
    DegenerateAngle(f64),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("missing {0}")]
    Missing(String),
    #[error("unknown pair id {0}")]
    UnknownPair(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
