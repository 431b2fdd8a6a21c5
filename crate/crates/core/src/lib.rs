//! Online binary computation offloading for wireless powered mobile-edge
//! computing.
//!
//! A policy network relaxes each frame's channel gains into a point of
//! `(0,1)^N`, a quantizer turns it into a short list of binary offloading
//! actions, and an exact convex solver scores each one. The best action is
//! replayed to train the policy.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod policy;
pub mod quantizer;
pub mod rng;
pub mod solver;
pub mod system;

pub use agent::{run_episode, Agent, AgentConfig, FrameResult, KMode};
pub use baselines::{all_edge, all_local, coordinate_descent, exhaustive_opt, BaselineKind};
pub use channel::{make_topology, sample_frame, EpisodeSpec, Topology};
pub use error::{Error, Result};
pub use policy::{PolicyNet, ReplayMemory, TrainConfig};
pub use quantizer::{knn_quantize, order_preserving_quantize, quantize, QuantizerKind, RelaxedAction};
pub use solver::{grid_oracle_p2, solve_p2, SolveMethod, SolverConfig};
pub use system::{AllocationResult, ChannelFrame, OffloadAction, SystemParams};
