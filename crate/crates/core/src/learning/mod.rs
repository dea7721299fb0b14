//! Policy networks, PPO and the training loop.

pub mod adam;
pub mod checkpoint;
pub mod gae;
pub mod network;
pub mod policy;
pub mod ppo;
pub mod train;

pub use adam::{clip_grad_norm, Adam};
pub use gae::{gae_advantages, normalize};
pub use network::{ForwardCache, Network, NetworkSpec};
pub use policy::{policy_act, ActOutput, PolicyParams};
pub use ppo::{ppo_update, PpoConfig, RolloutBatch, UpdateStats};
pub use train::{train, BanditEnv, IterationLog, TrainConfig, TrainOutcome};
