//! Quadrotor with a cable-suspended payload: hybrid taut/slack dynamics,
//! collective-thrust/body-rate actuation, observation and reward design,
//! domain randomization, a PPO learner and an evaluation harness.

pub mod actuation;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod evaluation;
pub mod learning;
pub mod math;
pub mod randomization;
pub mod reference;
pub mod reward;
pub mod sensing;

pub use error::{Error, Result};
