//! Discrete-time simulation of an IoT sensor network whose faults are only
//! visible through the Age of Information of its sensors, with deep
//! reinforcement-learning agents that decide when to maintain it.

pub mod agents;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod neural;
pub mod rng;

pub use error::{Error, Result};
