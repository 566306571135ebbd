//! Safe deep-reinforcement-learning resource allocation for wireless
//! networked control.
//!
//! Every node picks a blocklength per frame. The [`optimality`] stage turns a
//! blocklength into the optimal sampling period and packet error probability,
//! the [`safety`] teacher projects unsafe joint actions onto the feasible set,
//! and the [`agent`] module learns blocklength policies with dueling double
//! Q-networks. [`harness`] runs complete experiments.

pub mod agent;
pub mod channel;
pub mod env;
pub mod error;
pub mod fbl;
pub mod harness;
pub mod nn;
pub mod optimality;
pub mod params;
pub mod rng;
pub mod safety;

pub use error::{ConfigError, Error, MathError, Result};
pub use params::{NetworkParams, NodeRadioProfile};
