//! Constant-product AMM simulator for comparing fee policies.
//!
//! The crate is organised bottom-up: [`amm`] holds the pool math, [`fees`]
//! the fee policies, [`agents`] the informed and uninformed traders,
//! [`price_feed`] the price paths, [`metrics`] the markout accounting and
//! result tables, and [`sim`] ties them into a block loop. [`config`]
//! describes a whole experiment and [`rng`] derives its random streams.

pub mod agents;
pub mod amm;
pub mod config;
pub mod error;
pub mod fees;
pub mod metrics;
pub mod price_feed;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
