//! Transactive EV fleet simulator: preference-aware charge/discharge
//! scheduling, four-point market bids, and a two-settlement retail market
//! (rolling hourly day-ahead plus 5-minute real-time) cleared against a
//! parametric supply curve.

pub mod bidding;
pub mod config;
pub mod control;
pub mod error;
pub mod ev_model;
pub mod market;
pub mod metrics;
pub mod plot;
pub mod qp;
pub mod scheduler;
pub mod sim;

pub use error::{Error, Result};
