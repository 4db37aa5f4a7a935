//! Forecast-based charging for standalone PV-battery systems.
//!
//! The crate holds everything that is pure computation: the shared energy and
//! SOC model, day-ahead load and PV forecasting, the setpoint planner with its
//! safeguards, the hourly energy-balance simulator, and KPI/sweep analysis.
//! It is `no_std` (with `alloc`) so the planner can run on a site controller;
//! file formats and the command-line front end live in the `simctl` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod forecast;
mod math;
pub mod model;
pub mod simulator;
pub mod strategy;
pub mod time;

pub use model::{
    delta_soc, soc_after, BatterySpec, EfficiencyChain, HourlyTimeSeries, ModelError, SeriesKind,
    SiteConfig, SocDeltaTriplet,
};
pub use time::{Day, Hour};
