//! Command-line front end for the time-bin distribution simulator.

pub mod commands;
pub mod config;
pub mod report;
