//! Exact and Monte Carlo simulation of Bell-pair distribution over
//! birefringent fibers using polarization/time-bin encoding, and of a
//! two-segment repeater built from it.
//!
//! - [`qstate`]: few-photon pure states over (polarization, time-bin) modes
//! - [`optics`]: encoder, fiber, decoder, loss and gated detection
//! - [`protocol`]: the single-segment pipeline and its success law
//! - [`repeater`]: Bell-state measurement, swap correction, throughput formulas
//! - [`montecarlo`]: seeded, batch-parallel trial engine

pub mod error;
pub mod montecarlo;
pub mod optics;
pub mod protocol;
pub mod qstate;
pub mod repeater;

pub use error::{Error, Result};
pub use montecarlo::{Execution, Experiment, RunStats};
pub use optics::ChannelParams;
pub use qstate::{BellState, ModeLabel, ModeOperator, Polarization, PureState, TimeBin};
pub use repeater::RepeaterParams;
