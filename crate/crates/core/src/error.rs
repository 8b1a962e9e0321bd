use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("photon slot {slot} out of range for a {n_photons}-photon state")]
    SlotOutOfRange { slot: usize, n_photons: usize },
    #[error("photon counts differ: {left} vs {right}")]
    PhotonCountMismatch { left: usize, right: usize },
    #[error("expected a {expected}-photon state, got {actual}")]
    WrongPhotonCount { expected: usize, actual: usize },
    #[error("Bell projection needs two distinct slots, got {0} twice")]
    DuplicateSlot(usize),
    #[error("time-bin index {0} outside 0..3")]
    InvalidTimeBin(usize),
    #[error("mode assignment has {got} labels for a {n_photons}-photon state")]
    LabelCount { got: usize, n_photons: usize },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("state must hold at least one photon")]
    NoPhotons,
    #[error("{name} = {value} is not a probability")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("trial count must be at least 1")]
    NoTrials,
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}
