//! Optical elements of the distribution link: encoder, birefringent fiber,
//! decoder, photon loss and gated detection.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Result};
use crate::qstate::{ModeLabel, ModeOperator, Polarization, TimeBin, BINS};

/// Birefringence of one fiber: `|H⟩ → e^{iφ}cosθ|H⟩ + e^{iχ}sinθ|V⟩`,
/// `|V⟩ → −e^{−iχ}sinθ|H⟩ + e^{−iφ}cosθ|V⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelParams {
    pub theta: f64,
    pub phi: f64,
    pub chi: f64,
}

impl ChannelParams {
    pub const IDENTITY: ChannelParams = ChannelParams {
        theta: 0.0,
        phi: 0.0,
        chi: 0.0,
    };

    pub fn new(theta: f64, phi: f64, chi: f64) -> Self {
        ChannelParams { theta, phi, chi }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.phi.is_finite() && self.chi.is_finite()
    }

    /// The 2×2 polarization rotation, columns `H`, `V`.
    pub fn polarization_matrix(&self) -> Matrix2<Complex64> {
        let (s, c) = self.theta.sin_cos();
        let e_phi = Complex64::from_polar(1.0, self.phi);
        let e_chi = Complex64::from_polar(1.0, self.chi);
        Matrix2::new(
            e_phi * c,
            -e_chi.conj() * s,
            e_chi * s,
            e_phi.conj() * c,
        )
    }
}

/// Fiber unitary, identical in every time bin.
pub fn channel_unitary(p: &ChannelParams) -> ModeOperator {
    ModeOperator::polarization(p.polarization_matrix())
}

/// Fiber unitary that differs per time bin; models drift faster than the
/// bin separation.
pub fn channel_unitary_binwise(per_bin: [ChannelParams; BINS]) -> ModeOperator {
    ModeOperator::per_bin(per_bin.map(|p| p.polarization_matrix()))
}

/// A Pockels cell that flips `H ↔ V` during a single time bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PockelsSchedule {
    pub active_bin: TimeBin,
}

impl PockelsSchedule {
    pub fn operator(&self) -> ModeOperator {
        let active = self.active_bin;
        ModeOperator::from_mode_map(|m| {
            if m.bin == active {
                ModeLabel::new(m.pol.flip(), m.bin)
            } else {
                m
            }
        })
    }
}

/// Unbalanced polarization interferometer: `H` takes the short arm and keeps
/// its bin, `V` takes the long arm and is delayed by one bin. The delay out of
/// the last bin wraps to the first so the truncated operator stays unitary;
/// no physical input reaches that row.
pub fn interferometer() -> ModeOperator {
    ModeOperator::from_mode_map(|m| match m.pol {
        Polarization::H => m,
        Polarization::V => ModeLabel::new(m.pol, m.bin.shifted()),
    })
}

/// Interferometer followed by a cell active in the late bin:
/// `|H,0⟩ → |H,0⟩`, `|V,0⟩ → |H,1⟩`.
pub fn encoder_unitary() -> ModeOperator {
    interferometer().then(
        &PockelsSchedule {
            active_bin: TimeBin::ONE,
        }
        .operator(),
    )
}

/// Cell active in the early bin followed by the interferometer:
/// `|H,0⟩ → |V,1⟩`, `|V,0⟩ → |H,0⟩`, `|H,1⟩ → |H,1⟩`, `|V,1⟩ → |V,2⟩`.
pub fn decoder_unitary() -> ModeOperator {
    PockelsSchedule {
        active_bin: TimeBin::ZERO,
    }
    .operator()
    .then(&interferometer())
}

/// Pauli X on polarization, every bin.
pub fn bit_flip() -> ModeOperator {
    ModeOperator::from_mode_map(|m| ModeLabel::new(m.pol.flip(), m.bin))
}

/// Pauli Z on polarization, every bin.
pub fn phase_flip() -> ModeOperator {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    ModeOperator::polarization(Matrix2::new(one, zero, zero, -one))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub per_photon_transmission: f64,
    pub zeta: f64,
}

impl LossParams {
    /// Split a pair-survival factor evenly over both photons.
    pub fn from_zeta(zeta: f64) -> Result<Self> {
        check_probability("zeta", zeta)?;
        Ok(LossParams {
            per_photon_transmission: zeta.sqrt(),
            zeta,
        })
    }

    pub fn lossless() -> Self {
        LossParams {
            per_photon_transmission: 1.0,
            zeta: 1.0,
        }
    }
}

/// Which photons of a trial reached their station.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurvivalMask(pub Vec<bool>);

impl SurvivalMask {
    pub fn all_survived(&self) -> bool {
        self.0.iter().all(|&s| s)
    }
}

pub fn sample_loss<R: Rng + ?Sized>(rng: &mut R, p: &LossParams, n_photons: usize) -> Result<SurvivalMask> {
    check_probability("per_photon_transmission", p.per_photon_transmission)?;
    Ok(SurvivalMask(
        (0..n_photons)
            .map(|_| rng.random::<f64>() < p.per_photon_transmission)
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub gate_bin: TimeBin,
}

impl DetectorParams {
    pub fn new(efficiency: f64, gate_bin: TimeBin) -> Result<Self> {
        check_probability("efficiency", efficiency)?;
        Ok(DetectorParams {
            efficiency,
            gate_bin,
        })
    }
}

/// Click with probability η when the photon lands inside the gate; never
/// outside it. Out-of-gate arrivals consume no randomness.
pub fn sample_detection<R: Rng + ?Sized>(rng: &mut R, d: &DetectorParams, arrival: TimeBin) -> Result<bool> {
    check_probability("efficiency", d.efficiency)?;
    if arrival != d.gate_bin {
        return Ok(false);
    }
    Ok(rng.random::<f64>() < d.efficiency)
}
