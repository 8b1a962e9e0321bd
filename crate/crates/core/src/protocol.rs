//! Single-segment distribution: encode a Φ⁺ pair, send each photon through
//! its own birefringent fiber, decode, and keep only coincidences in the
//! intermediate arrival bin.

use crate::optics::{channel_unitary, channel_unitary_binwise, decoder_unitary, encoder_unitary, ChannelParams};
use crate::qstate::{ModeOperator, PureState, TimeBin};

/// Arrival bin accepted by the stations' time gates.
pub const GATE_BIN: TimeBin = TimeBin::ONE;

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionOutcome {
    /// Two photons, both in the intermediate bin. `None` when nothing
    /// survives the gate.
    pub post_state: Option<PureState>,
    pub success_prob: f64,
    /// Fidelity of `post_state` to Φ⁺ in the intermediate bin; 0 when there
    /// is no post-selected state.
    pub fidelity_phi_plus: f64,
    /// Weight of every term with a photon too early or too late.
    pub omega_weight: f64,
}

pub fn encode(state: &PureState) -> PureState {
    state.apply_all(&encoder_unitary())
}

/// Photon `k` travels through the fiber described by `channels[k]`.
pub fn transmit(state: &PureState, channels: &[ModeOperator]) -> PureState {
    channels.iter().enumerate().fold(state.clone(), |s, (k, op)| {
        s.apply_single(k, op).expect("one channel per photon")
    })
}

pub fn decode(state: &PureState) -> PureState {
    state.apply_all(&decoder_unitary())
}

/// Total squared amplitude outside the all-intermediate sector.
pub fn omega_weight_of(state: &PureState) -> f64 {
    state
        .terms()
        .filter(|(labels, _)| labels.iter().any(|l| l.bin != GATE_BIN))
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

fn run_with_channels(c1: ModeOperator, c2: ModeOperator) -> DistributionOutcome {
    let source = PureState::bell_phi_plus(TimeBin::ZERO);
    let decoded = decode(&transmit(&encode(&source), &[c1, c2]));
    let omega = omega_weight_of(&decoded);
    let gated = decoded.post_select(|_, m| m.bin == GATE_BIN);
    let fidelity = gated
        .state
        .as_ref()
        .map(|s| {
            s.fidelity(&PureState::bell_phi_plus(GATE_BIN))
                .expect("two-photon states")
        })
        .unwrap_or(0.0);
    DistributionOutcome {
        post_state: gated.state,
        success_prob: gated.probability,
        fidelity_phi_plus: fidelity,
        omega_weight: omega,
    }
}

/// Full pipeline with steady-state fibers.
pub fn run_distribution(c1: &ChannelParams, c2: &ChannelParams) -> DistributionOutcome {
    run_with_channels(channel_unitary(c1), channel_unitary(c2))
}

/// Pipeline where each fiber may act differently on the early and late
/// components.
pub fn run_distribution_drifted(
    c1_early: &ChannelParams,
    c1_late: &ChannelParams,
    c2_early: &ChannelParams,
    c2_late: &ChannelParams,
) -> DistributionOutcome {
    run_with_channels(
        channel_unitary_binwise([*c1_early, *c1_late, *c1_late]),
        channel_unitary_binwise([*c2_early, *c2_late, *c2_late]),
    )
}

/// `cos²θ₁ · cos²θ₂`.
pub fn analytic_success_prob(theta1: f64, theta2: f64) -> f64 {
    let c1 = theta1.cos();
    let c2 = theta2.cos();
    c1 * c1 * c2 * c2
}

/// Rejected weight computed from the state pipeline.
pub fn omega_weight(c1: &ChannelParams, c2: &ChannelParams) -> f64 {
    run_distribution(c1, c2).omega_weight
}
