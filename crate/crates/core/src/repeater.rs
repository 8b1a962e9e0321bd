//! Two-segment repeater: two gated distribution links joined by a Bell-state
//! measurement on the inner photons, plus closed-form throughput estimates
//! for this scheme and for the CNOT/QND-based linear-optics repeater it is
//! compared against.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::optics::{bit_flip, phase_flip, sample_detection, sample_loss, ChannelParams, DetectorParams, LossParams};
use crate::protocol::{run_distribution, GATE_BIN};
use crate::qstate::{BellState, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepeaterParams {
    /// Fidelity reduction with distance (comparator only).
    pub gamma: f64,
    /// Pair survival factor.
    pub zeta: f64,
    /// Probability that a source emits a pair in a given slot.
    pub p_source: f64,
    /// Detector efficiency.
    pub eta: f64,
    pub p_cnot: f64,
    pub p_qnd: f64,
}

impl Default for RepeaterParams {
    fn default() -> Self {
        RepeaterParams {
            gamma: 0.5,
            zeta: 0.5,
            p_source: 0.9,
            eta: 0.8,
            p_cnot: 0.25,
            p_qnd: 0.125,
        }
    }
}

impl RepeaterParams {
    pub fn validate(&self) -> Result<()> {
        check_probability("gamma", self.gamma)?;
        check_probability("zeta", self.zeta)?;
        check_probability("p_source", self.p_source)?;
        check_probability("eta", self.eta)?;
        check_probability("p_cnot", self.p_cnot)?;
        check_probability("p_qnd", self.p_qnd)
    }

    /// Every probability set to one.
    pub fn ideal() -> Self {
        RepeaterParams {
            gamma: 0.0,
            zeta: 1.0,
            p_source: 1.0,
            eta: 1.0,
            p_cnot: 1.0,
            p_qnd: 1.0,
        }
    }
}

/// The two Bell states a linear-optics analyzer can tell apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeraldedBell {
    PsiPlus,
    PsiMinus,
}

impl HeraldedBell {
    pub fn bell_state(self) -> BellState {
        match self {
            HeraldedBell::PsiPlus => BellState::PsiPlus,
            HeraldedBell::PsiMinus => BellState::PsiMinus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BsmOutcome {
    /// No coincidence, or a Φ± projection the analyzer cannot identify.
    Failed,
    Success {
        identified: HeraldedBell,
        /// Photons 1 and 4, renormalized.
        heralded_state: PureState,
    },
}

impl BsmOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, BsmOutcome::Success { .. })
    }
}

/// Bell-state measurement on photons 2 and 3 (slots 1 and 2) of a four-photon
/// state whose inner photons already sit in the gated bin.
pub fn bsm<R: Rng + ?Sized>(state4: &PureState, eta: f64, rng: &mut R) -> Result<BsmOutcome> {
    if state4.n_photons() != 4 {
        return Err(Error::WrongPhotonCount {
            expected: 4,
            actual: state4.n_photons(),
        });
    }
    let detector = DetectorParams::new(eta, GATE_BIN)?;
    let click2 = sample_detection(rng, &detector, GATE_BIN)?;
    let click3 = sample_detection(rng, &detector, GATE_BIN)?;
    if !(click2 && click3) {
        return Ok(BsmOutcome::Failed);
    }
    let psi_plus = state4.project_bell(1, 2, BellState::PsiPlus, GATE_BIN)?;
    let psi_minus = state4.project_bell(1, 2, BellState::PsiMinus, GATE_BIN)?;
    let u: f64 = rng.random();
    let (identified, selection) = if u < psi_plus.probability {
        (HeraldedBell::PsiPlus, psi_plus)
    } else if u < psi_plus.probability + psi_minus.probability {
        (HeraldedBell::PsiMinus, psi_minus)
    } else {
        return Ok(BsmOutcome::Failed);
    };
    match selection.state {
        Some(heralded_state) => Ok(BsmOutcome::Success {
            identified,
            heralded_state,
        }),
        None => Ok(BsmOutcome::Failed),
    }
}

/// Pauli fix-up on photon 4 after the heralded outcome arrives: X for Ψ⁺,
/// X then Z for Ψ⁻. Both map the heralded state to Φ⁺ up to a global phase.
pub fn swap_correction(state: &PureState, identified: HeraldedBell) -> Result<PureState> {
    if state.n_photons() != 2 {
        return Err(Error::WrongPhotonCount {
            expected: 2,
            actual: state.n_photons(),
        });
    }
    let flipped = state.apply_single(1, &bit_flip())?;
    match identified {
        HeraldedBell::PsiPlus => Ok(flipped),
        HeraldedBell::PsiMinus => flipped.apply_single(1, &phase_flip()),
    }
}

/// `(1−γ)·ζ·P_S⁵·η⁸·P_CNOT²·P_QND`.
pub fn p_pur_kwd(params: &RepeaterParams) -> f64 {
    (1.0 - params.gamma)
        * params.zeta
        * params.p_source.powi(5)
        * params.eta.powi(8)
        * params.p_cnot.powi(2)
        * params.p_qnd
}

/// `ζ·p_S·cos²θ₁·cos²θ₂`.
pub fn p_pur(zeta: f64, p_source: f64, theta1: f64, theta2: f64) -> f64 {
    let c1 = theta1.cos();
    let c2 = theta2.cos();
    p_pur_from_cos2(zeta, p_source, c1 * c1, c2 * c2)
}

/// [`p_pur`] with the channel transmissions already squared.
pub fn p_pur_from_cos2(zeta: f64, p_source: f64, cos2_theta1: f64, cos2_theta2: f64) -> f64 {
    zeta * p_source * cos2_theta1 * cos2_theta2
}

/// `η²/2`: two-fold coincidence times the analyzer's one-half ceiling.
pub fn swap_success_prob(eta: f64) -> f64 {
    eta * eta / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RepeaterTrial {
    pub segment_a: bool,
    pub segment_b: bool,
    /// Both segments passed, so the inner photons were measured.
    pub bsm_attempted: bool,
    pub bsm_success: bool,
    /// End-to-end success: swap heralded and (optionally) outer photons detected.
    pub success: bool,
    /// Fidelity of the corrected photon-1,4 state to Φ⁺; set on success.
    pub fidelity: Option<f64>,
}

fn run_segment<R: Rng + ?Sized>(
    rng: &mut R,
    c_left: &ChannelParams,
    c_right: &ChannelParams,
    params: &RepeaterParams,
    loss: &LossParams,
) -> Result<Option<PureState>> {
    let fired = rng.random::<f64>() < params.p_source;
    let survived = sample_loss(rng, loss, 2)?.all_survived();
    let outcome = run_distribution(c_left, c_right);
    let gated = rng.random::<f64>() < outcome.success_prob;
    Ok(if fired && survived && gated {
        outcome.post_state
    } else {
        None
    })
}

/// One attempt of the two-segment protocol on fibers `channels[0..4]`
/// (photons 1‥4). With `detect_endpoints`, photons 1 and 4 must also click
/// at efficiency η for the trial to count.
pub fn run_repeater<R: Rng + ?Sized>(
    channels: &[ChannelParams; 4],
    params: &RepeaterParams,
    detect_endpoints: bool,
    rng: &mut R,
) -> Result<RepeaterTrial> {
    params.validate()?;
    let loss = LossParams::from_zeta(params.zeta)?;
    let seg_a = run_segment(rng, &channels[0], &channels[1], params, &loss)?;
    let seg_b = run_segment(rng, &channels[2], &channels[3], params, &loss)?;
    let mut trial = RepeaterTrial {
        segment_a: seg_a.is_some(),
        segment_b: seg_b.is_some(),
        ..RepeaterTrial::default()
    };
    let (Some(a), Some(b)) = (seg_a, seg_b) else {
        return Ok(trial);
    };
    trial.bsm_attempted = true;
    let BsmOutcome::Success {
        identified,
        heralded_state,
    } = bsm(&a.tensor(&b), params.eta, rng)?
    else {
        return Ok(trial);
    };
    trial.bsm_success = true;
    if detect_endpoints {
        let detector = DetectorParams::new(params.eta, GATE_BIN)?;
        let alice = sample_detection(rng, &detector, GATE_BIN)?;
        let bob = sample_detection(rng, &detector, GATE_BIN)?;
        if !(alice && bob) {
            return Ok(trial);
        }
    }
    let corrected = swap_correction(&heralded_state, identified)?;
    trial.success = true;
    trial.fidelity = Some(corrected.fidelity(&PureState::bell_phi_plus(GATE_BIN))?);
    Ok(trial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::TimeBin;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn reference_params(eta: f64) -> RepeaterParams {
        RepeaterParams {
            eta,
            ..RepeaterParams::default()
        }
    }

    #[test]
    fn kwd_rates() {
        // 0.25 · 0.59049 · 0.3⁸ · 0.0625 · 0.125
        assert_abs_diff_eq!(p_pur_kwd(&reference_params(0.3)), 7.566_806_425_781_248e-8, epsilon = 1e-20);
        assert_abs_diff_eq!(p_pur_kwd(&reference_params(0.8)), 1.934_917_632e-4, epsilon = 1e-16);
        assert_eq!(p_pur_kwd(&reference_params(0.0)), 0.0);
    }

    #[test]
    fn scheme_rates() {
        assert_eq!(p_pur_from_cos2(0.5, 0.9, 0.5, 0.5), 0.1125);
        assert_eq!(p_pur_from_cos2(0.5, 0.1, 0.5, 0.5), 0.0125);
        assert_eq!(p_pur(1.0, 1.0, 0.0, 0.0), 1.0);
        assert_abs_diff_eq!(p_pur(0.5, 0.9, FRAC_PI_4, FRAC_PI_4), 0.1125, epsilon = 1e-15);
    }

    #[test]
    fn swap_rates() {
        assert_eq!(swap_success_prob(1.0), 0.5);
        assert_abs_diff_eq!(swap_success_prob(0.8), 0.32, epsilon = 1e-15);
        assert_eq!(swap_success_prob(0.0), 0.0);
    }

    #[test]
    fn corrections_restore_phi_plus() {
        let phi = PureState::bell_phi_plus(TimeBin::ONE);
        for h in [HeraldedBell::PsiPlus, HeraldedBell::PsiMinus] {
            let heralded = PureState::bell(h.bell_state(), TimeBin::ONE);
            let fixed = swap_correction(&heralded, h).unwrap();
            assert_abs_diff_eq!(fixed.fidelity(&phi).unwrap(), 1.0, epsilon = 1e-12);
        }
        // X is its own inverse: the Ψ⁺ fix-up sends Φ⁺ to Ψ⁺.
        let psi = PureState::bell(BellState::PsiPlus, TimeBin::ONE);
        let out = swap_correction(&phi, HeraldedBell::PsiPlus).unwrap();
        assert_abs_diff_eq!(out.fidelity(&psi).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn correction_needs_two_photons() {
        let four = PureState::bell_phi_plus(TimeBin::ONE).tensor(&PureState::bell_phi_plus(TimeBin::ONE));
        assert!(matches!(
            swap_correction(&four, HeraldedBell::PsiPlus),
            Err(Error::WrongPhotonCount { expected: 2, actual: 4 })
        ));
    }

    #[test]
    fn bsm_rejects_wrong_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pair = PureState::bell_phi_plus(TimeBin::ONE);
        assert!(matches!(
            bsm(&pair, 1.0, &mut rng),
            Err(Error::WrongPhotonCount { expected: 4, actual: 2 })
        ));
    }

    #[test]
    fn bsm_blind_detectors_never_succeed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pair = PureState::bell_phi_plus(TimeBin::ONE);
        let four = pair.tensor(&pair);
        for _ in 0..1000 {
            assert!(!bsm(&four, 0.0, &mut rng).unwrap().is_success());
        }
    }

    #[test]
    fn blocked_channel_never_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut channels = [ChannelParams::IDENTITY; 4];
        channels[2].theta = FRAC_PI_2;
        for _ in 0..1000 {
            let t = run_repeater(&channels, &RepeaterParams::ideal(), false, &mut rng).unwrap();
            assert!(!t.success && !t.segment_b && !t.bsm_attempted);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = RepeaterParams {
            eta: 1.2,
            ..RepeaterParams::default()
        };
        assert!(run_repeater(&[ChannelParams::IDENTITY; 4], &params, false, &mut rng).is_err());
    }
}
