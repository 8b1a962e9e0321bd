//! Seeded Monte Carlo over random channel birefringence, loss and detection.
//!
//! Trial `i` draws from its own ChaCha8 stream (`seed`, stream `i`), and
//! trials are folded in fixed-size batches whose partial tallies are merged
//! in index order. Parallel and sequential execution therefore produce
//! bit-identical statistics.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::ChannelParams;
use crate::protocol::run_distribution;
use crate::repeater::{p_pur_from_cos2, run_repeater, swap_success_prob, RepeaterParams};

/// Trials folded sequentially inside one work item.
pub const BATCH_SIZE: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamDistribution {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sigma: f64 },
}

impl ParamDistribution {
    pub fn full_circle() -> Self {
        ParamDistribution::Uniform { lo: 0.0, hi: TAU }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ParamDistribution::Fixed(v) if !v.is_finite() => {
                Err(Error::InvalidDistribution(format!("fixed value {v} is not finite")))
            }
            ParamDistribution::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                Err(Error::InvalidDistribution(format!("uniform bounds [{lo}, {hi}]")))
            }
            ParamDistribution::Gaussian { mean, sigma } if !(mean.is_finite() && sigma.is_finite() && sigma >= 0.0) => {
                Err(Error::InvalidDistribution(format!("gaussian mean {mean}, sigma {sigma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ParamDistribution::Fixed(v) => v,
            ParamDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ParamDistribution::Gaussian { mean, sigma } => Normal::new(mean, sigma)
                .expect("validated sigma")
                .sample(rng),
        }
    }

    /// Closed-form `E[cos²x]` under this distribution.
    pub fn mean_cos2(&self) -> f64 {
        match *self {
            ParamDistribution::Fixed(v) => v.cos().powi(2),
            ParamDistribution::Uniform { lo, hi } => {
                // sin 2b − sin 2a = 2 cos(a+b) sin(b−a), stable for narrow intervals
                let width = hi - lo;
                let sinc = if width == 0.0 { 1.0 } else { width.sin() / width };
                0.5 + 0.5 * (hi + lo).cos() * sinc
            }
            ParamDistribution::Gaussian { mean, sigma } => {
                0.5 * (1.0 + (2.0 * mean).cos() * (-2.0 * sigma * sigma).exp())
            }
        }
    }
}

/// Independent distributions for the three birefringence parameters of one
/// fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelDistribution {
    pub theta: ParamDistribution,
    pub phi: ParamDistribution,
    pub chi: ParamDistribution,
}

impl Default for ChannelDistribution {
    fn default() -> Self {
        ChannelDistribution {
            theta: ParamDistribution::full_circle(),
            phi: ParamDistribution::full_circle(),
            chi: ParamDistribution::full_circle(),
        }
    }
}

impl ChannelDistribution {
    /// θ pinned, phases uniform over the circle.
    pub fn fixed_theta(theta: f64) -> Self {
        ChannelDistribution {
            theta: ParamDistribution::Fixed(theta),
            ..ChannelDistribution::default()
        }
    }

    pub fn fixed(p: ChannelParams) -> Self {
        ChannelDistribution {
            theta: ParamDistribution::Fixed(p.theta),
            phi: ParamDistribution::Fixed(p.phi),
            chi: ParamDistribution::Fixed(p.chi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.theta.validate()?;
        self.phi.validate()?;
        self.chi.validate()
    }
}

pub fn sample_params<R: Rng + ?Sized>(dist: &ChannelDistribution, rng: &mut R) -> ChannelParams {
    let theta = dist.theta.sample(rng);
    let phi = dist.phi.sample(rng);
    let chi = dist.chi.sample(rng);
    ChannelParams { theta, phi, chi }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// Single segment, pre-loss: success is the gated coincidence.
    Distribution { channels: [ChannelDistribution; 2] },
    Repeater {
        channels: [ChannelDistribution; 4],
        params: RepeaterParams,
        detect_endpoints: bool,
    },
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        match self {
            Experiment::Distribution { channels } => channels.iter().try_for_each(|c| c.validate()),
            Experiment::Repeater { channels, params, .. } => {
                channels.iter().try_for_each(|c| c.validate())?;
                params.validate()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing over batches. Falls back to sequential when the
    /// `parallel` feature is disabled.
    #[default]
    Parallel,
}

/// Streaming success/fidelity tally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tally {
    pub trials: u64,
    pub successes: u64,
    fidelity_sum: f64,
    fidelity_min: f64,
    fidelity_max: f64,
}

impl Default for Tally {
    fn default() -> Self {
        Tally {
            trials: 0,
            successes: 0,
            fidelity_sum: 0.0,
            fidelity_min: f64::INFINITY,
            fidelity_max: f64::NEG_INFINITY,
        }
    }
}

impl Tally {
    pub fn record(&mut self, fidelity: Option<f64>) {
        self.trials += 1;
        if let Some(f) = fidelity {
            self.successes += 1;
            self.fidelity_sum += f;
            self.fidelity_min = self.fidelity_min.min(f);
            self.fidelity_max = self.fidelity_max.max(f);
        }
    }

    pub fn record_bool(&mut self, success: bool) {
        self.trials += 1;
        if success {
            self.successes += 1;
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.trials += other.trials;
        self.successes += other.successes;
        self.fidelity_sum += other.fidelity_sum;
        self.fidelity_min = self.fidelity_min.min(other.fidelity_min);
        self.fidelity_max = self.fidelity_max.max(other.fidelity_max);
    }

    pub fn stats(&self) -> RunStats {
        let n = self.trials as f64;
        let mean = if self.trials == 0 { 0.0 } else { self.successes as f64 / n };
        let std_err = if self.trials == 0 {
            0.0
        } else {
            (mean * (1.0 - mean) / n).sqrt()
        };
        let has_fid = self.successes > 0 && self.fidelity_min.is_finite();
        RunStats {
            trials: self.trials,
            successes: self.successes,
            mean_success: mean,
            std_err,
            fidelity_min: has_fid.then_some(self.fidelity_min),
            fidelity_mean: has_fid.then(|| self.fidelity_sum / self.successes as f64),
            fidelity_max: has_fid.then_some(self.fidelity_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub trials: u64,
    pub successes: u64,
    pub mean_success: f64,
    /// `√(p̂(1−p̂)/n)`.
    pub std_err: f64,
    /// Fidelity over successful trials; `None` when there were none or the
    /// experiment does not track fidelity.
    pub fidelity_min: Option<f64>,
    pub fidelity_mean: Option<f64>,
    pub fidelity_max: Option<f64>,
}

impl RunStats {
    pub fn from_counts(trials: u64, successes: u64) -> Self {
        Tally {
            trials,
            successes,
            ..Tally::default()
        }
        .stats()
    }

    /// `|mean − expected| ≤ k·std_err`, with exact agreement required when
    /// the standard error vanishes.
    pub fn within_sigma(&self, expected: f64, k: f64) -> bool {
        let diff = (self.mean_success - expected).abs();
        if self.std_err == 0.0 {
            diff <= 1e-12
        } else {
            diff <= k * self.std_err
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeaterStats {
    pub segment_a: RunStats,
    pub segment_b: RunStats,
    /// BSM success conditioned on both segments passing.
    pub bsm: RunStats,
    pub end_to_end: RunStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ExperimentStats {
    Distribution(RunStats),
    Repeater(RepeaterStats),
}

#[derive(Debug, Clone, Copy, Default)]
struct RepeaterTally {
    segment_a: Tally,
    segment_b: Tally,
    bsm: Tally,
    end_to_end: Tally,
}

impl RepeaterTally {
    fn merge(&mut self, other: &RepeaterTally) {
        self.segment_a.merge(&other.segment_a);
        self.segment_b.merge(&other.segment_b);
        self.bsm.merge(&other.bsm);
        self.end_to_end.merge(&other.end_to_end);
    }
}

/// RNG for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn batched<T, F, M>(n: u64, exec: Execution, init: T, batch: F, merge: M) -> T
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> T + Sync + Send,
    M: Fn(&mut T, &T),
{
    let n_batches = n.div_ceil(BATCH_SIZE);
    let range = |b: u64| b * BATCH_SIZE..((b + 1) * BATCH_SIZE).min(n);
    let partials: Vec<T> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n_batches).into_par_iter().map(|b| batch(range(b))).collect()
        }
        _ => (0..n_batches).map(|b| batch(range(b))).collect(),
    };
    partials.iter().fold(init, |mut acc, p| {
        merge(&mut acc, p);
        acc
    })
}

/// Scheme-(a) trials: sample both fibers, run the exact pipeline, then draw
/// the gate outcome with its Born probability.
pub fn run_distribution_trials(
    channels: &[ChannelDistribution; 2],
    n: u64,
    seed: u64,
    exec: Execution,
) -> Result<RunStats> {
    if n == 0 {
        return Err(Error::NoTrials);
    }
    channels.iter().try_for_each(|c| c.validate())?;
    let tally = batched(
        n,
        exec,
        Tally::default(),
        |range| {
            let mut t = Tally::default();
            for i in range {
                let mut rng = trial_rng(seed, i);
                let c1 = sample_params(&channels[0], &mut rng);
                let c2 = sample_params(&channels[1], &mut rng);
                let outcome = run_distribution(&c1, &c2);
                let passed = rng.random::<f64>() < outcome.success_prob;
                t.record(passed.then_some(outcome.fidelity_phi_plus));
            }
            t
        },
        |acc, p| acc.merge(p),
    );
    Ok(tally.stats())
}

pub fn run_repeater_trials(
    channels: &[ChannelDistribution; 4],
    params: &RepeaterParams,
    detect_endpoints: bool,
    n: u64,
    seed: u64,
    exec: Execution,
) -> Result<RepeaterStats> {
    if n == 0 {
        return Err(Error::NoTrials);
    }
    channels.iter().try_for_each(|c| c.validate())?;
    params.validate()?;
    let tally: Result<RepeaterTally> = batched(
        n,
        exec,
        Ok(RepeaterTally::default()),
        |range| {
            let mut t = RepeaterTally::default();
            for i in range {
                let mut rng = trial_rng(seed, i);
                let sampled = [
                    sample_params(&channels[0], &mut rng),
                    sample_params(&channels[1], &mut rng),
                    sample_params(&channels[2], &mut rng),
                    sample_params(&channels[3], &mut rng),
                ];
                let trial = run_repeater(&sampled, params, detect_endpoints, &mut rng)?;
                t.segment_a.record_bool(trial.segment_a);
                t.segment_b.record_bool(trial.segment_b);
                if trial.bsm_attempted {
                    t.bsm.record_bool(trial.bsm_success);
                }
                t.end_to_end.record(trial.fidelity);
            }
            Ok(t)
        },
        |acc: &mut Result<RepeaterTally>, p: &Result<RepeaterTally>| match (acc, p) {
            (Ok(a), Ok(p)) => a.merge(p),
            (acc @ Ok(_), Err(e)) => *acc = Err(e.clone()),
            (Err(_), _) => {}
        },
    );
    let t = tally?;
    Ok(RepeaterStats {
        segment_a: t.segment_a.stats(),
        segment_b: t.segment_b.stats(),
        bsm: t.bsm.stats(),
        end_to_end: t.end_to_end.stats(),
    })
}

pub fn run_trials(experiment: &Experiment, n: u64, seed: u64, exec: Execution) -> Result<ExperimentStats> {
    experiment.validate()?;
    match experiment {
        Experiment::Distribution { channels } => {
            run_distribution_trials(channels, n, seed, exec).map(ExperimentStats::Distribution)
        }
        Experiment::Repeater {
            channels,
            params,
            detect_endpoints,
        } => run_repeater_trials(channels, params, *detect_endpoints, n, seed, exec)
            .map(ExperimentStats::Repeater),
    }
}

/// Closed-form predictions for an experiment's Monte Carlo rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Analytic {
    /// Gated-coincidence probability of a distribution experiment, or the
    /// per-segment purified-pair rate of each repeater segment.
    pub segment_a: f64,
    pub segment_b: Option<f64>,
    pub swap: Option<f64>,
    pub end_to_end: f64,
}

pub fn analytic(experiment: &Experiment) -> Analytic {
    match experiment {
        Experiment::Distribution { channels } => {
            let p = channels[0].theta.mean_cos2() * channels[1].theta.mean_cos2();
            Analytic {
                segment_a: p,
                segment_b: None,
                swap: None,
                end_to_end: p,
            }
        }
        Experiment::Repeater {
            channels,
            params,
            detect_endpoints,
        } => {
            let seg = |l: &ChannelDistribution, r: &ChannelDistribution| {
                p_pur_from_cos2(params.zeta, params.p_source, l.theta.mean_cos2(), r.theta.mean_cos2())
            };
            let a = seg(&channels[0], &channels[1]);
            let b = seg(&channels[2], &channels[3]);
            let swap = swap_success_prob(params.eta);
            let endpoints = if *detect_endpoints { params.eta * params.eta } else { 1.0 };
            Analytic {
                segment_a: a,
                segment_b: Some(b),
                swap: Some(swap),
                end_to_end: a * b * swap * endpoints,
            }
        }
    }
}

/// Human-facing digest of a [`RunStats`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: u64,
    pub successes: u64,
    pub mean: f64,
    pub std_err: f64,
    /// `mean ± 3·std_err`, clipped to `[0, 1]`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub fidelity_min: Option<f64>,
    pub fidelity_mean: Option<f64>,
    pub fidelity_max: Option<f64>,
    pub analytic: Option<f64>,
}

pub fn summarize(stats: &RunStats, analytic: Option<f64>) -> Summary {
    Summary {
        trials: stats.trials,
        successes: stats.successes,
        mean: stats.mean_success,
        std_err: stats.std_err,
        ci_low: (stats.mean_success - 3.0 * stats.std_err).max(0.0),
        ci_high: (stats.mean_success + 3.0 * stats.std_err).min(1.0),
        fidelity_min: stats.fidelity_min,
        fidelity_mean: stats.fidelity_mean,
        fidelity_max: stats.fidelity_max,
        analytic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn fixed_always_returns_value() {
        let mut rng = trial_rng(1, 0);
        let d = ParamDistribution::Fixed(FRAC_PI_4);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), FRAC_PI_4);
        }
    }

    #[test]
    fn invalid_distributions() {
        assert!(ParamDistribution::Uniform { lo: 1.0, hi: 0.0 }.validate().is_err());
        assert!(ParamDistribution::Gaussian { mean: 0.0, sigma: -1.0 }.validate().is_err());
        assert!(ParamDistribution::Fixed(f64::NAN).validate().is_err());
        assert!(ParamDistribution::full_circle().validate().is_ok());
    }

    #[test]
    fn summarize_binomial() {
        let s = summarize(&RunStats::from_counts(1000, 250), Some(0.25));
        assert_eq!(s.mean, 0.25);
        // √(0.25·0.75/1000)
        assert_abs_diff_eq!(s.std_err, 0.013_693_063_937_629_153, epsilon = 1e-15);
        assert_eq!(s.analytic, Some(0.25));
        let zero = summarize(&RunStats::from_counts(10, 0), None);
        assert_eq!((zero.mean, zero.std_err), (0.0, 0.0));
        assert!(zero.fidelity_min.is_none());
    }

    #[test]
    fn single_trial() {
        let stats = run_distribution_trials(&[ChannelDistribution::default(); 2], 1, 99, Execution::Sequential).unwrap();
        assert_eq!(stats.trials, 1);
        assert!(stats.successes <= 1);
    }

    #[test]
    fn zero_trials_rejected() {
        assert_eq!(
            run_distribution_trials(&[ChannelDistribution::default(); 2], 0, 1, Execution::Sequential),
            Err(Error::NoTrials)
        );
    }

    #[test]
    fn analytic_uniform_full_circle_is_quarter() {
        let e = Experiment::Distribution {
            channels: [ChannelDistribution::default(); 2],
        };
        assert_abs_diff_eq!(analytic(&e).end_to_end, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn tally_merge_matches_sequential_record() {
        let values = [Some(0.9), None, Some(1.0), Some(0.95), None];
        let mut whole = Tally::default();
        values.iter().for_each(|v| whole.record(*v));
        let mut left = Tally::default();
        let mut right = Tally::default();
        values[..2].iter().for_each(|v| left.record(*v));
        values[2..].iter().for_each(|v| right.record(*v));
        left.merge(&right);
        let (a, b) = (left.stats(), whole.stats());
        assert_eq!((a.trials, a.successes), (b.trials, b.successes));
        assert_eq!((a.fidelity_min, a.fidelity_max), (b.fidelity_min, b.fidelity_max));
        assert_abs_diff_eq!(a.fidelity_mean.unwrap(), b.fidelity_mean.unwrap(), epsilon = 1e-15);
    }
}
