//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI, TAU};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use timebin::montecarlo::{
    run_distribution_trials, run_repeater_trials, sample_params, trial_rng, ChannelDistribution, Execution,
    ParamDistribution,
};
use timebin::optics::ChannelParams;
use timebin::protocol::run_distribution;
use timebin::qstate::{BellState, PureState, TimeBin};
use timebin::repeater::{p_pur_from_cos2, p_pur_kwd, RepeaterParams};

const FIDELITY_FLOOR: f64 = 1.0 - 1e-9;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn reference_params(eta: f64) -> RepeaterParams {
    RepeaterParams {
        gamma: 0.5,
        zeta: 0.5,
        p_source: 0.9,
        eta,
        p_cnot: 0.25,
        p_qnd: 0.125,
    }
}

fn error_freedom() -> Verdict {
    let start = Instant::now();
    let dist = ChannelDistribution::default();
    let mut worst = 1.0f64;
    let mut gated = 0;
    for i in 0..1000 {
        let mut rng = trial_rng(0xE44, i);
        let c1 = sample_params(&dist, &mut rng);
        let c2 = sample_params(&dist, &mut rng);
        let out = run_distribution(&c1, &c2);
        if out.post_state.is_some() {
            gated += 1;
            worst = worst.min(out.fidelity_phi_plus);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        gated > 0 && worst >= FIDELITY_FLOOR && elapsed < Duration::from_secs(5),
        format!("{gated} gated draws, min fidelity {worst:.15}, {elapsed:.2?}"),
    )
}

fn success_law() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..20 {
        for j in 0..20 {
            let t1 = PI * i as f64 / 19.0;
            let t2 = PI * j as f64 / 19.0;
            let c1 = ChannelParams::new(t1, 0.3 * i as f64, -0.7 * j as f64);
            let c2 = ChannelParams::new(t2, 1.1 - 0.2 * j as f64, 0.5 * i as f64);
            let expected = t1.cos().powi(2) * t2.cos().powi(2);
            worst = worst.max((run_distribution(&c1, &c2).success_prob - expected).abs());
        }
    }
    let stats = run_distribution_trials(
        &[ChannelDistribution::fixed_theta(FRAC_PI_4); 2],
        100_000,
        0x5_1A7,
        Execution::Parallel,
    )
    .expect("valid experiment");
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-12 && stats.within_sigma(0.25, 3.0) && elapsed < Duration::from_secs(30),
        format!(
            "grid max error {worst:e}, MC {} ± {:.2e}, {elapsed:.2?}",
            stats.mean_success, stats.std_err
        ),
    )
}

fn long_run_average() -> Verdict {
    let channel = ChannelDistribution {
        theta: ParamDistribution::Uniform { lo: 0.0, hi: TAU },
        ..ChannelDistribution::default()
    };
    let stats = run_distribution_trials(&[channel; 2], 100_000, 0xA7E, Execution::Parallel).expect("valid experiment");
    verdict(
        stats.within_sigma(0.25, 3.0),
        format!("mean {} ± {:.2e}", stats.mean_success, stats.std_err),
    )
}

fn kwd_orders() -> Verdict {
    let low = p_pur_kwd(&reference_params(0.3));
    let high = p_pur_kwd(&reference_params(0.8));
    let pass = (low.log10() + 7.0).abs() <= 0.5 && (high.log10() + 4.0).abs() <= 0.5;
    verdict(pass, format!("eta=0.3: {low:e}, eta=0.8: {high:e}"))
}

fn scheme_rate() -> Verdict {
    let rate = p_pur_from_cos2(0.5, 0.9, 0.5, 0.5);
    let weak_source = p_pur_from_cos2(0.5, 0.1, 0.5, 0.5);
    let r_low = (rate / p_pur_kwd(&reference_params(0.3))).log10();
    let r_high = (rate / p_pur_kwd(&reference_params(0.8))).log10();
    let pass = rate == 0.1125 && weak_source == 0.0125 && (r_low - 6.0).abs() <= 0.5 && (r_high - 3.0).abs() <= 0.5;
    verdict(
        pass,
        format!("p_pur {rate}, p_S=0.1 {weak_source}, log10 ratios {r_low:.3} / {r_high:.3}"),
    )
}

fn swap() -> Verdict {
    let params = RepeaterParams {
        zeta: 1.0,
        p_source: 1.0,
        eta: 0.8,
        ..RepeaterParams::default()
    };
    let channels = [ChannelDistribution::fixed(ChannelParams::IDENTITY); 4];
    let stats = run_repeater_trials(&channels, &params, false, 100_000, 0x5A9, Execution::Parallel)
        .expect("valid experiment");
    let fidelity = stats.end_to_end.fidelity_min.unwrap_or(0.0);
    verdict(
        stats.bsm.trials == 100_000 && stats.bsm.within_sigma(0.32, 3.0) && fidelity >= FIDELITY_FLOOR,
        format!(
            "BSM {} ± {:.2e} over {} attempts, min fidelity {fidelity:.15}",
            stats.bsm.mean_success, stats.bsm.std_err, stats.bsm.trials
        ),
    )
}

/// Bell weights on qubits 2,3 of Φ⁺⊗Φ⁺, expanded over all 16 basis states.
fn brute_force_weights() -> [f64; 4] {
    let r = FRAC_1_SQRT_2;
    let bells = [[r, 0.0, 0.0, r], [r, 0.0, 0.0, -r], [0.0, r, r, 0.0], [0.0, r, -r, 0.0]];
    let mut psi = [0.0; 16];
    for a in 0..2 {
        for b in 0..2 {
            psi[(a << 3) | (a << 2) | (b << 1) | b] = 0.5;
        }
    }
    bells.map(|bell| {
        let mut weight = 0.0;
        for p1 in 0..2 {
            for p4 in 0..2 {
                let mut amp = 0.0;
                for p2 in 0..2 {
                    for p3 in 0..2 {
                        amp += bell[(p2 << 1) | p3] * psi[(p1 << 3) | (p2 << 2) | (p3 << 1) | p4];
                    }
                }
                weight += amp * amp;
            }
        }
        weight
    })
}

fn oracle_equivalence() -> Verdict {
    let pair = PureState::bell_phi_plus(TimeBin::ONE);
    let four = pair.tensor(&pair);
    let order = [BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus];
    let oracle = brute_force_weights();
    let mut worst = 0.0f64;
    for (b, w) in order.iter().zip(oracle) {
        let p = four.project_bell(1, 2, *b, TimeBin::ONE).expect("valid slots").probability;
        worst = worst.max((p - w).abs()).max((w - 0.25).abs());
    }
    verdict(worst <= 1e-12, format!("max deviation {worst:e}"))
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_timebin"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = dir.path().join("repeater.json");
    std::fs::write(
        &config,
        r#"{"kind": "repeater", "trials": 20000, "seed": 99, "repeater": {"zeta": 1.0, "p_source": 1.0}}"#,
    )
    .expect("write config");
    let path = config.to_str().expect("utf-8 path");
    let a = run_cli(&["repeater", "--config", path]);
    let b = run_cli(&["repeater", "--config", path]);
    let c = run_cli(&["repeater", "--config", path, "--sequential"]);
    verdict(
        !a.is_empty() && a == b && a == c,
        format!("{} bytes, identical: {}", a.len(), a == b && a == c),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("error-freedom", error_freedom),
        ("success law", success_law),
        ("long-run average", long_run_average),
        ("KWD rate orders", kwd_orders),
        ("scheme rate and ratio", scheme_rate),
        ("entanglement swap", swap),
        ("Bell projection oracle", oracle_equivalence),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {} ({name}): {status}: {}", k + 1, v.detail);
        failures += usize::from(!v.pass);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
