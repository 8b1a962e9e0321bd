//! The four experiment subcommands.

use serde::Serialize;
use timebin::montecarlo::{analytic, run_trials, summarize, Analytic, Execution, ExperimentStats, RepeaterStats, RunStats};
use timebin::repeater::{p_pur_from_cos2, p_pur_kwd};
use timebin::RepeaterParams;

use crate::config::{mean_cos2, ExperimentConfig, Kind, SweepParam};
use crate::report::{render, timestamp, CompareRow, DistributeRow, JsonReport, RepeaterRow, SweepRow};

/// Minimum fidelity accepted from any post-selected state.
pub const FIDELITY_FLOOR: f64 = 1.0 - 1e-9;
/// Allowed distance of an empirical rate from its prediction, in standard errors.
pub const SIGMA_BAND: f64 = 3.0;
/// Allowed distance from a quoted order of magnitude, in decades.
pub const DECADE_BAND: f64 = 0.5;

#[derive(Debug)]
pub struct CommandOutput {
    pub bytes: Vec<u8>,
    /// Failed checks, one message each. Empty when everything passed.
    pub violations: Vec<String>,
}

fn check_rate(name: &str, stats: &RunStats, expected: f64, violations: &mut Vec<String>) {
    if stats.trials > 0 && !stats.within_sigma(expected, SIGMA_BAND) {
        violations.push(format!(
            "{name}: empirical {} vs analytic {expected} (±{SIGMA_BAND}·{})",
            stats.mean_success, stats.std_err
        ));
    }
}

fn check_fidelity(name: &str, fidelity_min: Option<f64>, violations: &mut Vec<String>) {
    if let Some(f) = fidelity_min {
        if f < FIDELITY_FLOOR {
            violations.push(format!("{name}: fidelity {f} below {FIDELITY_FLOOR}"));
        }
    }
}

fn distribute_row(config: &ExperimentConfig, exec: Execution) -> anyhow::Result<(DistributeRow, RunStats, Analytic)> {
    let experiment = config.distribution_experiment();
    let ExperimentStats::Distribution(stats) = run_trials(&experiment, config.trials, config.seed, exec)? else {
        unreachable!("distribution experiment")
    };
    let prediction = analytic(&experiment);
    let s = summarize(&stats, Some(prediction.end_to_end));
    let row = DistributeRow {
        trials: s.trials,
        successes: s.successes,
        empirical: s.mean,
        std_err: s.std_err,
        ci_low: s.ci_low,
        ci_high: s.ci_high,
        analytic: prediction.end_to_end,
        fidelity_min: s.fidelity_min,
        fidelity_mean: s.fidelity_mean,
        fidelity_max: s.fidelity_max,
        seed: config.seed,
    };
    Ok((row, stats, prediction))
}

fn repeater_row(config: &ExperimentConfig, exec: Execution) -> anyhow::Result<(RepeaterRow, RepeaterStats, Analytic)> {
    let experiment = config.repeater_experiment();
    let ExperimentStats::Repeater(stats) = run_trials(&experiment, config.trials, config.seed, exec)? else {
        unreachable!("repeater experiment")
    };
    let prediction = analytic(&experiment);
    let row = RepeaterRow {
        trials: stats.end_to_end.trials,
        segment_a_rate: stats.segment_a.mean_success,
        segment_a_std_err: stats.segment_a.std_err,
        segment_b_rate: stats.segment_b.mean_success,
        segment_b_std_err: stats.segment_b.std_err,
        bsm_attempts: stats.bsm.trials,
        bsm_rate: stats.bsm.mean_success,
        bsm_std_err: stats.bsm.std_err,
        end_to_end_rate: stats.end_to_end.mean_success,
        end_to_end_std_err: stats.end_to_end.std_err,
        fidelity_min: stats.end_to_end.fidelity_min,
        fidelity_mean: stats.end_to_end.fidelity_mean,
        p_pur_a: prediction.segment_a,
        p_pur_b: prediction.segment_b.unwrap_or_default(),
        swap_success_prob: prediction.swap.unwrap_or_default(),
        analytic_end_to_end: prediction.end_to_end,
        seed: config.seed,
    };
    Ok((row, stats, prediction))
}

fn repeater_violations(stats: &RepeaterStats, prediction: &Analytic, violations: &mut Vec<String>) {
    check_rate("segment_a", &stats.segment_a, prediction.segment_a, violations);
    check_rate("segment_b", &stats.segment_b, prediction.segment_b.unwrap_or_default(), violations);
    check_rate("bsm", &stats.bsm, prediction.swap.unwrap_or_default(), violations);
    check_rate("end_to_end", &stats.end_to_end, prediction.end_to_end, violations);
    check_fidelity("end_to_end", stats.end_to_end.fidelity_min, violations);
}

pub fn cmd_distribute(config: &ExperimentConfig, exec: Execution) -> anyhow::Result<CommandOutput> {
    let (row, stats, prediction) = distribute_row(config, exec)?;
    let mut violations = Vec::new();
    check_rate("distribute", &stats, prediction.end_to_end, &mut violations);
    check_fidelity("distribute", stats.fidelity_min, &mut violations);
    let report = JsonReport {
        config,
        stats: summarize(&stats, Some(prediction.end_to_end)),
        analytic: prediction,
        timestamp: timestamp(),
        seed: config.seed,
    };
    let bytes = render(config.format, &[row], report)?;
    Ok(CommandOutput { bytes, violations })
}

pub fn cmd_repeater(config: &ExperimentConfig, exec: Execution) -> anyhow::Result<CommandOutput> {
    let (row, stats, prediction) = repeater_row(config, exec)?;
    let mut violations = Vec::new();
    repeater_violations(&stats, &prediction, &mut violations);
    let report = JsonReport {
        config,
        stats,
        analytic: prediction,
        timestamp: timestamp(),
        seed: config.seed,
    };
    let bytes = render(config.format, &[row], report)?;
    Ok(CommandOutput { bytes, violations })
}

/// Closed-form comparison at one detector efficiency.
pub fn compare_row(config: &ExperimentConfig, eta: f64) -> CompareRow {
    let params = RepeaterParams { eta, ..config.repeater };
    let kwd = p_pur_kwd(&params);
    let ours = p_pur_from_cos2(params.zeta, params.p_source, mean_cos2(config, 0), mean_cos2(config, 1));
    let ratio = ours / kwd;
    CompareRow {
        eta,
        p_pur_kwd: kwd,
        p_pur: ours,
        ratio,
        log10_ratio: ratio.log10(),
    }
}

/// Reference points: η with the quoted order of `P_pur^KWD` and of the ratio.
const REFERENCE_POINTS: [(f64, f64, f64); 2] = [(0.3, -7.0, 6.0), (0.8, -4.0, 3.0)];

fn at_reference_operating_point(config: &ExperimentConfig) -> bool {
    let d = RepeaterParams::default();
    let p = &config.repeater;
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    close(p.gamma, d.gamma)
        && close(p.zeta, d.zeta)
        && close(p.p_source, d.p_source)
        && close(p.p_cnot, d.p_cnot)
        && close(p.p_qnd, d.p_qnd)
        && close(mean_cos2(config, 0), 0.5)
        && close(mean_cos2(config, 1), 0.5)
}

fn compare_violations(config: &ExperimentConfig, rows: &[CompareRow], violations: &mut Vec<String>) {
    if !at_reference_operating_point(config) {
        return;
    }
    for row in rows {
        for (eta, kwd_order, ratio_order) in REFERENCE_POINTS {
            if (row.eta - eta).abs() > 1e-12 {
                continue;
            }
            if (row.p_pur_kwd.log10() - kwd_order).abs() > DECADE_BAND {
                violations.push(format!("p_pur_kwd at eta={eta}: {} not of order 1e{kwd_order}", row.p_pur_kwd));
            }
            if (row.log10_ratio - ratio_order).abs() > DECADE_BAND {
                violations.push(format!("ratio at eta={eta}: log10 {} not near {ratio_order}", row.log10_ratio));
            }
        }
    }
}

pub fn cmd_compare_kwd(config: &ExperimentConfig) -> anyhow::Result<CommandOutput> {
    let rows: Vec<CompareRow> = config.eta_points.iter().map(|&eta| compare_row(config, eta)).collect();
    let mut violations = Vec::new();
    compare_violations(config, &rows, &mut violations);
    let report = JsonReport {
        config,
        stats: Option::<()>::None,
        analytic: &rows,
        timestamp: timestamp(),
        seed: config.seed,
    };
    let bytes = render(config.format, &rows, report)?;
    Ok(CommandOutput { bytes, violations })
}

fn param_name(p: SweepParam) -> String {
    serde_json::to_value(p)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

#[derive(Serialize)]
struct SweepPoint {
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    distribute: Option<RunStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repeater: Option<RepeaterStats>,
}

pub fn cmd_sweep(config: &ExperimentConfig, exec: Execution) -> anyhow::Result<CommandOutput> {
    let axis = config
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("sweep config needs a `sweep` axis"))?;
    let mut rows = Vec::with_capacity(axis.steps);
    let mut points = Vec::with_capacity(axis.steps);
    let mut violations = Vec::new();
    for value in axis.points() {
        let point = config.at_point(axis.param, value);
        let cmp = compare_row(&point, point.repeater.eta);
        let mut row = SweepRow {
            param: param_name(axis.param),
            value,
            target: axis.target.to_string(),
            trials: 0,
            empirical: None,
            std_err: None,
            analytic: cmp.p_pur,
            fidelity_min: None,
            p_pur_kwd: cmp.p_pur_kwd,
            p_pur: cmp.p_pur,
            log10_ratio: cmp.log10_ratio,
        };
        let mut sp = SweepPoint {
            value,
            distribute: None,
            repeater: None,
        };
        let label = format!("{}={value}", row.param);
        match axis.target {
            Kind::Distribute => {
                let (r, stats, prediction) = distribute_row(&point, exec)?;
                row.trials = r.trials;
                row.empirical = Some(r.empirical);
                row.std_err = Some(r.std_err);
                row.analytic = r.analytic;
                row.fidelity_min = r.fidelity_min;
                check_rate(&label, &stats, prediction.end_to_end, &mut violations);
                check_fidelity(&label, stats.fidelity_min, &mut violations);
                sp.distribute = Some(stats);
            }
            Kind::Repeater => {
                let (r, stats, prediction) = repeater_row(&point, exec)?;
                row.trials = r.trials;
                row.empirical = Some(r.end_to_end_rate);
                row.std_err = Some(r.end_to_end_std_err);
                row.analytic = r.analytic_end_to_end;
                row.fidelity_min = r.fidelity_min;
                repeater_violations(&stats, &prediction, &mut violations);
                sp.repeater = Some(stats);
            }
            Kind::CompareKwd | Kind::Sweep => {}
        }
        rows.push(row);
        points.push(sp);
    }
    let report = JsonReport {
        config,
        stats: &points,
        analytic: &rows,
        timestamp: timestamp(),
        seed: config.seed,
    };
    let bytes = render(config.format, &rows, report)?;
    Ok(CommandOutput { bytes, violations })
}

pub fn run(config: &ExperimentConfig, exec: Execution) -> anyhow::Result<CommandOutput> {
    match config.kind {
        Kind::Distribute => cmd_distribute(config, exec),
        Kind::Repeater => cmd_repeater(config, exec),
        Kind::Sweep => cmd_sweep(config, exec),
        Kind::CompareKwd => cmd_compare_kwd(config),
    }
}
