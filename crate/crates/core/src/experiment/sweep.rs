use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepVariable};
use crate::effective_capacity::{analytic_ec, optimal_rate_search, QosParams};
use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::link_model::ScenarioKind;
use crate::mode_selection::{sigma_t_for_error_probability, ModeSelectParams};
use crate::monte_carlo::{simulate_paths, SimConfig};

/// One output record. Field order matches the CSV columns, plus `theta`,
/// which only appears in JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub sweep_var: SweepVariable,
    pub sweep_value: f64,
    pub scenario_kind: ScenarioKind,
    pub theta: f64,
    pub ec_analytic: f64,
    pub ec_mc: Option<f64>,
    pub ec_mc_stderr: Option<f64>,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub p_e1: f64,
    pub p_e2: f64,
    pub kld: f64,
    pub r_star: Option<f64>,
    pub seed: u64,
}

/// Per-row seed: SplitMix64 of the master seed offset by the row index.
pub fn row_seed(master_seed: u64, row: u64) -> u64 {
    let mut z = master_seed.wrapping_add(row.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `(theta, sweep_value)` pairs in output order. A theta sweep is a single
/// block; any other sweep is repeated once per configured theta.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<(f64, f64)> {
    let values = cfg.sweep.points();
    if cfg.sweep.variable == SweepVariable::Theta {
        return values.into_iter().map(|v| (v, v)).collect();
    }
    cfg.thetas
        .iter()
        .flat_map(|&t| values.iter().map(move |&v| (t, v)))
        .collect()
}

/// Theta blocks in output order, as `(theta, row_count)`.
pub fn theta_blocks(cfg: &ExperimentConfig) -> Vec<(f64, usize)> {
    if cfg.sweep.variable == SweepVariable::Theta {
        return Vec::new();
    }
    let n = cfg.sweep.points().len();
    cfg.thetas.iter().map(|&t| (t, n)).collect()
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<OutputRow>> {
    cfg.validate()?;
    if cfg.sweep.variable == SweepVariable::PE1 && !cfg.priors.is_equal() {
        return Err(Error::Unsupported(
            "a p_e1 sweep needs equal priors; with unequal priors the two error probabilities differ".into(),
        ));
    }
    let scenario = cfg.scenario()?;
    let points = sweep_points(cfg);
    points
        .par_iter()
        .enumerate()
        .map(|(i, &(theta, value))| evaluate_row(cfg, &scenario, i as u64, theta, value))
        .collect()
}

fn evaluate_row(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    index: u64,
    theta: f64,
    value: f64,
) -> Result<OutputRow> {
    let m_t = scenario.pathloss_gap_db();
    let sigma_t = match cfg.sweep.variable {
        SweepVariable::SigmaT => value,
        SweepVariable::PE1 => sigma_t_for_error_probability(m_t, value)?,
        _ => cfg.sigma_t,
    };
    let rate = match cfg.sweep.variable {
        SweepVariable::Rate => value,
        _ => cfg.rate,
    };
    let ms = ModeSelectParams::from_sigma_t(cfg.priors, m_t, sigma_t)?;
    let diag = ms.diagnostics()?;
    let qos = QosParams::new(theta, rate, cfg.radio.slot_len)?;
    let ec = analytic_ec(
        scenario,
        &cfg.radio,
        &ms,
        cfg.scenario_kind,
        cfg.threshold_rule,
        &qos,
    )?;

    let r_star = if cfg.optrate_enabled {
        let search = optimal_rate_search(
            scenario,
            &cfg.radio,
            &ms,
            cfg.scenario_kind,
            cfg.threshold_rule,
            theta,
            &cfg.rate_grid,
        )?;
        Some(search.r_star)
    } else {
        None
    };

    let seed = row_seed(cfg.master_seed, index);
    let mc = if cfg.mc.enabled {
        let sim = SimConfig {
            scenario: scenario.clone(),
            radio: cfg.radio,
            mode_select: ms,
            kind: cfg.scenario_kind,
            rate,
            with_noise: cfg.with_noise,
        };
        Some(simulate_paths(
            &sim,
            cfg.mc.n_paths,
            cfg.mc.path_len,
            theta,
            seed,
        )?)
    } else {
        None
    };

    Ok(OutputRow {
        sweep_var: cfg.sweep.variable,
        sweep_value: value,
        scenario_kind: cfg.scenario_kind,
        theta,
        ec_analytic: ec.ec,
        ec_mc: mc.map(|m| m.ec_hat),
        ec_mc_stderr: mc.map(|m| m.stderr),
        p1: ec.probs.p1,
        p2: ec.probs.p2,
        p3: ec.probs.p3,
        p4: ec.probs.p4,
        p_e1: diag.p_e1,
        p_e2: diag.p_e2,
        kld: diag.kld,
        r_star,
        seed,
    })
}
