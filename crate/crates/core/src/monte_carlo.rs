//! Slot-level Monte Carlo simulation of the D2D service process.
//!
//! Each slot draws the true hypothesis from the priors, the noisy test
//! statistic, the mode decision, and exponential channel (and interference)
//! powers for the decided mode. A slot is ON when the fixed rate is below the
//! instantaneous Shannon capacity of the decided link, computed directly from
//! the sampled powers.
//!
//! The effective capacity is estimated from the empirical log-MGF of the
//! per-path cumulative service. Path `i` uses the ChaCha stream `i` of a
//! generator keyed by the master seed, so results do not depend on how paths
//! are scheduled across threads.

use rand::distr::OpenClosed01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::link_model::{RadioParams, ScenarioKind};
use crate::mode_selection::{Mode, ModeSelectParams};

/// Bootstrap resamples used for the standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

pub const DEFAULT_PATH_LEN: usize = 50;

/// Stream reserved for the bootstrap generator.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub radio: RadioParams,
    pub mode_select: ModeSelectParams,
    pub kind: ScenarioKind,
    /// Fixed rate, bits/s.
    pub rate: f64,
    /// Add receiver noise to the underlay SIR (interference-only otherwise).
    pub with_noise: bool,
}

/// One of the four Markov states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ServiceState {
    DirectOn,
    DirectOff,
    CellularOn,
    CellularOff,
}

impl ServiceState {
    pub fn new(mode: Mode, on: bool) -> Self {
        match (mode, on) {
            (Mode::Direct, true) => ServiceState::DirectOn,
            (Mode::Direct, false) => ServiceState::DirectOff,
            (Mode::Cellular, true) => ServiceState::CellularOn,
            (Mode::Cellular, false) => ServiceState::CellularOff,
        }
    }

    /// Zero-based index in s1..s4 order.
    pub fn index(self) -> usize {
        match self {
            ServiceState::DirectOn => 0,
            ServiceState::DirectOff => 1,
            ServiceState::CellularOn => 2,
            ServiceState::CellularOff => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub true_hyp: Mode,
    pub t_statistic: f64,
    pub decided_hyp: Mode,
    /// SNR (overlay) or SIR (underlay) of the decided link; for the cellular
    /// link the weaker hop.
    pub link_ratio: f64,
    pub on: bool,
    /// Bits delivered in the slot.
    pub service: f64,
}

impl SlotOutcome {
    pub fn state(&self) -> ServiceState {
        ServiceState::new(self.decided_hyp, self.on)
    }
}

fn unit_exp<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(OpenClosed01);
    -u.ln()
}

/// Validated simulator with per-link constants precomputed.
#[derive(Clone, Debug)]
pub struct SlotSimulator {
    cfg: SimConfig,
    bits_per_slot: f64,
}

impl SlotSimulator {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.radio.validate()?;
        if cfg.mode_select.m_t == 0.0 {
            return Err(Error::DegenerateModeSelection);
        }
        if !(cfg.rate >= 0.0 && cfg.rate.is_finite()) {
            return Err(Error::domain(format!(
                "rate must be finite and >= 0, got {}",
                cfg.rate
            )));
        }
        let bits_per_slot = cfg.rate * cfg.radio.slot_len;
        Ok(SlotSimulator { cfg, bits_per_slot })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn bits_per_slot(&self) -> f64 {
        self.bits_per_slot
    }

    /// Shannon capacity `B log2(1 + x)` in bits/s.
    fn capacity(&self, ratio: f64) -> f64 {
        self.cfg.radio.bandwidth * ratio.ln_1p() / std::f64::consts::LN_2
    }

    fn link_ratio<R: Rng + ?Sized>(&self, mode: Mode, rng: &mut R) -> f64 {
        let s = &self.cfg.scenario;
        let p = &self.cfg.radio;
        let received = |power: f64, loss: f64, g: f64| power * g / loss;
        match self.cfg.kind {
            ScenarioKind::Overlay => match mode {
                Mode::Direct => received(p.p_bar, s.direct.linear, unit_exp(rng)) / p.n0,
                Mode::Cellular => {
                    let ul = received(p.p_bar, s.uplink.linear, unit_exp(rng)) / p.n0;
                    let dl = received(p.p_enb, s.downlink.linear, unit_exp(rng)) / p.n0;
                    ul.min(dl)
                }
            },
            ScenarioKind::Underlay => {
                let noise = if self.cfg.with_noise { p.n0 } else { 0.0 };
                match mode {
                    Mode::Direct => {
                        let sig = received(p.p_bar, s.direct.linear, unit_exp(rng));
                        let intf = received(p.p_ut, s.ut_to_dr.linear, unit_exp(rng));
                        sig / (intf + noise)
                    }
                    Mode::Cellular => {
                        let sig_ul = received(p.p_bar, s.uplink.linear, unit_exp(rng));
                        let intf_enb = received(p.p_ut, s.ut_to_enb.linear, unit_exp(rng));
                        let sig_dl = received(p.p_enb, s.downlink.linear, unit_exp(rng));
                        let intf_dr = received(p.p_ut, s.ut_to_dr.linear, unit_exp(rng));
                        (sig_ul / (intf_enb + noise)).min(sig_dl / (intf_dr + noise))
                    }
                }
            }
        }
    }

    pub fn simulate_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> SlotOutcome {
        let ms = &self.cfg.mode_select;
        let true_hyp = if rng.random::<f64>() < ms.priors.h1 {
            Mode::Cellular
        } else {
            Mode::Direct
        };
        let mean = match true_hyp {
            Mode::Direct => -ms.m_t,
            Mode::Cellular => ms.m_t,
        };
        let z: f64 = rng.sample(StandardNormal);
        let t_statistic = mean + ms.sigma_t * z;
        let decided_hyp = ms.decide(t_statistic);
        let link_ratio = self.link_ratio(decided_hyp, rng);
        let capacity = match decided_hyp {
            Mode::Direct => self.capacity(link_ratio),
            // the relay spends two slots per delivered block
            Mode::Cellular => 0.5 * self.capacity(link_ratio),
        };
        let rate = self.cfg.rate;
        let on = rate == 0.0 || rate < capacity;
        SlotOutcome {
            true_hyp,
            t_statistic,
            decided_hyp,
            link_ratio,
            on,
            service: if on { self.bits_per_slot } else { 0.0 },
        }
    }

    /// Number of ON slots in one path of `path_len` slots.
    fn path_on_count<R: Rng + ?Sized>(&self, rng: &mut R, path_len: usize) -> usize {
        (0..path_len).filter(|_| self.simulate_slot(rng).on).count()
    }
}

/// One-shot convenience wrapper around [`SlotSimulator::simulate_slot`].
pub fn simulate_slot<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<SlotOutcome> {
    Ok(SlotSimulator::new(cfg.clone())?.simulate_slot(rng))
}

/// Generator for path `path_index` under `master_seed`.
pub fn path_rng(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    /// Estimated effective capacity, bits/s.
    pub ec_hat: f64,
    /// Bootstrap standard error, bits/s.
    pub stderr: f64,
    pub n_paths: usize,
    pub path_len: usize,
    pub seed: u64,
    pub scenario_kind: ScenarioKind,
    pub theta: f64,
    pub rate: f64,
}

/// `-1/(theta t tau) ln mean(exp(-theta S_i))` from a histogram of ON counts,
/// shifted by the largest exponent so nothing underflows.
fn ec_from_histogram(
    hist: &[u64],
    theta: f64,
    bits_per_slot: f64,
    path_len: usize,
    slot_len: f64,
) -> f64 {
    let total: u64 = hist.iter().sum();
    let exponent = |k: usize| -theta * k as f64 * bits_per_slot;
    let Some(k_min) = hist.iter().position(|&c| c > 0) else {
        return 0.0;
    };
    let shift = exponent(k_min);
    let sum: f64 = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| c as f64 * (exponent(k) - shift).exp())
        .sum();
    let log_mean = shift + (sum / total as f64).ln();
    -log_mean / (theta * path_len as f64 * slot_len) + 0.0
}

fn histogram(on_counts: &[usize], path_len: usize) -> Vec<u64> {
    let mut hist = vec![0u64; path_len + 1];
    for &k in on_counts {
        hist[k] += 1;
    }
    hist
}

/// Per-path ON counts, ordered by path index.
pub fn simulate_on_counts(
    sim: &SlotSimulator,
    n_paths: usize,
    path_len: usize,
    master_seed: u64,
) -> Vec<usize> {
    (0..n_paths)
        .into_par_iter()
        .map(|i| sim.path_on_count(&mut path_rng(master_seed, i as u64), path_len))
        .collect()
}

pub fn simulate_paths(
    cfg: &SimConfig,
    n_paths: usize,
    path_len: usize,
    theta: f64,
    master_seed: u64,
) -> Result<SimEstimate> {
    if n_paths == 0 || path_len == 0 {
        return Err(Error::domain(
            "n_paths and path_len must both be at least 1",
        ));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!(
            "theta must be positive and finite, got {theta}"
        )));
    }
    let sim = SlotSimulator::new(cfg.clone())?;
    let slot_len = cfg.radio.slot_len;
    let bits = sim.bits_per_slot();
    let on_counts = simulate_on_counts(&sim, n_paths, path_len, master_seed);
    let ec_hat = ec_from_histogram(
        &histogram(&on_counts, path_len),
        theta,
        bits,
        path_len,
        slot_len,
    );
    if !ec_hat.is_finite() {
        return Err(Error::Numeric(format!(
            "Monte Carlo EC evaluated to {ec_hat}"
        )));
    }

    let mut boot_rng = path_rng(master_seed, BOOTSTRAP_STREAM);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut hist = vec![0u64; path_len + 1];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        hist.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n_paths {
            hist[on_counts[boot_rng.random_range(0..n_paths)]] += 1;
        }
        boot.push(ec_from_histogram(&hist, theta, bits, path_len, slot_len));
    }
    let mean = boot.iter().sum::<f64>() / boot.len() as f64;
    let var = boot.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64;

    Ok(SimEstimate {
        ec_hat,
        stderr: var.sqrt(),
        n_paths,
        path_len,
        seed: master_seed,
        scenario_kind: cfg.kind,
        theta,
        rate: cfg.rate,
    })
}

/// A single long run of slots, for transition-matrix estimates.
pub fn simulate_trace(cfg: &SimConfig, n_slots: usize, seed: u64) -> Result<Vec<SlotOutcome>> {
    let sim = SlotSimulator::new(cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_slots).map(|_| sim.simulate_slot(&mut rng)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    /// Transition counts, `counts[i][j]` from state i to state j.
    pub counts: [[u64; 4]; 4],
    /// Row-normalized counts; `None` for a state that was never left.
    pub rows: [Option<[f64; 4]>; 4],
}

pub fn empirical_transition_matrix(states: &[ServiceState]) -> TransitionEstimate {
    let mut counts = [[0u64; 4]; 4];
    for w in states.windows(2) {
        counts[w[0].index()][w[1].index()] += 1;
    }
    let rows = counts.map(|row| {
        let n: u64 = row.iter().sum();
        (n > 0).then(|| row.map(|c| c as f64 / n as f64))
    });
    TransitionEstimate { counts, rows }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateEstimate {
    pub p_e1_hat: f64,
    pub p_e2_hat: f64,
    /// Trials whose true hypothesis was H0.
    pub n_h0: u64,
    pub n_h1: u64,
}

/// Frequencies of deciding H1 under true H0 and H0 under true H1.
pub fn empirical_error_rates(
    n_trials: usize,
    mode_select: &ModeSelectParams,
    seed: u64,
) -> ErrorRateEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut n_h0, mut n_h1, mut err1, mut err2) = (0u64, 0u64, 0u64, 0u64);
    for _ in 0..n_trials {
        let truth_h1 = rng.random::<f64>() < mode_select.priors.h1;
        let mean = if truth_h1 {
            mode_select.m_t
        } else {
            -mode_select.m_t
        };
        let z: f64 = rng.sample(StandardNormal);
        let decided = mode_select.decide(mean + mode_select.sigma_t * z);
        if truth_h1 {
            n_h1 += 1;
            err2 += (decided == Mode::Direct) as u64;
        } else {
            n_h0 += 1;
            err1 += (decided == Mode::Cellular) as u64;
        }
    }
    let frac = |e: u64, n: u64| if n == 0 { 0.0 } else { e as f64 / n as f64 };
    ErrorRateEstimate {
        p_e1_hat: frac(err1, n_h0),
        p_e2_hat: frac(err2, n_h1),
        n_h0,
        n_h1,
    }
}
