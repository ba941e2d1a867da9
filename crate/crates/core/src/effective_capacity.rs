//! Four-state Markov service model and its effective capacity.
//!
//! States: s1 = direct & ON, s2 = direct & OFF, s3 = cellular & ON,
//! s4 = cellular & OFF. Mode decisions and fading are redrawn independently
//! every slot, so every row of the transition matrix equals
//! `(p1, p2, p3, p4)` and the matrix has rank one. An ON slot delivers
//! `r * tau` bits, an OFF slot none, which gives
//!
//! ```text
//! EC = -1 / (theta tau) * ln((p1 + p3) e^{-theta r tau} + p2 + p4)   [bits/s]
//! ```
//!
//! with `theta` in 1/bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::link_model::{on_probs, OnProbs, RadioParams, ScenarioKind, ThresholdRule};
use crate::mode_selection::{DecisionMarginals, ModeSelectParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionProbs {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl TransitionProbs {
    pub fn new(p1: f64, p2: f64, p3: f64, p4: f64) -> Result<Self> {
        let probs = TransitionProbs { p1, p2, p3, p4 };
        probs.validate()?;
        Ok(probs)
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.as_array() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!(
                    "state probability {p} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = self.as_array().iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "state probabilities sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p1, self.p2, self.p3, self.p4]
    }

    /// Probability that a slot delivers data, `p1 + p3`.
    pub fn p_on(&self) -> f64 {
        self.p1 + self.p3
    }

    pub fn p_off(&self) -> f64 {
        self.p2 + self.p4
    }
}

/// Splits `total` into `(part, rest)` with `part + rest == total` in floating
/// point. `rest` starts at `total - part`; when no `rest` hits `total` exactly
/// (a rounding tie), `part` moves by an ulp, which is far below any
/// tolerance downstream.
fn split_exact(total: f64, part: f64) -> (f64, f64) {
    let candidates = [part, part.next_down(), part.next_up()];
    for part in candidates.into_iter().filter(|p| (0.0..=total).contains(p)) {
        let mut rest = total - part;
        for _ in 0..4 {
            let sum = part + rest;
            if sum == total {
                return (part, rest.max(0.0));
            }
            rest = if sum > total {
                rest.next_down()
            } else {
                rest.next_up()
            };
        }
    }
    (part, (total - part).max(0.0))
}

/// State probabilities of the rank-one chain. `p1 + p2` and `p3 + p4`
/// reproduce the decision marginals bit for bit.
pub fn transition_probs(marginals: &DecisionMarginals, on: &OnProbs) -> TransitionProbs {
    let (p1, p2) = split_exact(marginals.h0, marginals.h0 * on.p_on_direct);
    let (p3, p4) = split_exact(marginals.h1, marginals.h1 * on.p_on_cellular);
    TransitionProbs { p1, p2, p3, p4 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QosParams {
    /// QoS exponent, 1/bit.
    pub theta: f64,
    /// Fixed transmission rate, bits/s.
    pub rate: f64,
    /// Slot length, s.
    pub slot_len: f64,
}

impl QosParams {
    pub fn new(theta: f64, rate: f64, slot_len: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::domain(format!(
                "theta must be positive and finite, got {theta}"
            )));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::domain(format!(
                "rate must be finite and >= 0, got {rate}"
            )));
        }
        if !(slot_len > 0.0 && slot_len.is_finite()) {
            return Err(Error::domain(format!(
                "slot length must be positive, got {slot_len}"
            )));
        }
        Ok(QosParams {
            theta,
            rate,
            slot_len,
        })
    }

    /// Bits delivered by an ON slot.
    pub fn bits_per_slot(&self) -> f64 {
        self.rate * self.slot_len
    }

    /// `theta * r * tau`.
    pub fn exponent(&self) -> f64 {
        self.theta * self.bits_per_slot()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcResult {
    /// Effective capacity, bits/s.
    pub ec: f64,
    pub p_on: f64,
    pub probs: TransitionProbs,
    pub qos: QosParams,
}

/// `ln(p_on e^{-x} + p_off)`. Small exponents go through `ln_1p`/`exp_m1` to
/// avoid cancellation; larger ones through log-sum-exp so `e^{-x}` never
/// underflows.
fn log_slot_mgf(p_on: f64, p_off: f64, x: f64) -> f64 {
    if p_on == 0.0 {
        return p_off.ln();
    }
    if x < 1.0 {
        return (p_on * (-x).exp_m1()).ln_1p();
    }
    let a = p_on.ln() - x;
    if p_off == 0.0 {
        return a;
    }
    let b = p_off.ln();
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn effective_capacity(probs: &TransitionProbs, qos: &QosParams) -> Result<EcResult> {
    if !(qos.theta > 0.0) {
        return Err(Error::domain(format!(
            "theta must be positive, got {}",
            qos.theta
        )));
    }
    probs.validate()?;
    let x = qos.exponent();
    let log_mgf = log_slot_mgf(probs.p_on(), probs.p_off(), x);
    let ec = (-log_mgf / (qos.theta * qos.slot_len)).clamp(0.0, qos.rate) + 0.0;
    if !ec.is_finite() {
        return Err(Error::Numeric(format!(
            "effective capacity evaluated to {ec}"
        )));
    }
    Ok(EcResult {
        ec,
        p_on: probs.p_on(),
        probs: *probs,
        qos: *qos,
    })
}

/// `(EC as theta -> 0, EC as theta -> inf)`: the mean throughput and either
/// zero or, for an always-ON link, the rate.
pub fn ec_theta_limits(probs: &TransitionProbs, rate: f64, _slot_len: f64) -> (f64, f64) {
    let at_zero = probs.p_on() * rate;
    let at_inf = if probs.p_off() > 0.0 { 0.0 } else { rate };
    (at_zero, at_inf)
}

/// `Phi(-theta) P` for the rank-one transition matrix, where `x = theta r tau`.
pub fn service_matrix(probs: &TransitionProbs, x: f64) -> [[f64; 4]; 4] {
    let on = (-x).exp();
    let phi = [on, 1.0, on, 1.0];
    let p = probs.as_array();
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = phi[i] * p[j];
        }
    }
    m
}

/// Dominant eigenvalue of a non-negative 4x4 matrix by power iteration.
pub fn spectral_radius(m: &[[f64; 4]; 4], tol: f64, max_iter: usize) -> Result<f64> {
    let mut v = [1.0; 4];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let mut w = [0.0; 4];
        for (wi, row) in w.iter_mut().zip(m) {
            *wi = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let norm = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if norm == 0.0 {
            return Ok(0.0);
        }
        let converged = (norm - lambda).abs() <= tol * norm;
        lambda = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if converged {
            return Ok(lambda);
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {max_iter} iterations"
    )))
}

/// Effective capacity from the spectral radius of the explicit service
/// matrix, an independent route to [`effective_capacity`].
pub fn spectral_radius_oracle(probs: &TransitionProbs, qos: &QosParams) -> Result<f64> {
    if !(qos.theta > 0.0) {
        return Err(Error::domain(format!(
            "theta must be positive, got {}",
            qos.theta
        )));
    }
    let m = service_matrix(probs, qos.exponent());
    let rho = spectral_radius(&m, 1e-12, 10_000)?;
    Ok(-rho.ln() / (qos.theta * qos.slot_len))
}

/// Closed-form EC for one scenario, mode-selection setting and QoS point.
pub fn analytic_ec(
    scenario: &Scenario,
    radio: &RadioParams,
    mode_select: &ModeSelectParams,
    kind: ScenarioKind,
    rule: ThresholdRule,
    qos: &QosParams,
) -> Result<EcResult> {
    let marginals = mode_select.marginals()?;
    let on = on_probs(scenario, radio, kind, qos.rate, rule)?;
    effective_capacity(&transition_probs(&marginals, &on), qos)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub r_step: f64,
}

impl Default for RateGrid {
    fn default() -> Self {
        RateGrid {
            r_min: 1.0,
            r_max: 200.0,
            r_step: 1.0,
        }
    }
}

impl RateGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let RateGrid {
            r_min,
            r_max,
            r_step,
        } = *self;
        if !(r_min >= 0.0 && r_min < r_max && r_max.is_finite() && r_step > 0.0) {
            return Err(Error::domain(format!(
                "empty rate grid: need 0 <= r_min < r_max and r_step > 0, got {r_min}..{r_max} step {r_step}"
            )));
        }
        let n = ((r_max - r_min) / r_step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| r_min + i as f64 * r_step).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSearch {
    pub r_star: f64,
    pub ec_star: f64,
    /// `(r, EC(r))` over the whole grid.
    pub curve: Vec<(f64, f64)>,
    /// False when the maximum sits on the first or last grid point.
    pub interior: bool,
}

/// Exhaustive search for the fixed rate maximizing EC. Ties resolve to the
/// smallest rate.
pub fn optimal_rate_search(
    scenario: &Scenario,
    radio: &RadioParams,
    mode_select: &ModeSelectParams,
    kind: ScenarioKind,
    rule: ThresholdRule,
    theta: f64,
    grid: &RateGrid,
) -> Result<RateSearch> {
    let rates = grid.points()?;
    let curve = rates
        .par_iter()
        .map(|&r| {
            let qos = QosParams::new(theta, r, radio.slot_len)?;
            Ok((
                r,
                analytic_ec(scenario, radio, mode_select, kind, rule, &qos)?.ec,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, &(_, ec)) in curve.iter().enumerate() {
        if ec > curve[best].1 {
            best = i;
        }
    }
    Ok(RateSearch {
        r_star: curve[best].0,
        ec_star: curve[best].1,
        interior: best != 0 && best + 1 != curve.len(),
        curve,
    })
}
