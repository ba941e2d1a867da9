//! SNR and SIR statistics of the direct and two-hop cellular links.
//!
//! All channel powers are Rayleigh block-faded, so received powers are
//! exponential. Overlay links are noise limited; underlay links are treated as
//! interference limited with U_T as the sole interferer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::mode_selection::Mode;

/// Thermal noise density, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Total thermal noise power over `bandwidth_hz`, in watts.
pub fn thermal_noise_w(bandwidth_hz: f64) -> f64 {
    let dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10();
    10f64.powf(dbm / 10.0) / 1000.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// D_T transmit power, W.
    pub p_bar: f64,
    /// eNB transmit power, W.
    pub p_enb: f64,
    /// U_T transmit power, W.
    pub p_ut: f64,
    /// Noise power over the bandwidth, W.
    pub n0: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Seconds.
    pub slot_len: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        let bandwidth = 10_000.0;
        RadioParams {
            p_bar: 0.2,
            p_enb: 10.0,
            p_ut: 0.2,
            n0: thermal_noise_w(bandwidth),
            bandwidth,
            slot_len: 0.1,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_bar", self.p_bar),
            ("p_enb", self.p_enb),
            ("p_ut", self.p_ut),
            ("n0", self.n0),
            ("bandwidth", self.bandwidth),
            ("slot_len", self.slot_len),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// D2D on resources orthogonal to the cellular pair.
    Overlay,
    /// D2D reusing the cellular pair's resources.
    Underlay,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Overlay => "overlay",
            ScenarioKind::Underlay => "underlay",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overlay" => Ok(ScenarioKind::Overlay),
            "underlay" => Ok(ScenarioKind::Underlay),
            other => Err(Error::domain(format!(
                "unknown scenario kind `{other}` (expected overlay or underlay)"
            ))),
        }
    }
}

/// How the cellular-mode SNR threshold is derived from the rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `2^(2r/B) - 1`: the ON condition `r < C_c` with the half pre-log of
    /// the two-slot relay.
    #[default]
    Consistent,
    /// `2^(r/B) - 1` for both modes.
    PaperLiteral,
}

/// SNR (or SIR) a slot must exceed for rate `rate` to be supported.
pub fn snr_threshold(rate: f64, bandwidth: f64, mode: Mode, rule: ThresholdRule) -> Result<f64> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::domain(format!(
            "rate must be finite and >= 0, got {rate}"
        )));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::domain(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let prelog = match (mode, rule) {
        (Mode::Cellular, ThresholdRule::Consistent) => 2.0,
        _ => 1.0,
    };
    Ok((prelog * rate / bandwidth * std::f64::consts::LN_2).exp_m1())
}

pub fn mean_snr_direct(params: &RadioParams, l_d: f64) -> f64 {
    params.p_bar / (l_d * params.n0)
}

/// Mean of `min(gamma_ul, gamma_dl)` for independent exponential hop SNRs.
pub fn mean_snr_cellular(params: &RadioParams, l_c1: f64, l_c2: f64) -> f64 {
    let ul = params.p_bar / (l_c1 * params.n0);
    let dl = params.p_enb / (l_c2 * params.n0);
    combine_hop_means(ul, dl)
}

/// Harmonic combination `ab / (a + b)`, the mean of the minimum of two
/// independent exponentials with means `a` and `b`.
pub fn combine_hop_means(a: f64, b: f64) -> f64 {
    1.0 / (1.0 / a + 1.0 / b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnProbs {
    pub p_on_direct: f64,
    pub p_on_cellular: f64,
    pub scenario_kind: ScenarioKind,
}

impl OnProbs {
    pub fn for_mode(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Direct => self.p_on_direct,
            Mode::Cellular => self.p_on_cellular,
        }
    }
}

/// Exceedance probability of an exponential SNR with mean `mean_snr`.
pub fn exp_exceedance(threshold: f64, mean_snr: f64) -> f64 {
    (-threshold / mean_snr).exp()
}

pub fn on_probs_overlay(
    mean_snr_d: f64,
    mean_snr_c: f64,
    gamma_req_d: f64,
    gamma_req_c: f64,
) -> OnProbs {
    OnProbs {
        p_on_direct: exp_exceedance(gamma_req_d, mean_snr_d),
        p_on_cellular: exp_exceedance(gamma_req_c, mean_snr_c),
        scenario_kind: ScenarioKind::Overlay,
    }
}

/// Exponential rate parameters of the received and interference powers in the
/// interference-limited underlay model: each power is `Exp` with the given
/// rate (mean = 1 / rate).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnderlayRates {
    /// Direct received power at D_R, `L_d / P̄`.
    pub alpha: f64,
    /// Interference at D_R from U_T, `L_{U_T,D_R} / P̄_{U_T}`.
    pub beta: f64,
    /// Uplink received power at the eNB, `L_c1 / P̄`.
    pub xi: f64,
    /// Interference at the eNB from U_T, `L_{U_T,eNB} / P̄_{U_T}`.
    pub zeta: f64,
    /// Downlink received power at D_R, `L_c2 / P̄_eNB`.
    pub nu: f64,
}

impl UnderlayRates {
    pub fn new(scenario: &Scenario, params: &RadioParams) -> Self {
        UnderlayRates {
            alpha: scenario.direct.linear / params.p_bar,
            beta: scenario.ut_to_dr.linear / params.p_ut,
            xi: scenario.uplink.linear / params.p_bar,
            zeta: scenario.ut_to_enb.linear / params.p_ut,
            nu: scenario.downlink.linear / params.p_enb,
        }
    }
}

/// `P(X/Y < z)` for `X ~ Exp(signal_rate)`, `Y ~ Exp(interf_rate)`.
fn ratio_cdf(z: f64, signal_rate: f64, interf_rate: f64) -> f64 {
    if !(z > 0.0) {
        return 0.0;
    }
    signal_rate / (signal_rate + interf_rate / z)
}

/// Complement of [`ratio_cdf`], evaluated without cancellation.
fn ratio_ccdf(z: f64, signal_rate: f64, interf_rate: f64) -> f64 {
    if !(z > 0.0) {
        return 1.0;
    }
    if z.is_infinite() {
        return 0.0;
    }
    interf_rate / (signal_rate * z + interf_rate)
}

/// CDF of the direct-link SIR, `alpha / (alpha + beta / z)`.
pub fn sir_cdf_direct_underlay(z: f64, alpha: f64, beta: f64) -> f64 {
    ratio_cdf(z, alpha, beta)
}

/// CDF of `min(SIR_ul, SIR_dl)` by inclusion-exclusion over the two hops.
pub fn sir_cdf_cellular_underlay(z: f64, xi: f64, zeta: f64, nu: f64, beta: f64) -> f64 {
    let ul = ratio_cdf(z, xi, zeta);
    let dl = ratio_cdf(z, nu, beta);
    ul + dl - ul * dl
}

pub fn sir_ccdf_direct_underlay(z: f64, alpha: f64, beta: f64) -> f64 {
    ratio_ccdf(z, alpha, beta)
}

pub fn sir_ccdf_cellular_underlay(z: f64, xi: f64, zeta: f64, nu: f64, beta: f64) -> f64 {
    ratio_ccdf(z, xi, zeta) * ratio_ccdf(z, nu, beta)
}

pub fn on_probs_underlay(
    scenario: &Scenario,
    params: &RadioParams,
    gamma_req_d: f64,
    gamma_req_c: f64,
) -> OnProbs {
    let r = UnderlayRates::new(scenario, params);
    OnProbs {
        p_on_direct: sir_ccdf_direct_underlay(gamma_req_d, r.alpha, r.beta),
        p_on_cellular: sir_ccdf_cellular_underlay(gamma_req_c, r.xi, r.zeta, r.nu, r.beta),
        scenario_kind: ScenarioKind::Underlay,
    }
}

/// ON probabilities of both modes at a fixed rate.
pub fn on_probs(
    scenario: &Scenario,
    params: &RadioParams,
    kind: ScenarioKind,
    rate: f64,
    rule: ThresholdRule,
) -> Result<OnProbs> {
    let req_d = snr_threshold(rate, params.bandwidth, Mode::Direct, rule)?;
    let req_c = snr_threshold(rate, params.bandwidth, Mode::Cellular, rule)?;
    Ok(match kind {
        ScenarioKind::Overlay => on_probs_overlay(
            mean_snr_direct(params, scenario.direct.linear),
            mean_snr_cellular(params, scenario.uplink.linear, scenario.downlink.linear),
            req_d,
            req_c,
        ),
        ScenarioKind::Underlay => on_probs_underlay(scenario, params, req_d, req_c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Placement;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exp_sample(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
        -mean * (1.0 - rng.random::<f64>()).ln()
    }

    #[test]
    fn thermal_noise_default() {
        let n0 = thermal_noise_w(10_000.0);
        assert!(((n0 - 3.981_071_705_534_972_5e-17) / n0).abs() < 1e-12);
    }

    #[test]
    fn threshold_examples() {
        let b = 10_000.0;
        let rule = ThresholdRule::Consistent;
        assert!((snr_threshold(b, b, Mode::Direct, rule).unwrap() - 1.0).abs() < 1e-15);
        assert!((snr_threshold(b, b, Mode::Cellular, rule).unwrap() - 3.0).abs() < 1e-15);
        let lit = snr_threshold(b, b, Mode::Cellular, ThresholdRule::PaperLiteral).unwrap();
        assert!((lit - 1.0).abs() < 1e-15);
        for mode in [Mode::Direct, Mode::Cellular] {
            assert_eq!(snr_threshold(0.0, b, mode, rule).unwrap(), 0.0);
        }
        assert!(snr_threshold(-1.0, b, Mode::Direct, rule).is_err());
    }

    #[test]
    fn mean_snr_examples() {
        let mut p = RadioParams {
            p_bar: 0.2,
            n0: 4e-17,
            ..RadioParams::default()
        };
        let l_d = 1e10;
        assert!((mean_snr_direct(&p, l_d) - 5e5).abs() < 1e-6);
        let l_unit = p.p_bar / p.n0;
        assert!((mean_snr_direct(&p, l_unit) - 1.0).abs() < 1e-15);
        let base = mean_snr_direct(&p, l_d);
        p.p_bar *= 2.0;
        assert!((mean_snr_direct(&p, l_d) - 2.0 * base).abs() < 1e-9);
    }

    #[test]
    fn cellular_mean_examples() {
        assert_eq!(combine_hop_means(4.0, 4.0), 2.0);
        assert_eq!(combine_hop_means(4.0, f64::INFINITY), 4.0);
        let p = RadioParams::default();
        let (l1, l2) = (1e12, 3e12);
        let ul = p.p_bar / (l1 * p.n0);
        let dl = p.p_enb / (l2 * p.n0);
        let m = mean_snr_cellular(&p, l1, l2);
        assert!(((m - ul * dl / (ul + dl)) / m).abs() < 1e-14);
    }

    #[test]
    fn min_of_exponentials_mean_matches_sampling() {
        let (a, b) = (3.0, 7.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| exp_sample(&mut rng, a).min(exp_sample(&mut rng, b)))
            .sum::<f64>()
            / n as f64;
        let want = combine_hop_means(a, b);
        assert!(((mean - want) / want).abs() < 0.01, "{mean} vs {want}");
    }

    #[test]
    fn overlay_examples() {
        let on = on_probs_overlay(2.0, 3.0, 0.0, 0.0);
        assert_eq!((on.p_on_direct, on.p_on_cellular), (1.0, 1.0));
        let on = on_probs_overlay(2.0, 3.0, 2.0, 3.0);
        assert!((on.p_on_direct - (-1f64).exp()).abs() < 1e-15);
        assert!((on.p_on_direct - 0.3679).abs() < 1e-4);
        assert!((on.p_on_cellular - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn overlay_on_prob_matches_sampling() {
        let (mean, req) = (4.0, 3.1);
        let want = exp_exceedance(req, mean);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| exp_sample(&mut rng, mean) > req).count();
        let got = hits as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() < 3.0 * se, "{got} vs {want}");
    }

    #[test]
    fn overlay_on_prob_matches_quadrature() {
        // 1 - integral_0^req of the exponential density, by composite Simpson.
        for (mean, req) in [(1.0, 0.5), (35.0, 2.0), (0.3, 1.1)] {
            let n = 20_000;
            let h = req / n as f64;
            let pdf = |x: f64| (-x / mean).exp() / mean;
            let mut s = pdf(0.0) + pdf(req);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(i as f64 * h);
            }
            let oracle = 1.0 - s * h / 3.0;
            assert!((exp_exceedance(req, mean) - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn sir_cdf_direct_examples() {
        assert_eq!(sir_cdf_direct_underlay(f64::INFINITY, 2.0, 3.0), 1.0);
        assert_eq!(sir_cdf_direct_underlay(1.0, 2.0, 2.0), 0.5);
        assert_eq!(sir_cdf_direct_underlay(0.0, 2.0, 2.0), 0.0);
        assert_eq!(sir_cdf_direct_underlay(-1.0, 2.0, 2.0), 0.0);
    }

    #[test]
    fn sir_cdf_cellular_examples() {
        assert_eq!(
            sir_cdf_cellular_underlay(f64::INFINITY, 1.0, 2.0, 3.0, 4.0),
            1.0
        );
        let z = 0.8;
        let reduced = sir_cdf_cellular_underlay(z, 1.0, f64::INFINITY, 3.0, 4.0);
        assert_eq!(reduced, sir_cdf_direct_underlay(z, 3.0, 4.0));
        assert_eq!(sir_cdf_cellular_underlay(0.0, 1.0, 2.0, 3.0, 4.0), 0.0);
    }

    #[test]
    fn sir_ratio_cdf_matches_sampling() {
        let (alpha, beta) = (2.0, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 1_000_000;
        let z = 1.0;
        let hits = (0..n)
            .filter(|_| exp_sample(&mut rng, 1.0 / alpha) / exp_sample(&mut rng, 1.0 / beta) < z)
            .count();
        let got = hits as f64 / n as f64;
        let want = sir_cdf_direct_underlay(z, alpha, beta);
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() < 3.0 * se);
    }

    #[test]
    fn underlay_limits() {
        let s = Scenario::build(&Placement::default_explicit(), 700.0).unwrap();
        let p = RadioParams::default();
        let on = on_probs_underlay(&s, &p, 1e-300, 1e-300);
        assert!(on.p_on_direct > 1.0 - 1e-12 && on.p_on_cellular > 1.0 - 1e-12);
        let quiet = RadioParams { p_ut: 1e-200, ..p };
        let on = on_probs_underlay(&s, &quiet, 5.0, 5.0);
        assert!(on.p_on_direct > 1.0 - 1e-12 && on.p_on_cellular > 1.0 - 1e-12);
    }

    #[test]
    fn default_scenario_underlay_is_worse_than_overlay() {
        let s = Scenario::build(&Placement::default_explicit(), 700.0).unwrap();
        let p = RadioParams::default();
        let rule = ThresholdRule::Consistent;
        for rate in [25.0, 1_000.0, 20_000.0] {
            let o = on_probs(&s, &p, ScenarioKind::Overlay, rate, rule).unwrap();
            let u = on_probs(&s, &p, ScenarioKind::Underlay, rate, rule).unwrap();
            assert!(o.p_on_direct >= u.p_on_direct);
            assert!(o.p_on_cellular >= u.p_on_cellular);
        }
    }

    #[test]
    fn scenario_kind_parses() {
        assert_eq!(
            "overlay".parse::<ScenarioKind>().unwrap(),
            ScenarioKind::Overlay
        );
        assert_eq!(
            "underlay".parse::<ScenarioKind>().unwrap(),
            ScenarioKind::Underlay
        );
        assert!("both".parse::<ScenarioKind>().is_err());
    }

    proptest! {
        #[test]
        fn sir_cdfs_monotone(z in 1e-6f64..1e6, dz in 0.0f64..10.0,
                             a in 1e-3f64..1e3, b in 1e-3f64..1e3,
                             c in 1e-3f64..1e3, d in 1e-3f64..1e3) {
            prop_assert!(sir_cdf_direct_underlay(z + dz, a, b) >= sir_cdf_direct_underlay(z, a, b));
            prop_assert!(sir_cdf_cellular_underlay(z + dz, a, b, c, d)
                >= sir_cdf_cellular_underlay(z, a, b, c, d) - 1e-15);
            let cdf = sir_cdf_cellular_underlay(z, a, b, c, d);
            let ccdf = sir_ccdf_cellular_underlay(z, a, b, c, d);
            prop_assert!((cdf + ccdf - 1.0).abs() < 1e-12);
            prop_assert!(sir_cdf_direct_underlay(1e-300, a, b) < 1e-290);
            prop_assert!(sir_cdf_direct_underlay(1e300, a, b) > 1.0 - 1e-12);
        }

        #[test]
        fn two_hop_never_beats_either_hop(z in 1e-6f64..1e6, a in 1e-3f64..1e3, b in 1e-3f64..1e3,
                                          c in 1e-3f64..1e3, d in 1e-3f64..1e3) {
            let both = sir_ccdf_cellular_underlay(z, a, b, c, d);
            prop_assert!(both <= sir_ccdf_direct_underlay(z, a, b));
            prop_assert!(both <= sir_ccdf_direct_underlay(z, c, d));
        }

        #[test]
        fn overlay_on_prob_monotone(mean in 1e-3f64..1e6, req in 1e-6f64..1e3, dr in 1e-3f64..1.0) {
            prop_assert!(exp_exceedance(req * (1.0 + dr), mean) <= exp_exceedance(req, mean));
            prop_assert!(exp_exceedance(req, mean * (1.0 + dr)) >= exp_exceedance(req, mean));
        }
    }
}
