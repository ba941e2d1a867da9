//! Pathloss-based mode selection as a binary hypothesis test.
//!
//! The test statistic is the difference of two noisy dB pathloss
//! measurements, `T = L̂_d - L̂_c1`, with each measurement carrying Gaussian
//! error of standard deviation `sigma` in dB, so `sigma_T = sqrt(2) sigma`.
//! Under H0 (direct mode) `T ~ N(-m_T, sigma_T^2)`, under H1 (cellular mode)
//! `T ~ N(m_T, sigma_T^2)`. The log-likelihood ratio is `2 m_T T / sigma_T^2`,
//! so the test reduces to comparing `T` against a threshold `eta`. For
//! `m_T > 0` the detector decides H1 when `T > eta`; for `m_T < 0` the
//! acceptance region flips and H1 is decided when `T < eta`.

use libm::erfc;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const PRIOR_SUM_TOL: f64 = 1e-12;

/// The two hypotheses, H0 = direct mode and H1 = cellular mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Cellular,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub h0: f64,
    pub h1: f64,
}

impl Priors {
    pub fn new(h0: f64, h1: f64) -> Result<Self> {
        for (name, p) in [("prior_h0", h0), ("prior_h1", h1)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::domain(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        if (h0 + h1 - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::domain(format!(
                "priors must sum to 1, got {h0} + {h1} = {}",
                h0 + h1
            )));
        }
        Ok(Priors { h0, h1 })
    }

    pub const fn equal() -> Self {
        Priors { h0: 0.5, h1: 0.5 }
    }

    /// `delta = pi(0) / pi(1)`.
    pub fn delta(&self) -> f64 {
        self.h0 / self.h1
    }

    pub fn is_equal(&self) -> bool {
        self.h0 == self.h1
    }
}

/// Standard normal tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 1)`.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("Q^-1 needs p in (0, 1), got {p}")));
    }
    Ok(std::f64::consts::SQRT_2 * erfc_inv(2.0 * p))
}

fn check_sigma_t(sigma_t: f64) -> Result<()> {
    if sigma_t.is_nan() || sigma_t < 0.0 || sigma_t.is_infinite() {
        return Err(Error::domain(format!(
            "sigma_T must be finite and non-negative, got {sigma_t}"
        )));
    }
    Ok(())
}

fn check_gap(m_t: f64) -> Result<()> {
    if m_t == 0.0 {
        return Err(Error::DegenerateModeSelection);
    }
    if !m_t.is_finite() {
        return Err(Error::domain(format!("m_T must be finite, got {m_t}")));
    }
    Ok(())
}

/// Decision threshold `eta = ln(pi(0)/pi(1)) sigma_T^2 / (2 m_T)`.
pub fn threshold_eta(priors: &Priors, m_t: f64, sigma_t: f64) -> Result<f64> {
    check_gap(m_t)?;
    check_sigma_t(sigma_t)?;
    Ok(priors.delta().ln() * sigma_t * sigma_t / (2.0 * m_t))
}

/// Applies the threshold rule to an observed statistic. Ties go to H0.
pub fn decide_mode(t_statistic: f64, eta: f64, m_t: f64) -> Mode {
    let choose_cellular = if m_t > 0.0 {
        t_statistic > eta
    } else if m_t < 0.0 {
        t_statistic < eta
    } else {
        false
    };
    if choose_cellular {
        Mode::Cellular
    } else {
        Mode::Direct
    }
}

/// Returns `(P_e1, P_e2)` = `(P(H1 | H0), P(H0 | H1))`.
///
/// At `sigma_T = 0` the statistic is deterministic and the result is the
/// indicator of the noiseless decision being wrong, which is `(0, 0)` for any
/// threshold derived from the priors.
pub fn error_probabilities(m_t: f64, sigma_t: f64, eta: f64) -> Result<(f64, f64)> {
    check_gap(m_t)?;
    check_sigma_t(sigma_t)?;
    if sigma_t == 0.0 {
        let pe1 = (decide_mode(-m_t, eta, m_t) == Mode::Cellular) as u8 as f64;
        let pe2 = (decide_mode(m_t, eta, m_t) == Mode::Direct) as u8 as f64;
        return Ok((pe1, pe2));
    }
    let s = m_t.signum();
    let pe1 = q_function(s * (eta + m_t) / sigma_t);
    let pe2 = q_function(s * (m_t - eta) / sigma_t);
    Ok((pe1, pe2))
}

/// Kullback-Leibler divergence `m_T^2 / sigma_T^2` between the two
/// conditional distributions of the statistic.
pub fn kld(m_t: f64, sigma_t: f64) -> Result<f64> {
    if !(sigma_t > 0.0) || !sigma_t.is_finite() {
        return Err(Error::domain(format!(
            "KLD needs a positive finite sigma_T, got {sigma_t}"
        )));
    }
    Ok((m_t * m_t) / (sigma_t * sigma_t))
}

/// Per-slot probabilities of deciding H0 and H1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionMarginals {
    pub h0: f64,
    pub h1: f64,
}

/// `P(H0(k)) = P(H0|H0) pi(0) + P(H0|H1) pi(1)` and its complement.
pub fn decision_marginals(
    priors: &Priors,
    m_t: f64,
    sigma_t: f64,
    eta: f64,
) -> Result<DecisionMarginals> {
    let (pe1, pe2) = error_probabilities(m_t, sigma_t, eta)?;
    let h0 = priors.h0 * (1.0 - pe1) + priors.h1 * pe2;
    Ok(DecisionMarginals { h0, h1: 1.0 - h0 })
}

/// `sigma_T` at which equal-prior mode selection has type-I error `p_e1`.
///
/// With equal priors `P_e1 = Q(|m_T| / sigma_T)`, which inverts uniquely for
/// `p_e1` in `(0, 0.5)`.
pub fn sigma_t_for_error_probability(m_t: f64, p_e1: f64) -> Result<f64> {
    check_gap(m_t)?;
    if !(p_e1 > 0.0 && p_e1 < 0.5) {
        return Err(Error::domain(format!(
            "target P_e1 must lie in (0, 0.5), got {p_e1}"
        )));
    }
    Ok(m_t.abs() / q_inverse(p_e1)?)
}

/// Mode-selection parameters for one scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSelectParams {
    /// Per-measurement noise std, dB.
    pub sigma: f64,
    pub priors: Priors,
    /// `L_d - L_c1`, dB.
    pub m_t: f64,
    /// Std of the test statistic, dB.
    pub sigma_t: f64,
    pub eta: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSelectDiagnostics {
    pub p_e1: f64,
    pub p_e2: f64,
    pub kld: f64,
    pub p_decide_h0: f64,
    pub p_decide_h1: f64,
}

impl ModeSelectParams {
    pub fn new(priors: Priors, m_t: f64, sigma: f64) -> Result<Self> {
        check_sigma_t(sigma)?;
        Self::with_both(priors, m_t, sigma, std::f64::consts::SQRT_2 * sigma)
    }

    pub fn from_sigma_t(priors: Priors, m_t: f64, sigma_t: f64) -> Result<Self> {
        check_sigma_t(sigma_t)?;
        Self::with_both(priors, m_t, sigma_t / std::f64::consts::SQRT_2, sigma_t)
    }

    fn with_both(priors: Priors, m_t: f64, sigma: f64, sigma_t: f64) -> Result<Self> {
        let eta = threshold_eta(&priors, m_t, sigma_t)?;
        Ok(ModeSelectParams {
            sigma,
            priors,
            m_t,
            sigma_t,
            eta,
            delta: priors.delta(),
        })
    }

    pub fn decide(&self, t_statistic: f64) -> Mode {
        decide_mode(t_statistic, self.eta, self.m_t)
    }

    pub fn error_probabilities(&self) -> Result<(f64, f64)> {
        error_probabilities(self.m_t, self.sigma_t, self.eta)
    }

    pub fn marginals(&self) -> Result<DecisionMarginals> {
        decision_marginals(&self.priors, self.m_t, self.sigma_t, self.eta)
    }

    pub fn diagnostics(&self) -> Result<ModeSelectDiagnostics> {
        let (p_e1, p_e2) = self.error_probabilities()?;
        let marg = self.marginals()?;
        Ok(ModeSelectDiagnostics {
            p_e1,
            p_e2,
            kld: kld(self.m_t, self.sigma_t)?,
            p_decide_h0: marg.h0,
            p_decide_h1: marg.h1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Composite Simpson integration of the standard normal density over
    /// `[x, x + 40]`, independent of the erfc path.
    fn q_quadrature(x: f64) -> f64 {
        let n = 200_000;
        let (a, b) = (x, x + 40.0);
        let h = (b - a) / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut sum = pdf(a) + pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * pdf(a + i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn q_function_limits_and_symmetry() {
        assert_eq!(q_function(0.0), 0.5);
        assert_eq!(q_function(f64::NEG_INFINITY), 1.0);
        assert_eq!(q_function(f64::INFINITY), 0.0);
        for x in [0.3, 1.0, 2.5, 6.0] {
            assert!((q_function(x) + q_function(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn q_function_matches_quadrature() {
        for x in [-3.0, -1.0, 0.0, 0.5, 1.2816, 2.0, 3.0, 5.0] {
            let (q, oracle) = (q_function(x), q_quadrature(x));
            assert!(
                ((q - oracle) / oracle).abs() < 1e-9,
                "x={x}: {q} vs {oracle}"
            );
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn q_function_frozen_values() {
        // 30-digit tail integrals
        let frozen = [
            (1.2816, 0.099_991_500_097_675_166),
            (3.0, 0.001_349_898_031_630_094_5),
            (1.0, 0.158_655_253_931_457_05),
            (-2.0, 0.977_249_868_051_820_79),
            (5.0, 2.866_515_718_791_939_1e-7),
            (8.0, 6.220_960_574_271_784_1e-16),
        ];
        for (x, want) in frozen {
            let got = q_function(x);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "Q({x}) = {got}, want {want}"
            );
        }
        assert!((q_function(1.2816) - 0.1).abs() < 1e-4);
    }

    #[test]
    fn q_inverse_round_trip() {
        for p in [1e-10, 1e-4, 0.05, 0.3, 0.5, 0.9] {
            let x = q_inverse(p).unwrap();
            assert!(((q_function(x) - p) / p).abs() < 1e-10);
        }
        assert!(q_inverse(0.0).is_err());
        assert!(q_inverse(1.0).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_eta(&Priors::equal(), 4.0, 2.0).unwrap(), 0.0);
        let p = Priors::new(0.75, 0.25).unwrap();
        let eta = threshold_eta(&p, 4.0, 2.0).unwrap();
        assert!((eta - 0.549_306_144_334_054_8).abs() < 1e-12);
        assert_eq!(threshold_eta(&p, -4.0, 2.0).unwrap(), -eta);
        assert!(matches!(
            threshold_eta(&p, 0.0, 2.0),
            Err(Error::DegenerateModeSelection)
        ));
    }

    #[test]
    fn priors_validation() {
        assert!(Priors::new(0.6, 0.5).is_err());
        assert!(Priors::new(0.0, 1.0).is_err());
        assert!(Priors::new(1.0, 0.0).is_err());
        assert!(Priors::new(0.3, 0.7).is_ok());
    }

    #[test]
    fn error_probability_examples() {
        let (pe1, pe2) = error_probabilities(3.0, 1.0, 0.0).unwrap();
        assert!((pe1 - 1.349_898_031_630_094_5e-3).abs() < 1e-15);
        assert_eq!(pe1, pe2);
        assert_eq!(error_probabilities(1.0, 0.0, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(error_probabilities(-1.0, 0.0, 0.0).unwrap(), (0.0, 0.0));
        let (a, b) = error_probabilities(1.0, 1e-9, 0.0).unwrap();
        assert!(a < 1e-300 && b < 1e-300);
        assert!(matches!(
            error_probabilities(0.0, 1.0, 0.0),
            Err(Error::DegenerateModeSelection)
        ));
    }

    #[test]
    fn error_probabilities_mirror_under_sign_flip() {
        let p = Priors::new(0.7, 0.3).unwrap();
        for m in [0.5, 2.0, 7.0] {
            let sigma_t = 1.7;
            let pos = error_probabilities(m, sigma_t, threshold_eta(&p, m, sigma_t).unwrap());
            let neg = error_probabilities(-m, sigma_t, threshold_eta(&p, -m, sigma_t).unwrap());
            let (pos, neg) = (pos.unwrap(), neg.unwrap());
            assert!((pos.0 - neg.0).abs() < 1e-15 && (pos.1 - neg.1).abs() < 1e-15);
        }
    }

    #[test]
    fn kld_examples() {
        assert_eq!(kld(2.0, 2.0).unwrap(), 1.0);
        assert_eq!(kld(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(kld(3.0, 1.5).unwrap(), 4.0);
        assert!(matches!(kld(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn marginal_limits() {
        let p = Priors::equal();
        let m = decision_marginals(&p, 5.0, 0.0, 0.0).unwrap();
        assert_eq!((m.h0, m.h1), (0.5, 0.5));
        let m = decision_marginals(&p, 5.0, 1e12, 0.0).unwrap();
        assert!((m.h0 - 0.5).abs() < 1e-11);
        let skew = Priors::new(0.8, 0.2).unwrap();
        let m = decision_marginals(&skew, 3.0, 0.0, 0.0).unwrap();
        assert!((m.h0 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn decide_mode_rule() {
        assert_eq!(decide_mode(0.1, 0.0, 1.0), Mode::Cellular);
        assert_eq!(decide_mode(-0.1, 0.0, 1.0), Mode::Direct);
        assert_eq!(decide_mode(0.0, 0.0, 1.0), Mode::Direct);
        assert_eq!(decide_mode(-0.1, 0.0, -1.0), Mode::Cellular);
        assert_eq!(decide_mode(0.1, 0.0, -1.0), Mode::Direct);
        assert_eq!(decide_mode(0.4, 0.4, -1.0), Mode::Direct);
    }

    #[test]
    fn params_invariants() {
        let p = ModeSelectParams::new(Priors::new(0.75, 0.25).unwrap(), 4.0, 1.3).unwrap();
        assert!((p.sigma_t - 2f64.sqrt() * p.sigma).abs() < 1e-12);
        let eta = p.delta.ln() * p.sigma_t * p.sigma_t / (2.0 * p.m_t);
        assert!((p.eta - eta).abs() < 1e-15);
        let q = ModeSelectParams::from_sigma_t(Priors::equal(), -3.0, 2.0).unwrap();
        assert!((q.sigma_t - 2f64.sqrt() * q.sigma).abs() < 1e-12);
        assert!(ModeSelectParams::new(Priors::equal(), 0.0, 1.0).is_err());
    }

    #[test]
    fn sigma_t_inversion() {
        let s = sigma_t_for_error_probability(-17.9, 0.05).unwrap();
        let (pe1, _) = error_probabilities(-17.9, s, 0.0).unwrap();
        assert!((pe1 - 0.05).abs() < 1e-12);
        assert!(sigma_t_for_error_probability(1.0, 0.5).is_err());
    }

    #[test]
    fn marginals_match_sampled_decisions() {
        let params =
            ModeSelectParams::from_sigma_t(Priors::new(0.65, 0.35).unwrap(), 1.5, 2.2).unwrap();
        let want = params.marginals().unwrap().h0;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let mut direct = 0u64;
        for _ in 0..n {
            let truth_h1 = rng.random::<f64>() < params.priors.h1;
            let mean = if truth_h1 { params.m_t } else { -params.m_t };
            let z: f64 = rng.sample(StandardNormal);
            if params.decide(mean + params.sigma_t * z) == Mode::Direct {
                direct += 1;
            }
        }
        let got = direct as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() < 3.0 * se, "{got} vs {want} (se {se})");
    }

    proptest! {
        #[test]
        fn equal_priors_give_equal_errors(m in prop_oneof![-30.0f64..-0.01, 0.01f64..30.0],
                                         sigma_t in 0.01f64..40.0) {
            let eta = threshold_eta(&Priors::equal(), m, sigma_t).unwrap();
            let (pe1, pe2) = error_probabilities(m, sigma_t, eta).unwrap();
            prop_assert_eq!(pe1, pe2);
            prop_assert!((pe1 - q_function(m.abs() / sigma_t)).abs() <= 1e-16);
        }

        #[test]
        fn errors_non_decreasing_in_sigma(m in 0.01f64..30.0, s in 0.01f64..40.0, ds in 0.0f64..5.0) {
            let (a, _) = error_probabilities(m, s, 0.0).unwrap();
            let (b, _) = error_probabilities(m, s + ds, 0.0).unwrap();
            prop_assert!(b >= a);
        }

        #[test]
        fn kld_scale_invariant(m in -30.0f64..30.0, s in 0.01f64..40.0, c in 0.01f64..100.0) {
            let a = kld(m, s).unwrap();
            let b = kld(c * m, c * s).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }

        #[test]
        fn diagnostics_are_probabilities(m in prop_oneof![-30.0f64..-0.01, 0.01f64..30.0],
                                         s in 0.01f64..40.0, h0 in 0.01f64..0.99) {
            let d = ModeSelectParams::from_sigma_t(Priors::new(h0, 1.0 - h0).unwrap(), m, s)
                .unwrap()
                .diagnostics()
                .unwrap();
            for p in [d.p_e1, d.p_e2, d.p_decide_h0, d.p_decide_h1] {
                prop_assert!((0.0..=1.0).contains(&p));
            }
            prop_assert_eq!(d.p_decide_h0 + d.p_decide_h1, 1.0);
            prop_assert!(d.kld >= 0.0);
        }
    }
}
