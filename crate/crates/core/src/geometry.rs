//! Single-cell geometry and the log-distance pathloss model.
//!
//! The eNB sits at the origin. The D2D candidate pair (D_T, D_R) and the
//! cellular transmitter U_T are placed either explicitly or uniformly over the
//! cell disc. Every link distance is clamped to [`D_MIN_M`] before it enters
//! the pathloss model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum link distance in meters.
pub const D_MIN_M: f64 = 1.0;

/// Pathloss intercept at 1 m, dB.
pub const PATHLOSS_INTERCEPT_DB: f64 = 36.3;

/// Pathloss slope per decade of distance, dB.
pub const PATHLOSS_SLOPE_DB: f64 = 37.6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub x: f64,
    pub y: f64,
}

impl NodePosition {
    pub const fn new(x: f64, y: f64) -> Self {
        NodePosition { x, y }
    }

    pub fn distance_to(&self, other: &NodePosition) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// `L(d) = 36.3 + 37.6 log10(max(d, 1 m))` in dB.
pub fn pathloss_db(distance_m: f64) -> Result<f64> {
    if !distance_m.is_finite() || distance_m < 0.0 {
        return Err(Error::domain(format!(
            "distance must be finite and non-negative, got {distance_m}"
        )));
    }
    Ok(PATHLOSS_INTERCEPT_DB + PATHLOSS_SLOPE_DB * distance_m.max(D_MIN_M).log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> Result<f64> {
    if !(linear > 0.0) {
        return Err(Error::domain(format!(
            "linear value must be positive, got {linear}"
        )));
    }
    Ok(10.0 * linear.log10())
}

/// A pathloss held in both the dB (feature) and linear (SNR) domains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pathloss {
    pub db: f64,
    pub linear: f64,
}

impl Pathloss {
    pub fn from_distance(distance_m: f64) -> Result<Self> {
        let db = pathloss_db(distance_m)?;
        Ok(Pathloss {
            db,
            linear: db_to_linear(db),
        })
    }
}

/// Positions of the four nodes of the scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub enb: NodePosition,
    pub dt: NodePosition,
    pub dr: NodePosition,
    pub ut: NodePosition,
}

impl Placement {
    /// The pinned default layout: a 100 m D2D pair 300 m east of the eNB and
    /// the cellular transmitter in the north-west quadrant.
    pub const fn default_explicit() -> Self {
        Placement {
            enb: NodePosition::new(0.0, 0.0),
            dt: NodePosition::new(300.0, 0.0),
            dr: NodePosition::new(300.0, 100.0),
            ut: NodePosition::new(-200.0, 300.0),
        }
    }

    /// Names and positions of the three user equipments.
    pub fn user_equipments(&self) -> [(&'static str, NodePosition); 3] {
        [("dt", self.dt), ("dr", self.dr), ("ut", self.ut)]
    }
}

/// Draws a point uniformly over a disc of radius `radius` centred at `center`.
pub fn uniform_disc_point<R: Rng + ?Sized>(
    rng: &mut R,
    center: NodePosition,
    radius: f64,
) -> NodePosition {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let r = radius * u.sqrt();
    let angle = 2.0 * std::f64::consts::PI * v;
    NodePosition::new(center.x + r * angle.cos(), center.y + r * angle.sin())
}

/// Places D_T, D_R and U_T uniformly inside the cell, eNB at the origin.
pub fn sample_uniform_positions(cell_radius: f64, seed: u64) -> Result<Placement> {
    if !(cell_radius > 0.0 && cell_radius.is_finite()) {
        return Err(Error::domain(format!(
            "cell radius must be positive and finite, got {cell_radius}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enb = NodePosition::new(0.0, 0.0);
    let dt = uniform_disc_point(&mut rng, enb, cell_radius);
    let dr = uniform_disc_point(&mut rng, enb, cell_radius);
    let ut = uniform_disc_point(&mut rng, enb, cell_radius);
    Ok(Placement { enb, dt, dr, ut })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cell_radius: f64,
    pub placement: Placement,
    /// D_T to D_R.
    pub direct: Pathloss,
    /// D_T to eNB.
    pub uplink: Pathloss,
    /// eNB to D_R.
    pub downlink: Pathloss,
    /// U_T to D_R.
    pub ut_to_dr: Pathloss,
    /// U_T to eNB.
    pub ut_to_enb: Pathloss,
}

impl Scenario {
    pub fn build(placement: &Placement, cell_radius: f64) -> Result<Self> {
        if !(cell_radius > 0.0 && cell_radius.is_finite()) {
            return Err(Error::domain(format!(
                "cell radius must be positive and finite, got {cell_radius}"
            )));
        }
        let p = placement;
        for (name, pos) in [("enb", p.enb), ("dt", p.dt), ("dr", p.dr), ("ut", p.ut)] {
            if !pos.is_finite() {
                return Err(Error::domain(format!("position of {name} is not finite")));
            }
        }
        Ok(Scenario {
            cell_radius,
            placement: *p,
            direct: Pathloss::from_distance(p.dt.distance_to(&p.dr))?,
            uplink: Pathloss::from_distance(p.dt.distance_to(&p.enb))?,
            downlink: Pathloss::from_distance(p.enb.distance_to(&p.dr))?,
            ut_to_dr: Pathloss::from_distance(p.ut.distance_to(&p.dr))?,
            ut_to_enb: Pathloss::from_distance(p.ut.distance_to(&p.enb))?,
        })
    }

    /// Mean of the mode-selection test statistic, `L_d - L_c1` in dB.
    pub fn pathloss_gap_db(&self) -> f64 {
        self.direct.db - self.uplink.db
    }

    pub fn pathlosses(&self) -> [Pathloss; 5] {
        [
            self.direct,
            self.uplink,
            self.downlink,
            self.ut_to_dr,
            self.ut_to_enb,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn pathloss_examples() {
        assert_eq!(pathloss_db(1.0).unwrap(), 36.3);
        assert!((pathloss_db(10.0).unwrap() - 73.9).abs() < 1e-12);
        // 36.3 + 37.6 log10(700), evaluated at 30 digits
        assert!((pathloss_db(700.0).unwrap() - 143.275_686_304_536_05).abs() < 1e-10);
    }

    #[test]
    fn pathloss_clamps_below_one_meter() {
        assert_eq!(pathloss_db(0.0).unwrap(), 36.3);
        assert_eq!(pathloss_db(0.25).unwrap(), 36.3);
    }

    #[test]
    fn pathloss_rejects_bad_distance() {
        assert!(matches!(pathloss_db(-1.0), Err(Error::Domain(_))));
        assert!(matches!(pathloss_db(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(pathloss_db(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn db_linear_examples() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        let v = 3.7;
        assert!(rel(db_to_linear(linear_to_db(v).unwrap()), v) < 1e-12);
        assert!(linear_to_db(0.0).is_err());
        assert!(linear_to_db(-2.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_inside_the_cell() {
        let a = sample_uniform_positions(700.0, 42).unwrap();
        let b = sample_uniform_positions(700.0, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_uniform_positions(700.0, 43).unwrap();
        assert_ne!(a, c);
        for seed in 0..200 {
            let p = sample_uniform_positions(700.0, seed).unwrap();
            for (_, ue) in p.user_equipments() {
                assert!(ue.distance_to(&p.enb) <= 700.0);
            }
        }
        assert!(sample_uniform_positions(0.0, 1).is_err());
    }

    #[test]
    fn disc_mean_radius_is_two_thirds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let center = NodePosition::new(0.0, 0.0);
        let n = 100_000;
        let radius = 700.0;
        let mean = (0..n)
            .map(|_| uniform_disc_point(&mut rng, center, radius).distance_to(&center))
            .sum::<f64>()
            / n as f64;
        assert!(rel(mean, 2.0 * radius / 3.0) < 0.01, "mean radius {mean}");
    }

    #[test]
    fn disc_radius_follows_square_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let center = NodePosition::new(0.0, 0.0);
        let n = 100_000;
        let mut radii: Vec<f64> = (0..n)
            .map(|_| uniform_disc_point(&mut rng, center, 1.0).distance_to(&center))
            .collect();
        radii.sort_by(f64::total_cmp);
        // Kolmogorov-Smirnov distance against F(r) = r^2.
        let ks = radii
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let f = r * r;
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (f - lo).abs().max((hi - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn coincident_pair_clamps_to_minimum_distance() {
        let mut p = Placement::default_explicit();
        p.dr = p.dt;
        let s = Scenario::build(&p, 700.0).unwrap();
        assert_eq!(s.direct.db, pathloss_db(D_MIN_M).unwrap());
    }

    #[test]
    fn collinear_decade_gives_one_slope() {
        let p = Placement {
            enb: NodePosition::new(0.0, 0.0),
            dt: NodePosition::new(100.0, 0.0),
            dr: NodePosition::new(110.0, 0.0),
            ut: NodePosition::new(-50.0, 0.0),
        };
        let s = Scenario::build(&p, 700.0).unwrap();
        assert!((s.uplink.db - s.direct.db - 37.6).abs() < 1e-12);
    }

    #[test]
    fn default_scenario_is_consistent() {
        let s = Scenario::build(&Placement::default_explicit(), 700.0).unwrap();
        for pl in s.pathlosses() {
            assert!(pl.linear >= 1.0);
            assert!(rel(pl.linear, db_to_linear(pl.db)) < 1e-9);
            assert!((linear_to_db(pl.linear).unwrap() - pl.db).abs() <= 1e-9 * pl.db);
        }
        assert!(
            s.pathloss_gap_db() < 0.0,
            "direct link should be the shorter one"
        );
    }

    #[test]
    fn build_rejects_non_finite_positions() {
        let mut p = Placement::default_explicit();
        p.ut.x = f64::NAN;
        assert!(Scenario::build(&p, 700.0).is_err());
    }

    proptest! {
        #[test]
        fn pathloss_strictly_increasing(d in 1.0f64..1.0e5, step in 1e-6f64..1.0e3) {
            prop_assert!(pathloss_db(d + step).unwrap() > pathloss_db(d).unwrap());
        }

        #[test]
        fn db_round_trip(db in -50.0f64..200.0) {
            let back = linear_to_db(db_to_linear(db)).unwrap();
            let v = db_to_linear(db);
            prop_assert!(rel(db_to_linear(back), v) < 1e-12);
        }
    }
}
