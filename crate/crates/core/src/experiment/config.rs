//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Keys use dotted section
//! prefixes (`radio.p_bar`, `sweep.from`, ...). Every key is optional and
//! unknown keys are rejected. [`ExperimentConfig::canonical`] renders the
//! fully resolved configuration in a fixed key order; its SHA-256 is the
//! config hash recorded with every output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::effective_capacity::RateGrid;
use crate::error::{Error, Result};
use crate::geometry::{sample_uniform_positions, NodePosition, Placement, Scenario};
use crate::link_model::{thermal_noise_w, RadioParams, ScenarioKind, ThresholdRule};
use crate::mode_selection::Priors;
use crate::monte_carlo::DEFAULT_PATH_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SigmaT,
    Theta,
    Rate,
    PE1,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::SigmaT => "sigma_t",
            SweepVariable::Theta => "theta",
            SweepVariable::Rate => "rate",
            SweepVariable::PE1 => "p_e1",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sigma_t" => SweepVariable::SigmaT,
            "theta" => SweepVariable::Theta,
            "rate" => SweepVariable::Rate,
            "p_e1" => SweepVariable::PE1,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepScale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: usize,
    pub scale: SweepScale,
    /// Explicit sweep values; overrides `from`/`to`/`steps` when set.
    pub values: Option<Vec<f64>>,
}

impl SweepSpec {
    pub fn points(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        let (Some(from), Some(to)) = (self.from, self.to) else {
            return Vec::new();
        };
        let n = self.steps;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.scale {
                    SweepScale::Linear => from + t * (to - from),
                    SweepScale::Log => {
                        let (a, b) = (from.ln(), to.ln());
                        (a + t * (b - a)).exp()
                    }
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementSpec {
    Explicit(Placement),
    /// Uniform placement drawn from the master seed.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub enabled: bool,
    pub n_paths: usize,
    pub path_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub cell_radius: f64,
    pub radio: RadioParams,
    /// Add receiver noise to the simulated underlay SIR.
    pub with_noise: bool,
    pub priors: Priors,
    /// Test-statistic std in dB when it is not the swept variable.
    pub sigma_t: f64,
    pub threshold_rule: ThresholdRule,
    pub placement: PlacementSpec,
    pub scenario_kind: ScenarioKind,
    /// QoS exponents in 1/bit; each non-theta sweep is repeated per entry.
    pub thetas: Vec<f64>,
    /// Fixed rate in bits/s when it is not the swept variable.
    pub rate: f64,
    pub sweep: SweepSpec,
    pub optrate_enabled: bool,
    pub rate_grid: RateGrid,
    pub mc: McSpec,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cell_radius: 700.0,
            radio: RadioParams::default(),
            with_noise: false,
            priors: Priors::equal(),
            sigma_t: 2.0,
            threshold_rule: ThresholdRule::Consistent,
            placement: PlacementSpec::Explicit(Placement::default_explicit()),
            scenario_kind: ScenarioKind::Overlay,
            thetas: vec![1e-3],
            rate: 25.0,
            sweep: SweepSpec {
                variable: SweepVariable::SigmaT,
                from: Some(0.1),
                to: Some(15.0),
                steps: 30,
                scale: SweepScale::Linear,
                values: None,
            },
            optrate_enabled: false,
            rate_grid: RateGrid::default(),
            mc: McSpec {
                enabled: false,
                n_paths: 100_000,
                path_len: DEFAULT_PATH_LEN,
            },
            master_seed: 1,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "cell_radius",
    "scenario",
    "master_seed",
    "radio.p_bar",
    "radio.p_enb",
    "radio.p_ut",
    "radio.n0",
    "radio.bandwidth",
    "radio.slot_len",
    "radio.with_noise",
    "mode.prior_h0",
    "mode.prior_h1",
    "mode.sigma_t",
    "threshold.paper_literal",
    "placement.kind",
    "placement.enb",
    "placement.dt",
    "placement.dr",
    "placement.ut",
    "qos.theta",
    "qos.rate",
    "sweep.variable",
    "sweep.from",
    "sweep.to",
    "sweep.steps",
    "sweep.scale",
    "sweep.values",
    "optrate.enabled",
    "optrate.r_min",
    "optrate.r_max",
    "optrate.r_step",
    "mc.enabled",
    "mc.n_paths",
    "mc.path_len",
];

struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(RawConfig(map))
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_f64(key, v),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::config(key, format!("expected a non-negative integer, got `{v}`"))
            }),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Error::config(
                key,
                format!("expected true or false, got `{v}`"),
            )),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| v.split(',').map(|x| parse_f64(key, x.trim())).collect())
            .transpose()
    }

    fn position(&self, key: &str, default: NodePosition) -> Result<NodePosition> {
        match self.list(key)? {
            None => Ok(default),
            Some(v) if v.len() == 2 => Ok(NodePosition::new(v[0], v[1])),
            Some(_) => Err(Error::config(key, "expected `x, y`")),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::config(key, format!("expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(Error::config(key, format!("must be finite, got `{v}`")));
    }
    Ok(x)
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let raw = RawConfig::parse(text)?;
        let d = ExperimentConfig::default();

        let bandwidth = raw.f64("radio.bandwidth", d.radio.bandwidth)?;
        let radio = RadioParams {
            p_bar: raw.f64("radio.p_bar", d.radio.p_bar)?,
            p_enb: raw.f64("radio.p_enb", d.radio.p_enb)?,
            p_ut: raw.f64("radio.p_ut", d.radio.p_ut)?,
            n0: raw.f64("radio.n0", thermal_noise_w(bandwidth))?,
            bandwidth,
            slot_len: raw.f64("radio.slot_len", d.radio.slot_len)?,
        };

        let h0 = raw.f64("mode.prior_h0", d.priors.h0)?;
        let h1 = raw.f64("mode.prior_h1", d.priors.h1)?;
        let priors =
            Priors::new(h0, h1).map_err(|e| Error::config("mode.prior_h0", e.to_string()))?;

        let placement = match raw.get("placement.kind").unwrap_or("explicit") {
            "explicit" => {
                let base = Placement::default_explicit();
                PlacementSpec::Explicit(Placement {
                    enb: raw.position("placement.enb", base.enb)?,
                    dt: raw.position("placement.dt", base.dt)?,
                    dr: raw.position("placement.dr", base.dr)?,
                    ut: raw.position("placement.ut", base.ut)?,
                })
            }
            "random" => {
                for key in [
                    "placement.enb",
                    "placement.dt",
                    "placement.dr",
                    "placement.ut",
                ] {
                    if raw.get(key).is_some() {
                        return Err(Error::config(
                            key,
                            "coordinates require placement.kind = explicit",
                        ));
                    }
                }
                PlacementSpec::Random
            }
            other => {
                return Err(Error::config(
                    "placement.kind",
                    format!("expected explicit or random, got `{other}`"),
                ))
            }
        };

        let scenario_kind = match raw.get("scenario") {
            None => d.scenario_kind,
            Some(v) => v
                .parse()
                .map_err(|e: Error| Error::config("scenario", e.to_string()))?,
        };

        let variable = match raw.get("sweep.variable") {
            None => d.sweep.variable,
            Some(v) => SweepVariable::parse(v).ok_or_else(|| {
                Error::config(
                    "sweep.variable",
                    format!("expected sigma_t, theta, rate or p_e1, got `{v}`"),
                )
            })?,
        };
        let scale = match raw.get("sweep.scale") {
            None | Some("linear") => SweepScale::Linear,
            Some("log") => SweepScale::Log,
            Some(v) => {
                return Err(Error::config(
                    "sweep.scale",
                    format!("expected linear or log, got `{v}`"),
                ))
            }
        };
        // a swept variable other than the default gets no default range
        let (from, to) = if variable == d.sweep.variable {
            (d.sweep.from, d.sweep.to)
        } else {
            (None, None)
        };
        let sweep = SweepSpec {
            variable,
            from: raw
                .get("sweep.from")
                .map(|v| parse_f64("sweep.from", v))
                .transpose()?
                .or(from),
            to: raw
                .get("sweep.to")
                .map(|v| parse_f64("sweep.to", v))
                .transpose()?
                .or(to),
            steps: raw.usize("sweep.steps", d.sweep.steps)?,
            scale,
            values: raw.list("sweep.values")?,
        };

        let cfg = ExperimentConfig {
            cell_radius: raw.f64("cell_radius", d.cell_radius)?,
            radio,
            with_noise: raw.bool("radio.with_noise", d.with_noise)?,
            priors,
            sigma_t: raw.f64("mode.sigma_t", d.sigma_t)?,
            threshold_rule: if raw.bool("threshold.paper_literal", false)? {
                ThresholdRule::PaperLiteral
            } else {
                ThresholdRule::Consistent
            },
            placement,
            scenario_kind,
            thetas: raw.list("qos.theta")?.unwrap_or(d.thetas),
            rate: raw.f64("qos.rate", d.rate)?,
            sweep,
            optrate_enabled: raw.bool("optrate.enabled", d.optrate_enabled)?,
            rate_grid: RateGrid {
                r_min: raw.f64("optrate.r_min", d.rate_grid.r_min)?,
                r_max: raw.f64("optrate.r_max", d.rate_grid.r_max)?,
                r_step: raw.f64("optrate.r_step", d.rate_grid.r_step)?,
            },
            mc: McSpec {
                enabled: raw.bool("mc.enabled", d.mc.enabled)?,
                n_paths: raw.usize("mc.n_paths", d.mc.n_paths)?,
                path_len: raw.usize("mc.path_len", d.mc.path_len)?,
            },
            master_seed: match raw.get("master_seed") {
                None => d.master_seed,
                Some(v) => v.parse().map_err(|_| {
                    Error::config(
                        "master_seed",
                        format!("expected an unsigned integer, got `{v}`"),
                    )
                })?,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant, naming the offending key on failure.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        positive("cell_radius", self.cell_radius)?;
        let r = &self.radio;
        positive("radio.p_bar", r.p_bar)?;
        positive("radio.p_enb", r.p_enb)?;
        positive("radio.p_ut", r.p_ut)?;
        positive("radio.n0", r.n0)?;
        positive("radio.bandwidth", r.bandwidth)?;
        positive("radio.slot_len", r.slot_len)?;
        Priors::new(self.priors.h0, self.priors.h1)
            .map_err(|e| Error::config("mode.prior_h0", e.to_string()))?;
        positive("mode.sigma_t", self.sigma_t)?;

        if let PlacementSpec::Explicit(p) = &self.placement {
            for (key, pos) in [
                ("placement.enb", p.enb),
                ("placement.dt", p.dt),
                ("placement.dr", p.dr),
                ("placement.ut", p.ut),
            ] {
                if !pos.is_finite() {
                    return Err(Error::config(key, "coordinates must be finite"));
                }
                if pos.distance_to(&p.enb) > self.cell_radius {
                    return Err(Error::config(
                        key,
                        format!(
                            "({}, {}) lies outside the cell of radius {}",
                            pos.x, pos.y, self.cell_radius
                        ),
                    ));
                }
            }
        }

        if self.thetas.is_empty() {
            return Err(Error::config("qos.theta", "needs at least one value"));
        }
        for &t in &self.thetas {
            positive("qos.theta", t)?;
        }
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::config(
                "qos.rate",
                format!("must be >= 0, got {}", self.rate),
            ));
        }

        self.validate_sweep()?;

        self.rate_grid
            .points()
            .map_err(|e| Error::config("optrate.r_step", e.to_string()))?;
        if self.mc.n_paths == 0 {
            return Err(Error::config("mc.n_paths", "must be at least 1"));
        }
        if self.mc.path_len == 0 {
            return Err(Error::config("mc.path_len", "must be at least 1"));
        }
        Ok(())
    }

    fn validate_sweep(&self) -> Result<()> {
        let s = &self.sweep;
        let values = match &s.values {
            Some(v) => {
                if v.is_empty() {
                    return Err(Error::config("sweep.values", "needs at least one value"));
                }
                v.clone()
            }
            None => {
                let from = s.from.ok_or_else(|| {
                    Error::config("sweep.from", "required for this sweep variable")
                })?;
                let to = s
                    .to
                    .ok_or_else(|| Error::config("sweep.to", "required for this sweep variable"))?;
                if !(from < to) {
                    return Err(Error::config(
                        "sweep.to",
                        format!("sweep range is empty: {from} .. {to}"),
                    ));
                }
                if s.steps < 2 {
                    return Err(Error::config(
                        "sweep.steps",
                        format!("must be at least 2, got {}", s.steps),
                    ));
                }
                if s.scale == SweepScale::Log && !(from > 0.0) {
                    return Err(Error::config(
                        "sweep.from",
                        "log-scaled sweeps need positive endpoints",
                    ));
                }
                vec![from, to]
            }
        };
        let key = if s.values.is_some() {
            "sweep.values"
        } else {
            "sweep.from"
        };
        for v in values {
            let ok = match s.variable {
                SweepVariable::SigmaT | SweepVariable::Theta => v > 0.0,
                SweepVariable::Rate => v >= 0.0,
                SweepVariable::PE1 => v > 0.0 && v < 0.5,
            };
            if !ok || !v.is_finite() {
                return Err(Error::config(
                    key,
                    format!(
                        "value {v} is out of range for a {} sweep",
                        s.variable.as_str()
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn placement(&self) -> Result<Placement> {
        match &self.placement {
            PlacementSpec::Explicit(p) => Ok(*p),
            PlacementSpec::Random => sample_uniform_positions(self.cell_radius, self.master_seed),
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::build(&self.placement()?, self.cell_radius)
    }

    /// Fully resolved configuration in fixed key order.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let pos = |p: NodePosition| format!("{:?}, {:?}", p.x, p.y);
        kv("cell_radius", format!("{:?}", self.cell_radius));
        kv("scenario", self.scenario_kind.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("radio.p_bar", format!("{:?}", self.radio.p_bar));
        kv("radio.p_enb", format!("{:?}", self.radio.p_enb));
        kv("radio.p_ut", format!("{:?}", self.radio.p_ut));
        kv("radio.n0", format!("{:?}", self.radio.n0));
        kv("radio.bandwidth", format!("{:?}", self.radio.bandwidth));
        kv("radio.slot_len", format!("{:?}", self.radio.slot_len));
        kv("radio.with_noise", self.with_noise.to_string());
        kv("mode.prior_h0", format!("{:?}", self.priors.h0));
        kv("mode.prior_h1", format!("{:?}", self.priors.h1));
        kv("mode.sigma_t", format!("{:?}", self.sigma_t));
        kv(
            "threshold.paper_literal",
            (self.threshold_rule == ThresholdRule::PaperLiteral).to_string(),
        );
        match &self.placement {
            PlacementSpec::Explicit(p) => {
                kv("placement.kind", "explicit".into());
                kv("placement.enb", pos(p.enb));
                kv("placement.dt", pos(p.dt));
                kv("placement.dr", pos(p.dr));
                kv("placement.ut", pos(p.ut));
            }
            PlacementSpec::Random => kv("placement.kind", "random".into()),
        }
        kv("qos.theta", list(&self.thetas));
        kv("qos.rate", format!("{:?}", self.rate));
        kv("sweep.variable", self.sweep.variable.as_str().into());
        match &self.sweep.values {
            Some(v) => kv("sweep.values", list(v)),
            None => {
                if let (Some(from), Some(to)) = (self.sweep.from, self.sweep.to) {
                    kv("sweep.from", format!("{from:?}"));
                    kv("sweep.to", format!("{to:?}"));
                }
                kv("sweep.steps", self.sweep.steps.to_string());
                let scale = match self.sweep.scale {
                    SweepScale::Linear => "linear",
                    SweepScale::Log => "log",
                };
                kv("sweep.scale", scale.into());
            }
        }
        kv("optrate.enabled", self.optrate_enabled.to_string());
        kv("optrate.r_min", format!("{:?}", self.rate_grid.r_min));
        kv("optrate.r_max", format!("{:?}", self.rate_grid.r_max));
        kv("optrate.r_step", format!("{:?}", self.rate_grid.r_step));
        kv("mc.enabled", self.mc.enabled.to_string());
        kv("mc.n_paths", self.mc.n_paths.to_string());
        kv("mc.path_len", self.mc.path_len.to_string());
        out
    }

    /// Hex SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}
