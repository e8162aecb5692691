//! Flat `key = value` text formats for system configs and experiment specs.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys carry their unit as a suffix (`_m`, `_hz`, `_w`, `_dbm`). Lists are
//! comma separated. Unknown and duplicate keys are rejected.
//!
//! System config keys:
//!
//! | key | required | meaning |
//! |-----|----------|---------|
//! | `carrier_frequency_hz` | yes | carrier frequency |
//! | `transmit_power_w` | yes | user transmit power |
//! | `relative_permittivity` | yes | waveguide eps_r |
//! | `loss_tangent` | yes | waveguide tan delta |
//! | `waveguide_height_m` | yes | waveguide height above ground |
//! | `area_x_m`, `area_y_m` | yes | deployment area |
//! | `waveguide_length_m` | no | defaults to `area_y_m` |
//! | `antenna_positions_m` | one of | explicit antenna offsets |
//! | `n_pas` | one of | uniformly spaced antennas |
//! | `noise_dbm` | one of | noise power |
//! | `noise_variance_w` | one of | noise variance |
//! | `channel_gain` | no | defaults to 1 |
//! | `grid_spacing_m` | no | coarse grid spacing, default lambda/4 |
//! | `num_candidates` | no | grid candidates refined by LM, default 20 |
//! | `min_separation_m` | no | candidate separation, default lambda |
//! | `lm_initial_damping` | no | absolute damping seed |
//! | `lm_damping_up`, `lm_damping_down` | no | damping factors, default 10 |
//! | `lm_max_iterations` | no | default 100 |
//! | `lm_step_tolerance_m` | no | default 1e-9 |

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::channel::{AntennaLayout, NoiseLevel, SystemConfig, SystemParams, UserPosition};
use crate::error::{Error, Result};
use crate::estimator::{Estimator, GridSearchConfig, LmConfig};
use crate::montecarlo::{MapSpec, SweepSpec, TruthSampler};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed `key = value` assignments with their source lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, Entry>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty()
                || !key
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
            {
                return Err(Error::Parse {
                    line,
                    reason: format!("invalid key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(Error::ParseKey {
                    line,
                    key: key.to_string(),
                    reason: "missing value".into(),
                });
            }
            if let Some(prev) = entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            ) {
                return Err(Error::ParseKey {
                    line,
                    key: key.to_string(),
                    reason: format!("duplicate key (first set on line {})", prev.line),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn key_error(&self, key: &str, reason: impl Into<String>) -> Error {
        Error::ParseKey {
            line: self.line_of(key).unwrap_or(0),
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.key_error(key, format!("cannot parse `{}`", e.value))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<T>()
                    .map_err(|_| self.key_error(key, format!("cannot parse list item `{item}`")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.key_error(k, "unknown key")),
            None => Ok(()),
        }
    }

    /// Comments and layout stripped, keys sorted: `key = value\n` per entry.
    pub fn canonical_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, e)| {
                let value: Vec<&str> = e.value.split(',').map(str::trim).collect();
                format!("{k} = {}\n", value.join(","))
            })
            .collect()
    }
}

fn positive_f64(kv: &KeyValues, key: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(kv.key_error(key, format!("must be positive, got {value}")))
    }
}

const SYSTEM_KEYS: &[&str] = &[
    "carrier_frequency_hz",
    "transmit_power_w",
    "relative_permittivity",
    "loss_tangent",
    "waveguide_height_m",
    "area_x_m",
    "area_y_m",
    "waveguide_length_m",
    "antenna_positions_m",
    "n_pas",
    "noise_dbm",
    "noise_variance_w",
    "channel_gain",
    "grid_spacing_m",
    "num_candidates",
    "min_separation_m",
    "lm_initial_damping",
    "lm_damping_up",
    "lm_damping_down",
    "lm_max_iterations",
    "lm_step_tolerance_m",
];

/// A system config file together with the estimator settings it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: SystemParams,
    pub system: SystemConfig,
    pub grid_spacing_m: Option<f64>,
    pub num_candidates: Option<usize>,
    pub min_separation_m: Option<f64>,
    pub lm: LmConfig,
    /// Normalised text of the file, the input of the config hash.
    pub canonical_text: String,
}

impl ScenarioConfig {
    /// Grid-search settings for `cfg` (which may differ from `self.system`
    /// in noise or antenna layout), with this file's overrides applied.
    pub fn grid_config(&self, cfg: &SystemConfig) -> GridSearchConfig {
        let mut g = GridSearchConfig::for_system(cfg);
        if let Some(v) = self.grid_spacing_m {
            g.spacing_m = v;
        }
        if let Some(v) = self.num_candidates {
            g.num_candidates = v;
        }
        if let Some(v) = self.min_separation_m {
            g.min_separation_m = v;
        }
        g
    }
}

/// Parses and validates a system config file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let kv = KeyValues::parse(text)?;
    kv.reject_unknown(SYSTEM_KEYS)?;

    let antennas = match (kv.contains("antenna_positions_m"), kv.contains("n_pas")) {
        (true, true) => {
            return Err(kv.key_error(
                "n_pas",
                "give either `n_pas` or `antenna_positions_m`, not both",
            ))
        }
        (true, false) => {
            AntennaLayout::Explicit(kv.get_list("antenna_positions_m")?.unwrap_or_default())
        }
        (false, true) => AntennaLayout::Uniform(kv.require("n_pas")?),
        (false, false) => return Err(Error::MissingKey("n_pas or antenna_positions_m".into())),
    };
    let noise = match (
        kv.get::<f64>("noise_dbm")?,
        kv.get::<f64>("noise_variance_w")?,
    ) {
        (Some(_), Some(_)) => {
            return Err(kv.key_error(
                "noise_variance_w",
                "give either `noise_dbm` or `noise_variance_w`, not both",
            ))
        }
        (Some(dbm), None) => NoiseLevel::Dbm(dbm),
        (None, Some(w)) => NoiseLevel::VarianceW(w),
        (None, None) => return Err(Error::MissingKey("noise_dbm or noise_variance_w".into())),
    };

    let params = SystemParams {
        carrier_frequency_hz: kv.require("carrier_frequency_hz")?,
        transmit_power_w: kv.require("transmit_power_w")?,
        relative_permittivity: kv.require("relative_permittivity")?,
        loss_tangent: kv.require("loss_tangent")?,
        waveguide_height_m: kv.require("waveguide_height_m")?,
        area_x_m: kv.require("area_x_m")?,
        area_y_m: kv.require("area_y_m")?,
        waveguide_length_m: kv.get("waveguide_length_m")?,
        antennas,
        noise,
        channel_gain: kv.get("channel_gain")?.unwrap_or(1.0),
        ..SystemParams::default()
    };
    let system = SystemConfig::new(&params).map_err(|e| match e {
        Error::InvalidParameter { key, reason } => {
            let source = match key.as_str() {
                "noise_variance_w" if kv.contains("noise_dbm") => "noise_dbm",
                "antenna_positions_m" if kv.contains("n_pas") => "n_pas",
                other => other,
            };
            kv.key_error(source, reason)
        }
        other => other,
    })?;

    let grid_spacing_m = match kv.get::<f64>("grid_spacing_m")? {
        Some(v) => Some(positive_f64(&kv, "grid_spacing_m", v)?),
        None => None,
    };
    let num_candidates = kv.get::<usize>("num_candidates")?;
    if num_candidates == Some(0) {
        return Err(kv.key_error("num_candidates", "must be at least 1"));
    }
    let min_separation_m = kv.get::<f64>("min_separation_m")?;
    if let Some(v) = min_separation_m {
        if !(v.is_finite() && v >= 0.0) {
            return Err(kv.key_error("min_separation_m", "must be non-negative"));
        }
    }
    let defaults = LmConfig::default();
    let lm = LmConfig {
        initial_damping: kv.get("lm_initial_damping")?,
        damping_up: kv.get("lm_damping_up")?.unwrap_or(defaults.damping_up),
        damping_down: kv.get("lm_damping_down")?.unwrap_or(defaults.damping_down),
        max_iterations: kv
            .get("lm_max_iterations")?
            .unwrap_or(defaults.max_iterations),
        step_tolerance_m: kv
            .get("lm_step_tolerance_m")?
            .unwrap_or(defaults.step_tolerance_m),
    };
    lm.validate().map_err(|e| match e {
        Error::InvalidParameter { key, reason } => kv.key_error(&key, reason),
        other => other,
    })?;

    Ok(ScenarioConfig {
        params,
        system,
        grid_spacing_m,
        num_candidates,
        min_separation_m,
        lm,
        canonical_text: kv.canonical_text(),
    })
}

fn parse_estimators(kv: &KeyValues) -> Result<Vec<Estimator>> {
    Ok(kv
        .get_list::<Estimator>("estimators")?
        .unwrap_or_else(|| Estimator::ALL.to_vec()))
}

/// A sweep spec file with the estimators it requests.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFile {
    pub spec: SweepSpec,
    pub estimators: Vec<Estimator>,
    pub canonical_text: String,
}

/// Sweep spec keys: `noise_dbm_list`, `pa_counts`, `trials` (default 1000),
/// `truth` (`uniform` or `x,y`), `master_seed`, `estimators` (default `ml,wls`).
pub fn parse_sweep_spec(text: &str) -> Result<SweepFile> {
    let kv = KeyValues::parse(text)?;
    kv.reject_unknown(&[
        "noise_dbm_list",
        "pa_counts",
        "trials",
        "truth",
        "master_seed",
        "estimators",
    ])?;
    let truth = match kv.raw("truth") {
        None => TruthSampler::UniformInArea,
        Some(v) if v.eq_ignore_ascii_case("uniform") => TruthSampler::UniformInArea,
        Some(_) => {
            let xy: Vec<f64> = kv.get_list("truth")?.unwrap_or_default();
            match xy.as_slice() {
                [x, y] => TruthSampler::Fixed(UserPosition::new(*x, *y)),
                _ => return Err(kv.key_error("truth", "expected `uniform` or `x, y`")),
            }
        }
    };
    let spec = SweepSpec {
        noise_dbm_list: kv
            .get_list("noise_dbm_list")?
            .ok_or_else(|| Error::MissingKey("noise_dbm_list".into()))?,
        pa_counts: kv
            .get_list("pa_counts")?
            .ok_or_else(|| Error::MissingKey("pa_counts".into()))?,
        trials: kv.get("trials")?.unwrap_or(1000),
        truth,
        master_seed: kv.require("master_seed")?,
    };
    spec.validate().map_err(|e| match e {
        Error::InvalidParameter { key, reason } => kv.key_error(&key, reason),
        other => other,
    })?;
    Ok(SweepFile {
        spec,
        estimators: parse_estimators(&kv)?,
        canonical_text: kv.canonical_text(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapFile {
    pub spec: MapSpec,
    pub estimators: Vec<Estimator>,
    pub canonical_text: String,
}

/// Map spec keys: `grid_spacing_m`, `trials_per_point` (default 100),
/// `noise_dbm`, `n_pas`, `master_seed`, `estimators` (default `ml,wls`).
pub fn parse_map_spec(text: &str) -> Result<MapFile> {
    let kv = KeyValues::parse(text)?;
    kv.reject_unknown(&[
        "grid_spacing_m",
        "trials_per_point",
        "noise_dbm",
        "n_pas",
        "master_seed",
        "estimators",
    ])?;
    let spec = MapSpec {
        grid_spacing_m: kv.require("grid_spacing_m")?,
        trials_per_point: kv.get("trials_per_point")?.unwrap_or(100),
        noise_dbm: kv.require("noise_dbm")?,
        n_pas: kv.require("n_pas")?,
        master_seed: kv.require("master_seed")?,
    };
    spec.validate().map_err(|e| match e {
        Error::InvalidParameter { key, reason } => kv.key_error(&key, reason),
        other => other,
    })?;
    Ok(MapFile {
        spec,
        estimators: parse_estimators(&kv)?,
        canonical_text: kv.canonical_text(),
    })
}
