//! Flat TOML configuration files and the two shipped presets.
//!
//! Every key sits at the top level. Allocation and timing keys are required;
//! geometry, timing resolution, pickup-probability keys, `object_updates`,
//! `seed` and `replications` fall back to [`defaults`] when absent. Unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{Mode, ObjectUpdatePolicy, VdrParams};
use crate::arena::ArenaConfig;
use crate::experiment::{ConfigError, ExperimentConfig};

pub const SET1_TOML: &str = include_str!("../presets/set1.toml");
pub const SET2_TOML: &str = include_str!("../presets/set2.toml");

/// Values used for keys a file leaves out.
pub mod defaults {
    pub const ARENA_HALF_WIDTH: f64 = 6.0;
    pub const NEST_RADIUS: f64 = 1.0;
    pub const ROBOT_RADIUS: f64 = 0.08;
    pub const OBJECT_RADIUS: f64 = 0.08;
    pub const ROBOT_SPEED: f64 = 2.0;
    pub const CONTACT_MARGIN: f64 = 0.05;
    pub const HEADING_JITTER: f64 = 0.1;
    pub const TICK_DURATION: f64 = 0.1;
    pub const LEAVE_CHECK_INTERVAL: f64 = 0.1;
    pub const POBJ_MAX: f64 = 0.15;
    pub const POBJ_MIN: f64 = 0.002;
    pub const POBJ_INITIAL: f64 = 0.075;
    pub const POBJ_DELTA: f64 = 0.0025;
    pub const OBJECT_UPDATES: super::ObjectUpdatePolicy = super::ObjectUpdatePolicy::PerAttempt;
    pub const SEED: u64 = 0;
    pub const REPLICATIONS: usize = 20;
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid config: {0}")]
    Invalid(#[from] ConfigError),
    #[error("unknown preset `{0}` (expected set1 or set2)")]
    UnknownPreset(String),
}

/// On-disk layout. Every field is optional so that missing keys can be
/// reported by name or defaulted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub mode: Option<Mode>,
    pub robot_count: Option<usize>,
    pub objects_type1: Option<usize>,
    pub objects_type2: Option<usize>,
    pub horizon: Option<f64>,
    pub search_timeout: Option<f64>,
    pub tick_duration: Option<f64>,
    pub leave_check_interval: Option<f64>,
    pub p1_max: Option<f64>,
    pub p1_min: Option<f64>,
    pub p1_initial: Option<f64>,
    pub p1_delta: Option<f64>,
    pub pobj1_max: Option<f64>,
    pub pobj1_min: Option<f64>,
    pub pobj1_initial: Option<f64>,
    pub pobj1_delta: Option<f64>,
    pub pobj2_max: Option<f64>,
    pub pobj2_min: Option<f64>,
    pub pobj2_initial: Option<f64>,
    pub pobj2_delta: Option<f64>,
    pub object_updates: Option<ObjectUpdatePolicy>,
    pub arena_half_width: Option<f64>,
    pub nest_radius: Option<f64>,
    pub robot_radius: Option<f64>,
    pub object_radius: Option<f64>,
    pub robot_speed: Option<f64>,
    pub contact_margin: Option<f64>,
    pub heading_jitter: Option<f64>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
}

pub const KEYS: &[&str] = &[
    "mode",
    "robot_count",
    "objects_type1",
    "objects_type2",
    "horizon",
    "search_timeout",
    "tick_duration",
    "leave_check_interval",
    "p1_max",
    "p1_min",
    "p1_initial",
    "p1_delta",
    "pobj1_max",
    "pobj1_min",
    "pobj1_initial",
    "pobj1_delta",
    "pobj2_max",
    "pobj2_min",
    "pobj2_initial",
    "pobj2_delta",
    "object_updates",
    "arena_half_width",
    "nest_radius",
    "robot_radius",
    "object_radius",
    "robot_speed",
    "contact_margin",
    "heading_jitter",
    "seed",
    "replications",
];

fn required<T>(v: Option<T>, key: &'static str) -> Result<T, LoadError> {
    v.ok_or(LoadError::MissingKey(key))
}

impl ConfigFile {
    pub fn into_config(self) -> Result<ExperimentConfig<f64>, LoadError> {
        use defaults as d;
        let vdr = |max, min, init, delta| VdrParams {
            p_max: max,
            p_min: min,
            p_initial: init,
            delta,
        };
        let config = ExperimentConfig {
            mode: required(self.mode, "mode")?,
            robot_count: required(self.robot_count, "robot_count")?,
            object_totals: [
                required(self.objects_type1, "objects_type1")?,
                required(self.objects_type2, "objects_type2")?,
            ],
            horizon: required(self.horizon, "horizon")?,
            search_timeout: required(self.search_timeout, "search_timeout")?,
            tick_duration: self.tick_duration.unwrap_or(d::TICK_DURATION),
            leave_check_interval: self.leave_check_interval.unwrap_or(d::LEAVE_CHECK_INTERVAL),
            leave_params: vdr(
                required(self.p1_max, "p1_max")?,
                required(self.p1_min, "p1_min")?,
                required(self.p1_initial, "p1_initial")?,
                required(self.p1_delta, "p1_delta")?,
            ),
            obj_params: [
                vdr(
                    self.pobj1_max.unwrap_or(d::POBJ_MAX),
                    self.pobj1_min.unwrap_or(d::POBJ_MIN),
                    self.pobj1_initial.unwrap_or(d::POBJ_INITIAL),
                    self.pobj1_delta.unwrap_or(d::POBJ_DELTA),
                ),
                vdr(
                    self.pobj2_max.unwrap_or(d::POBJ_MAX),
                    self.pobj2_min.unwrap_or(d::POBJ_MIN),
                    self.pobj2_initial.unwrap_or(d::POBJ_INITIAL),
                    self.pobj2_delta.unwrap_or(d::POBJ_DELTA),
                ),
            ],
            object_updates: self.object_updates.unwrap_or(d::OBJECT_UPDATES),
            arena: ArenaConfig {
                arena_half_width: self.arena_half_width.unwrap_or(d::ARENA_HALF_WIDTH),
                nest_radius: self.nest_radius.unwrap_or(d::NEST_RADIUS),
                robot_radius: self.robot_radius.unwrap_or(d::ROBOT_RADIUS),
                object_radius: self.object_radius.unwrap_or(d::OBJECT_RADIUS),
                robot_speed: self.robot_speed.unwrap_or(d::ROBOT_SPEED),
                contact_margin: self.contact_margin.unwrap_or(d::CONTACT_MARGIN),
                heading_jitter: self.heading_jitter.unwrap_or(d::HEADING_JITTER),
            },
            seed: self.seed.unwrap_or(d::SEED),
            replications: self.replications.unwrap_or(d::REPLICATIONS),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_config(c: &ExperimentConfig<f64>) -> Self {
        ConfigFile {
            mode: Some(c.mode),
            robot_count: Some(c.robot_count),
            objects_type1: Some(c.object_totals[0]),
            objects_type2: Some(c.object_totals[1]),
            horizon: Some(c.horizon),
            search_timeout: Some(c.search_timeout),
            tick_duration: Some(c.tick_duration),
            leave_check_interval: Some(c.leave_check_interval),
            p1_max: Some(c.leave_params.p_max),
            p1_min: Some(c.leave_params.p_min),
            p1_initial: Some(c.leave_params.p_initial),
            p1_delta: Some(c.leave_params.delta),
            pobj1_max: Some(c.obj_params[0].p_max),
            pobj1_min: Some(c.obj_params[0].p_min),
            pobj1_initial: Some(c.obj_params[0].p_initial),
            pobj1_delta: Some(c.obj_params[0].delta),
            pobj2_max: Some(c.obj_params[1].p_max),
            pobj2_min: Some(c.obj_params[1].p_min),
            pobj2_initial: Some(c.obj_params[1].p_initial),
            pobj2_delta: Some(c.obj_params[1].delta),
            object_updates: Some(c.object_updates),
            arena_half_width: Some(c.arena.arena_half_width),
            nest_radius: Some(c.arena.nest_radius),
            robot_radius: Some(c.arena.robot_radius),
            object_radius: Some(c.arena.object_radius),
            robot_speed: Some(c.arena.robot_speed),
            contact_margin: Some(c.arena.contact_margin),
            heading_jitter: Some(c.arena.heading_jitter),
            seed: Some(c.seed),
            replications: Some(c.replications),
        }
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig<f64>, LoadError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| LoadError::Parse(e.to_string()))?;
    if let Some(key) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(LoadError::UnknownKey(key.clone()));
    }
    let file: ConfigFile = table
        .try_into()
        .map_err(|e: toml::de::Error| LoadError::Parse(e.to_string()))?;
    file.into_config()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig<f64>, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Serializes every key, in a fixed order.
pub fn write_config(config: &ExperimentConfig<f64>) -> String {
    toml::to_string(&ConfigFile::from_config(config)).expect("config serializes")
}

pub fn preset(name: &str) -> Result<ExperimentConfig<f64>, LoadError> {
    match name {
        "set1" => parse_config(SET1_TOML),
        "set2" => parse_config(SET2_TOML),
        other => Err(LoadError::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set1_preset_values() {
        let c = preset("set1").unwrap();
        assert_eq!(c.mode, Mode::Original);
        assert_eq!(c.robot_count, 15);
        assert_eq!(c.object_totals, [30, 35]);
        assert_eq!(c.horizon, 180.0);
        assert_eq!(c.search_timeout, 15.0);
        assert_eq!(
            c.leave_params,
            VdrParams {
                p_max: 0.08,
                p_min: 0.002,
                p_initial: 0.04,
                delta: 0.0003
            }
        );
        assert_eq!(c.replications, 20);
    }

    #[test]
    fn set2_preset_values() {
        let c = preset("set2").unwrap();
        assert_eq!(c.mode, Mode::Modified);
        assert_eq!(c.robot_count, 15);
        assert_eq!(c.object_totals, [30, 35]);
        assert_eq!(c.horizon, 300.0);
        assert_eq!(c.search_timeout, 25.0);
        assert_eq!(
            c.leave_params,
            VdrParams {
                p_max: 0.08,
                p_min: 0.002,
                p_initial: 0.04,
                delta: 0.0015
            }
        );
        for p in c.obj_params {
            assert_eq!(
                p,
                VdrParams {
                    p_max: 0.15,
                    p_min: 0.002,
                    p_initial: 0.075,
                    delta: 0.0025
                }
            );
        }
    }

    #[test]
    fn inverted_bounds_name_the_keys() {
        let text = SET1_TOML.replace("p1_min = 0.002", "p1_min = 0.5");
        match parse_config(&text) {
            Err(LoadError::Invalid(ConfigError::Invalid { key, .. })) => {
                assert!(key.contains("p1_min") && key.contains("p1_max"), "{key}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{SET1_TOML}\nwarp_speed = 9\n");
        assert!(matches!(parse_config(&text), Err(LoadError::UnknownKey(k)) if k == "warp_speed"));
    }

    #[test]
    fn missing_required_key() {
        let text: String = SET1_TOML
            .lines()
            .filter(|l| !l.starts_with("horizon"))
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(parse_config(&text), Err(LoadError::MissingKey("horizon"))));
    }

    #[test]
    fn geometry_defaults_fill_in() {
        let text = "mode = \"original\"\nrobot_count = 3\nobjects_type1 = 2\nobjects_type2 = 2\n\
                    horizon = 10.0\nsearch_timeout = 5.0\np1_max = 0.08\np1_min = 0.002\n\
                    p1_initial = 0.04\np1_delta = 0.0003\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.arena.arena_half_width, defaults::ARENA_HALF_WIDTH);
        assert_eq!(c.arena.robot_speed, defaults::ROBOT_SPEED);
        assert_eq!(c.tick_duration, defaults::TICK_DURATION);
        assert_eq!(c.replications, defaults::REPLICATIONS);
    }

    #[test]
    fn parse_errors_surface() {
        assert!(matches!(parse_config("mode = "), Err(LoadError::Parse(_))));
        assert!(matches!(parse_config("mode = \"sideways\""), Err(LoadError::Parse(_))));
        assert!(matches!(preset("set3"), Err(LoadError::UnknownPreset(_))));
    }
}
