//! Pipeline configuration: `key = value` text files with `--set`-style
//! overrides, strict unknown-key rejection, and a canonical dump whose
//! round-trip reproduces the parsed values exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::descriptor::DescriptorParams;
use crate::distance::{DistanceMetric, ShiftSet};
use crate::mapping::MappingParams;
use crate::matching::MatchingParams;

/// Matching strategy selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatcherKind {
    /// Double distance matrix sequence matching.
    Dd,
    /// Single-matrix sequence matching over the elementwise minimum.
    Sm,
    /// Nearest neighbor over each query's column pair.
    Nn,
    /// Retrieval-key candidate selection followed by nearest neighbor.
    RkNn,
}

impl MatcherKind {
    fn as_str(&self) -> &'static str {
        match self {
            MatcherKind::Dd => "dd",
            MatcherKind::Sm => "sm",
            MatcherKind::Nn => "nn",
            MatcherKind::RkNn => "rk",
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("line {0}: expected `key = value`")]
    BadLine(usize),
    #[error("invalid value for `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
    #[error("missing required config key `{0}`")]
    MissingKey(&'static str),
    #[error("config constraint violated: {0}")]
    Constraint(String),
}

/// Input/output locations; CLI flags override file-provided values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigPaths {
    pub trajectory: Option<PathBuf>,
    pub points: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Fully resolved pipeline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mapping: MappingParams,
    pub descriptor: DescriptorParams,
    pub shifts: ShiftSet,
    pub matching: MatchingParams,
    pub metric: DistanceMetric,
    pub matcher: MatcherKind,
    pub rk_top_k: usize,
    pub r_m: Vec<f64>,
    pub stationary_eps: f64,
    pub paths: ConfigPaths,
}

/// Slack admitted when checking `r_k >= sqrt(r_lo^2 + r_la^2)`: the stock
/// parameter set rounds r_k to 35.35 while sqrt(2) * 25 = 35.3553...
const RANGE_CHECK_SLACK: f64 = 0.01;

impl PipelineConfig {
    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_and_overrides(&text, overrides)
    }

    pub fn from_str_and_overrides(
        text: &str,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::BadLine(idx + 1))?;
            raw.set(key.trim(), value.trim())?;
        }
        for (key, value) in overrides {
            raw.set(key.trim(), value.trim())?;
        }
        raw.build()
    }

    /// Defaults with the required camera height filled in.
    pub fn with_defaults(h_c: f64) -> Self {
        Self {
            mapping: MappingParams::default(),
            descriptor: DescriptorParams::with_defaults(h_c),
            shifts: ShiftSet::default(),
            matching: MatchingParams::default(),
            metric: DistanceMetric::Vd,
            matcher: MatcherKind::Dd,
            rk_top_k: 10,
            r_m: vec![15.0, 80.0],
            stationary_eps: 0.05,
            paths: ConfigPaths::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.mapping.validate().map_err(ConfigError::Constraint)?;
        self.descriptor.validate().map_err(ConfigError::Constraint)?;
        self.matching.validate().map_err(ConfigError::Constraint)?;
        let constraint = |msg: String| Err(ConfigError::Constraint(msg));
        let d = &self.descriptor;
        let m = &self.mapping;
        if m.r_d < d.r_lo {
            return constraint(format!("r_d ({}) must be >= r_lo ({})", m.r_d, d.r_lo));
        }
        let diag = (d.r_lo * d.r_lo + d.r_la * d.r_la).sqrt();
        if m.r_k + RANGE_CHECK_SLACK < diag {
            return constraint(format!(
                "r_k ({}) must be >= sqrt(r_lo^2 + r_la^2) = {diag:.4}",
                m.r_k
            ));
        }
        let max_lo = self.shifts.longitudinal().iter().map(|k| k.unsigned_abs()).max().unwrap();
        let max_la = self.shifts.lateral().iter().map(|l| l.unsigned_abs()).max().unwrap();
        if max_lo as usize >= d.m || max_la as usize >= d.n {
            return constraint(format!(
                "shift magnitudes ({max_lo}, {max_la}) must be below grid dims ({}, {})",
                d.m, d.n
            ));
        }
        if self.r_m.is_empty() || self.r_m.iter().any(|&r| r <= 0.0 || r.is_nan()) {
            return constraint(format!("r_m radii must be positive, got {:?}", self.r_m));
        }
        if self.rk_top_k < 1 {
            return constraint("rk_top_k must be >= 1".into());
        }
        if self.stationary_eps < 0.0 || self.stationary_eps.is_nan() {
            return constraint(format!("stationary_eps must be >= 0, got {}", self.stationary_eps));
        }
        Ok(())
    }

    /// Canonical `key = value` dump; parsing it reproduces this config.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("r_d", format!("{}", self.mapping.r_d));
        kv("r_k", format!("{}", self.mapping.r_k));
        kv("r_a", format!("{}", self.mapping.r_a));
        kv("s", format!("{}", self.mapping.s));
        kv("r_lo", format!("{}", self.descriptor.r_lo));
        kv("r_la", format!("{}", self.descriptor.r_la));
        kv("m", format!("{}", self.descriptor.m));
        kv("n", format!("{}", self.descriptor.n));
        kv("h_c", format!("{}", self.descriptor.h_c));
        kv("s_lo", join_i32(self.shifts.longitudinal()));
        kv("s_la", join_i32(self.shifts.lateral()));
        kv("w", format!("{}", self.matching.w));
        kv("v_min", format!("{}", self.matching.v_min));
        kv("v_max", format!("{}", self.matching.v_max));
        kv("n_v", format!("{}", self.matching.n_v));
        kv("exclusion_half_width", format!("{}", self.matching.exclusion_half_width));
        kv(
            "metric",
            match self.metric {
                DistanceMetric::Vd => "vd",
                DistanceMetric::Sc => "sc",
                DistanceMetric::Cd => "cd",
            }
            .into(),
        );
        kv("matcher", self.matcher.as_str().into());
        kv("rk_top_k", format!("{}", self.rk_top_k));
        kv("r_m", self.r_m.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(","));
        kv("stationary_eps", format!("{}", self.stationary_eps));
        for (key, path) in [
            ("trajectory", &self.paths.trajectory),
            ("points", &self.paths.points),
            ("gt", &self.paths.gt),
            ("db", &self.paths.db),
            ("out", &self.paths.out),
        ] {
            if let Some(p) = path {
                kv(key, p.display().to_string());
            }
        }
        out
    }
}

fn join_i32(values: &[i32]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Default)]
struct RawConfig {
    values: BTreeMap<&'static str, String>,
}

const KEYS: &[&str] = &[
    "r_d", "r_k", "r_a", "s", "r_lo", "r_la", "m", "n", "h_c", "s_lo", "s_la", "w", "v_min",
    "v_max", "n_v", "exclusion_half_width", "metric", "matcher", "rk_top_k", "r_m",
    "stationary_eps", "trajectory", "points", "gt", "db", "out",
];

impl RawConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match KEYS.iter().find(|&&k| k == key) {
            Some(&canon) => {
                self.values.insert(canon, value.to_string());
                Ok(())
            }
            None => Err(ConfigError::UnknownKey(key.to_string())),
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e: T::Err| ConfigError::InvalidValue { key: key.into(), msg: e.to_string() }),
        }
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|part| {
                    part.trim().parse().map_err(|e: T::Err| ConfigError::InvalidValue {
                        key: key.into(),
                        msg: format!("`{part}`: {e}"),
                    })
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    fn build(&self) -> Result<PipelineConfig, ConfigError> {
        let h_c: f64 = self.parse("h_c")?.ok_or(ConfigError::MissingKey("h_c"))?;
        let mut cfg = PipelineConfig::with_defaults(h_c);

        if let Some(v) = self.parse("r_d")? {
            cfg.mapping.r_d = v;
        }
        if let Some(v) = self.parse("r_k")? {
            cfg.mapping.r_k = v;
        }
        if let Some(v) = self.parse("r_a")? {
            cfg.mapping.r_a = v;
        }
        if let Some(v) = self.parse("s")? {
            cfg.mapping.s = v;
        }
        if let Some(v) = self.parse("r_lo")? {
            cfg.descriptor.r_lo = v;
        }
        if let Some(v) = self.parse("r_la")? {
            cfg.descriptor.r_la = v;
        }
        if let Some(v) = self.parse("m")? {
            cfg.descriptor.m = v;
        }
        if let Some(v) = self.parse("n")? {
            cfg.descriptor.n = v;
        }
        let s_lo: Option<Vec<i32>> = self.parse_list("s_lo")?;
        let s_la: Option<Vec<i32>> = self.parse_list("s_la")?;
        if s_lo.is_some() || s_la.is_some() {
            let lo = s_lo.unwrap_or_else(|| cfg.shifts.longitudinal().to_vec());
            let la = s_la.unwrap_or_else(|| cfg.shifts.lateral().to_vec());
            if !lo.contains(&0) || !la.contains(&0) {
                return Err(ConfigError::Constraint("shift sets must contain 0".into()));
            }
            cfg.shifts = ShiftSet::new(lo, la);
        }
        if let Some(v) = self.parse("w")? {
            cfg.matching.w = v;
        }
        if let Some(v) = self.parse("v_min")? {
            cfg.matching.v_min = v;
        }
        if let Some(v) = self.parse("v_max")? {
            cfg.matching.v_max = v;
        }
        if let Some(v) = self.parse("n_v")? {
            cfg.matching.n_v = v;
        }
        // The second-best exclusion defaults to w references.
        cfg.matching.exclusion_half_width = match self.parse("exclusion_half_width")? {
            Some(v) => v,
            None => cfg.matching.w,
        };
        if let Some(v) = self.values.get("metric") {
            cfg.metric = match v.as_str() {
                "vd" => DistanceMetric::Vd,
                "sc" => DistanceMetric::Sc,
                "cd" => DistanceMetric::Cd,
                other => {
                    return Err(ConfigError::InvalidValue {
                        key: "metric".into(),
                        msg: format!("`{other}` is not one of vd, sc, cd"),
                    })
                }
            };
        }
        if let Some(v) = self.values.get("matcher") {
            cfg.matcher = match v.as_str() {
                "dd" => MatcherKind::Dd,
                "sm" => MatcherKind::Sm,
                "nn" => MatcherKind::Nn,
                "rk" => MatcherKind::RkNn,
                other => {
                    return Err(ConfigError::InvalidValue {
                        key: "matcher".into(),
                        msg: format!("`{other}` is not one of dd, sm, nn, rk"),
                    })
                }
            };
        }
        if let Some(v) = self.parse("rk_top_k")? {
            cfg.rk_top_k = v;
        }
        if let Some(v) = self.parse_list("r_m")? {
            cfg.r_m = v;
        }
        if let Some(v) = self.parse("stationary_eps")? {
            cfg.stationary_eps = v;
        }
        for (key, slot) in [
            ("trajectory", &mut cfg.paths.trajectory),
            ("points", &mut cfg.paths.points),
            ("gt", &mut cfg.paths.gt),
            ("db", &mut cfg.paths.db),
            ("out", &mut cfg.paths.out),
        ] {
            if let Some(v) = self.values.get(key) {
                *slot = Some(PathBuf::from(v));
            }
        }

        cfg.validate()?;
        Ok(cfg)
    }
}
