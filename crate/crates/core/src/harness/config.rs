//! Experiment configuration: preset defaults, a flat `key = value` file format and
//! command-line overrides.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::presets::Preset;
use crate::moment_model::ModelParams;
use crate::par::Execution;
use crate::riemann::Limiter;
use crate::solver1d::{Region, ResolutionMap};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub x_left: f64,
    pub x_right: f64,
    pub z_left: f64,
    pub z_right: f64,
    /// Cells along x.
    pub m: usize,
    /// Cells along z (2D presets only).
    pub m_z: usize,
    /// Uniform moment order; ignored when `regions` is set.
    pub order: usize,
    pub regions: Option<Vec<Region>>,
    pub t_end: f64,
    pub cfl: f64,
    pub dt_max: Option<f64>,
    pub params: ModelParams,
    pub limiter: Limiter,
    /// Snapshot times besides `t_end`, which is always written.
    pub output_times: Vec<f64>,
    pub out: Option<PathBuf>,
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = Self {
            preset,
            x_left: 0.0,
            x_right: 100.0,
            z_left: 0.0,
            z_right: 100.0,
            m: 512,
            m_z: 1,
            order: 1,
            regions: preset.default_regions(),
            t_end: 30.0,
            cfl: 0.9,
            dt_max: None,
            params: ModelParams { d_r: 0.01, delta: 1.0, re: 1.0 },
            limiter: Limiter::Mc,
            output_times: Vec::new(),
            out: None,
            execution: Execution::default(),
        };
        match preset {
            Preset::ShearAccuracy => base,
            Preset::ShearAdaptive | Preset::ShearAdaptiveMixed => Self { m: 2000, t_end: 50.0, ..base },
            Preset::Droplet2d => Self {
                m: 128,
                m_z: 128,
                order: 4,
                t_end: 20.0,
                params: ModelParams { d_r: 1.0, delta: 1.0, re: 1.0 },
                ..base
            },
        }
    }

    /// Builds a configuration from `key = value` pairs: the preset comes from the last
    /// `preset` key, the remaining keys are applied in order on top of its defaults.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let preset = pairs
            .iter()
            .rev()
            .find(|(k, _)| normalize(k) == "preset")
            .ok_or_else(|| Error::Config("no preset given".into()))?
            .1
            .parse()?;
        let mut cfg = Self::preset(preset);
        for (k, v) in pairs {
            if normalize(k) != "preset" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration from an optional file plus overrides; overrides win.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = match file {
            Some(p) => parse_pairs(&std::fs::read_to_string(p)?)?,
            None => Vec::new(),
        };
        pairs.extend_from_slice(overrides);
        Self::from_pairs(&pairs)
    }

    /// Applies one setting. Keys accept `-` or `_` as separator.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("invalid value '{value}' for {what}"));
        let num = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
        let count = |what: &str| value.parse::<usize>().map_err(|_| bad(what));
        match normalize(key).as_str() {
            "preset" => {
                let p: Preset = value.parse()?;
                if p != self.preset {
                    return Err(Error::Config("preset must be chosen before other settings".into()));
                }
            }
            "grid" | "m" => self.m = count("grid")?,
            "grid_z" | "m_z" => self.m_z = count("grid_z")?,
            "order" | "n" => {
                self.order = count("order")?;
                self.regions = None;
            }
            "regions" => self.regions = Some(parse_regions(value)?),
            "domain" => {
                let v = parse_list(value).map_err(|_| bad("domain"))?;
                match v[..] {
                    [a, b] => (self.x_left, self.x_right) = (a, b),
                    [a, b, c, d] => (self.x_left, self.x_right, self.z_left, self.z_right) = (a, b, c, d),
                    _ => return Err(bad("domain")),
                }
            }
            "t_end" => self.t_end = num("t_end")?,
            "cfl" => self.cfl = num("cfl")?,
            "dt_max" => self.dt_max = Some(num("dt_max")?),
            "d_r" | "dr" => self.params.d_r = num("d_r")?,
            "delta" => self.params.delta = num("delta")?,
            "re" => self.params.re = num("re")?,
            "limiter" => self.limiter = value.parse()?,
            "output_times" => self.output_times = parse_list(value).map_err(|_| bad("output_times"))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "execution" => {
                self.execution = match value {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(bad("execution")),
                }
            }
            other => return Err(Error::Config(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.x_right > self.x_left) || !(self.z_right > self.z_left) {
            return Err(Error::Config("empty domain".into()));
        }
        if self.m < 4 || (self.preset.is_2d() && self.m_z < 4) {
            return Err(Error::Config("grids need at least 4 cells per direction".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end = {} must be non-negative", self.t_end)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidCfl(self.cfl));
        }
        if let Some(d) = self.dt_max {
            if !(d > 0.0) {
                return Err(Error::Config(format!("dt_max = {d} must be positive")));
            }
        }
        if self.order == 0 {
            return Err(Error::InvalidOrder(0));
        }
        if self.output_times.iter().any(|t| !(*t >= 0.0 && *t <= self.t_end)) {
            return Err(Error::Config("output times must lie in [0, t_end]".into()));
        }
        if self.output_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("output times must be increasing".into()));
        }
        if self.regions.is_some() && self.preset.is_2d() {
            return Err(Error::Config("resolution regions are only supported in 1D".into()));
        }
        let map = self.resolution_map()?;
        if map.x_left() != self.x_left || map.x_right() != self.x_right {
            return Err(Error::Config("regions must cover the domain".into()));
        }
        Ok(())
    }

    /// The moment orders over the x-domain.
    pub fn resolution_map(&self) -> Result<ResolutionMap> {
        match &self.regions {
            Some(r) => ResolutionMap::new(r.clone()),
            None => ResolutionMap::uniform(self.x_left, self.x_right, self.order),
        }
    }

    /// Scheduled snapshot times, always ending with `t_end`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.output_times.iter().copied().filter(|t| *t < self.t_end).collect();
        t.push(self.t_end);
        t
    }
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse()).collect()
}

/// Regions as `a:b:order` items separated by commas.
pub fn parse_regions(s: &str) -> Result<Vec<Region>> {
    s.split(',')
        .map(|item| {
            let parts: Vec<&str> = item.trim().split(':').collect();
            let err = || Error::Config(format!("invalid region '{item}', expected a:b:order"));
            if parts.len() != 3 {
                return Err(err());
            }
            Ok(Region {
                a: parts[0].trim().parse().map_err(|_| err())?,
                b: parts[1].trim().parse().map_err(|_| err())?,
                order: parts[2].trim().parse().map_err(|_| err())?,
            })
        })
        .collect()
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
