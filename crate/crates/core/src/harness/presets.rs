//! Named experiment setups.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::solver1d::Region;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Gaussian `exp(-(x-50)^2)` in shear flow on `[0, 100]` up to `t = 30`.
    ShearAccuracy,
    /// Narrow Gaussian `exp(-10(x-50)^2)` in shear flow up to `t = 50`, uniform order.
    ShearAdaptive,
    /// As [`Preset::ShearAdaptive`] with orders 1/2/3 chosen by region.
    ShearAdaptiveMixed,
    /// Sedimenting droplet in a doubly periodic box `[0, 100]^2`.
    Droplet2d,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::ShearAccuracy, Preset::ShearAdaptive, Preset::ShearAdaptiveMixed, Preset::Droplet2d];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ShearAccuracy => "shear-accuracy",
            Preset::ShearAdaptive => "shear-adaptive",
            Preset::ShearAdaptiveMixed => "shear-adaptive-mixed",
            Preset::Droplet2d => "droplet-2d",
        }
    }

    pub fn is_2d(self) -> bool {
        self == Preset::Droplet2d
    }

    /// Initial density at `(x, z)`; `z` is ignored by the 1D presets.
    pub fn initial_density(self, x: f64, z: f64) -> f64 {
        match self {
            Preset::ShearAccuracy => (-(x - 50.0).powi(2)).exp(),
            Preset::ShearAdaptive | Preset::ShearAdaptiveMixed => (-10.0 * (x - 50.0).powi(2)).exp(),
            Preset::Droplet2d => (-0.025 * ((x - 50.0).powi(2) + (z - 75.0).powi(2))).exp(),
        }
    }

    /// Partition used by the mixed-order preset.
    pub fn default_regions(self) -> Option<Vec<Region>> {
        (self == Preset::ShearAdaptiveMixed).then(|| {
            vec![
                Region { a: 0.0, b: 20.0, order: 1 },
                Region { a: 20.0, b: 25.0, order: 2 },
                Region { a: 25.0, b: 75.0, order: 3 },
                Region { a: 75.0, b: 80.0, order: 2 },
                Region { a: 80.0, b: 100.0, order: 1 },
            ]
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::Config(format!("unknown preset '{s}' (known: {})", names.join(", ")))
            })
    }
}
