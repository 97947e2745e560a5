//! JSON scenario files.
//!
//! States, grids and covariances may be given dimensionally; everything is
//! converted to the model's nondimensional units on load.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{AerocaptureParams, Cr3bpParams, Model, StateVector, TwoBodyParams, Units};
use crate::error::{Error, Result};
use crate::integrator::IntegratorSettings;
use crate::rank1::EigenSettings;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    TwoBody {
        /// km³/s²
        mu: f64,
        /// km
        distance_unit: f64,
    },
    Cr3bp {
        mu_star: f64,
    },
    Aerocapture(AerocaptureParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub units: Units,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnits {
    Seconds,
    Nondimensional,
}

/// `intervals + 1` evenly spaced epochs from `start` to `stop`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub units: TimeUnits,
    pub start: f64,
    pub stop: f64,
    pub intervals: usize,
}

/// Diagonal initial covariance from per-component standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub units: Units,
    pub sigmas: Vec<f64>,
}

fn default_order() -> usize {
    3
}

fn default_samples() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelConfig,
    pub x0: StateConfig,
    pub grid: GridConfig,
    #[serde(default = "default_order")]
    pub stt_order: usize,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub eigen: EigenSettings,
    #[serde(default)]
    pub covariance: Option<CovarianceConfig>,
    /// Seed of the Monte Carlo sample stream.
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_samples")]
    pub bound_samples: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.build_model()?;
        let n = model.dim();
        if self.x0.values.len() != n {
            return Err(Error::Config(format!(
                "x0 has {} components, {} expects {n}",
                self.x0.values.len(),
                model.name()
            )));
        }
        if !(1..=3).contains(&self.stt_order) {
            return Err(Error::Config(format!("stt_order {} outside 1..=3", self.stt_order)));
        }
        let g = &self.grid;
        if g.intervals == 0 || !(g.stop > g.start) || !g.start.is_finite() || !g.stop.is_finite() {
            return Err(Error::Config("grid needs stop > start and at least one interval".into()));
        }
        if let Some(c) = &self.covariance {
            if c.sigmas.len() != n {
                return Err(Error::Config(format!("covariance has {} sigmas, expected {n}", c.sigmas.len())));
            }
            if c.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(Error::Config("covariance sigmas must be finite and nonnegative".into()));
            }
        }
        self.integrator.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.eigen.validate()?;
        model
            .check_domain(self.initial_state()?.as_slice())
            .map_err(|e| Error::Config(format!("x0: {e}")))?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        match &self.model {
            ModelConfig::TwoBody { mu, distance_unit } => Model::two_body(TwoBodyParams { mu: *mu }, *distance_unit),
            ModelConfig::Cr3bp { mu_star } => Model::cr3bp(Cr3bpParams { mu_star: *mu_star }),
            ModelConfig::Aerocapture(p) => Model::aerocapture(*p),
        }
    }

    /// Nondimensional initial state.
    pub fn initial_state(&self) -> Result<DVector<f64>> {
        let model = self.build_model()?;
        let x = StateVector {
            values: DVector::from_vec(self.x0.values.clone()),
            units: self.x0.units,
        };
        Ok(model.nondimensionalize(&x).values)
    }

    /// Nondimensional sample epochs.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let model = self.build_model()?;
        let scale = match self.grid.units {
            TimeUnits::Seconds => 1.0 / model.time_unit(),
            TimeUnits::Nondimensional => 1.0,
        };
        let g = &self.grid;
        Ok((0..=g.intervals)
            .map(|k| (g.start + (g.stop - g.start) * k as f64 / g.intervals as f64) * scale)
            .collect())
    }

    /// Nondimensional initial covariance, if configured.
    pub fn initial_covariance(&self) -> Result<Option<DMatrix<f64>>> {
        let Some(c) = &self.covariance else {
            return Ok(None);
        };
        let model = self.build_model()?;
        let scales = match c.units {
            Units::Dimensional => model.perturbation_scales(),
            Units::Nondimensional => vec![1.0; c.sigmas.len()],
        };
        let var = DVector::from_iterator(c.sigmas.len(), c.sigmas.iter().zip(&scales).map(|(s, k)| (s / k).powi(2)));
        Ok(Some(DMatrix::from_diagonal(&var)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEO: &str = r#"{
        "name": "t",
        "model": {"type": "two_body", "mu": 398600.4418, "distance_unit": 6378.137},
        "x0": {"units": "dimensional", "values": [6678.137, 0, 0, 0, 7.7258, 0]},
        "grid": {"units": "seconds", "start": 0, "stop": 100, "intervals": 4}
    }"#;

    #[test]
    fn parse_defaults_and_round_trip() {
        let cfg = ScenarioConfig::from_json_str(LEO).unwrap();
        assert_eq!(cfg.stt_order, 3);
        assert_eq!(cfg.bound_samples, 1000);
        let back = ScenarioConfig::from_json_str(&cfg.to_json_string()).unwrap();
        assert_eq!(back, cfg);
        let g = cfg.grid().unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.0);
        assert!((g[4] * cfg.build_model().unwrap().time_unit() - 100.0).abs() < 1e-12);
        assert!((cfg.initial_state().unwrap()[0] - 6678.137 / 6378.137).abs() < 1e-15);
    }

    #[test]
    fn unknown_model_is_config_error() {
        let bad = LEO.replace("two_body", "n_body");
        let err = ScenarioConfig::from_json_str(&bad).unwrap_err();
        assert_eq!(err.category().exit_code(), 2);
        let bad = LEO.replace("\"mu\"", "\"mu\": 1, \"extra\"");
        assert!(ScenarioConfig::from_json_str(&bad).is_err());
    }

    #[test]
    fn bad_state_length() {
        let bad = LEO.replace("7.7258, 0]", "7.7258]");
        assert!(matches!(ScenarioConfig::from_json_str(&bad), Err(Error::Config(_))));
    }
}
