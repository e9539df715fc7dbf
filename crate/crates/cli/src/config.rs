use std::fs;
use std::path::{Path, PathBuf};

use eqm_core::Direction;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Top-level experiment file. `params` holds the subcommand's block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig<P> {
    /// Must name the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub params: P,
}

/// Thresholds for the numeric contracts each run checks.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Probability identities (marginal consistency, Malus law, singlet law).
    pub probability: Option<f64>,
    /// Commutator residual.
    pub commutator: Option<f64>,
    /// Lift/projection round trips.
    pub round_trip: Option<f64>,
    /// Quasi-probability marginal identity.
    pub marginal: Option<f64>,
}

impl Tolerances {
    pub fn probability(&self) -> f64 {
        self.probability.unwrap_or(1e-12)
    }
    pub fn commutator(&self) -> f64 {
        self.commutator.unwrap_or(1e-6)
    }
    pub fn round_trip(&self) -> f64 {
        self.round_trip.unwrap_or(1e-10)
    }
    pub fn marginal(&self) -> f64 {
        self.marginal.unwrap_or(1e-10)
    }

    fn validate(&self) -> Result<(), CliError> {
        for v in [self.probability, self.commutator, self.round_trip, self.marginal].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerances must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn load<P: DeserializeOwned>(path: &Path, subcommand: &str) -> Result<ExperimentConfig<P>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig<P> = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?,
        Some("json") => serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?,
        _ => return Err(CliError::Config(format!("{}: expected a .toml or .json file", path.display()))),
    };
    if let Some(name) = &cfg.experiment {
        if name != subcommand {
            return Err(CliError::Config(format!("config is for `{name}`, not `{subcommand}`")));
        }
    }
    cfg.tolerances.validate()?;
    Ok(cfg)
}

/// A direction as a unit vector or as polar/azimuthal angles in degrees.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DirectionSpec {
    Vector([f64; 3]),
    Angles { theta_deg: f64, phi_deg: f64 },
}

impl DirectionSpec {
    pub fn resolve(&self) -> Result<Direction, CliError> {
        match *self {
            DirectionSpec::Vector([x, y, z]) => Direction::new(x, y, z).map_err(crate::error::config),
            DirectionSpec::Angles { theta_deg, phi_deg } => {
                if !(theta_deg.is_finite() && phi_deg.is_finite()) {
                    return Err(CliError::Config("direction angles must be finite".into()));
                }
                Ok(Direction::spherical(theta_deg.to_radians(), phi_deg.to_radians()))
            }
        }
    }
}

pub fn resolve_directions(specs: &[DirectionSpec]) -> Result<Vec<Direction>, CliError> {
    specs
        .iter()
        .enumerate()
        .map(|(j, d)| d.resolve().map_err(|e| CliError::Config(format!("direction {j}: {e}"))))
        .collect()
}

/// `[re, im]` pairs.
pub fn complex_vec(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}
