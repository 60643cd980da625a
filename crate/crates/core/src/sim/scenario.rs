use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cbf::ExtendedCbf;
use crate::error::{Error, Result};
use crate::plant::{PlantConfig, Reference};
use crate::polytope::{compute_cert, CbfParams, SpecDocument};
use crate::qp::{InputSet, QpWeights, DEFAULT_NEIGHBORHOOD};

/// Where the safety spec comes from: inline or a path relative to the
/// scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecSource {
    Inline(SpecDocument),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NominalConfig {
    /// Computed-torque tracking; arm only.
    Tracking {
        #[serde(default)]
        reference: Reference,
    },
    Zero,
    Constant {
        u: Vec<f64>,
    },
}

impl Default for NominalConfig {
    fn default() -> Self {
        NominalConfig::Tracking {
            reference: Reference::default(),
        }
    }
}

fn default_neighborhood() -> f64 {
    DEFAULT_NEIGHBORHOOD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControllerConfig {
    Nominal {
        #[serde(default)]
        nominal: NominalConfig,
    },
    Safeguarded {
        #[serde(default)]
        nominal: NominalConfig,
        #[serde(default)]
        weights: QpWeights,
        #[serde(default)]
        input_set: InputSet,
        #[serde(default = "default_neighborhood")]
        neighborhood: f64,
    },
}

impl ControllerConfig {
    pub fn nominal(&self) -> &NominalConfig {
        match self {
            ControllerConfig::Nominal { nominal }
            | ControllerConfig::Safeguarded { nominal, .. } => nominal,
        }
    }

    pub fn is_safeguarded(&self) -> bool {
        matches!(self, ControllerConfig::Safeguarded { .. })
    }
}

/// How the input is held across the four RK4 stages.
///
/// With the sample-and-hold variant the filter only acts on the step grid,
/// and `B` can dip by about `1e-2` at `dt = 1e-3` on the arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Hold {
    /// Computed once per step at `(t, x)`.
    ZeroOrder,
    /// Recomputed at every stage.
    #[default]
    PerStage,
}

fn default_samples() -> usize {
    200
}

/// Boundary pre-check run before safeguarded simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub skip: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: default_samples(),
            skip: false,
        }
    }
}

fn default_dt() -> f64 {
    1e-3
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spec: SpecSource,
    /// Overrides the spec file's `cbf` block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cbf: Option<CbfParams>,
    pub plant: PlantConfig,
    pub controller: ControllerConfig,
    /// Defaults to rest at the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub hold: Hold,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// Record wall-clock QP solve times (makes logs nondeterministic).
    #[serde(default)]
    pub timing: bool,
}

impl Scenario {
    /// Parses a scenario and inlines a spec given by path, resolved against
    /// `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut s: Scenario = serde_json::from_str(text)?;
        if let SpecSource::Path(p) = &s.spec {
            let full = match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p.clone(),
            };
            let text = std::fs::read_to_string(&full)
                .map_err(|e| Error::Io(format!("{}: {e}", full.display())))?;
            s.spec = SpecSource::Inline(SpecDocument::parse(&text)?);
        }
        Ok(s)
    }

    pub fn document(&self) -> Result<&SpecDocument> {
        match &self.spec {
            SpecSource::Inline(d) => Ok(d),
            SpecSource::Path(p) => Err(Error::Validation(format!(
                "spec path {} was not resolved",
                p.display()
            ))),
        }
    }

    pub fn cbf_params(&self) -> Result<CbfParams> {
        let doc = self.document()?;
        let mut params = self
            .cbf
            .clone()
            .or_else(|| doc.cbf.clone())
            .ok_or_else(|| Error::Validation("scenario has no gamma/epsilon".into()))?;
        if params.witness.is_none() {
            params.witness = doc.cbf.as_ref().and_then(|c| c.witness.clone());
        }
        Ok(params)
    }

    /// The barrier the scenario runs against.
    pub fn build_cbf(&self) -> Result<ExtendedCbf> {
        let doc = self.document()?;
        let spec = doc.spec()?;
        let params = self.cbf_params()?;
        let overrides = match &params.witness {
            Some(y) => crate::polytope::WitnessOverrides::uniform(y.clone()),
            None => doc.overrides(),
        };
        let cert = compute_cert(&spec, &overrides)?;
        ExtendedCbf::build(spec, cert, params.gamma, params.epsilon)
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt + 1e-9).floor() as usize
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation("dt must be positive".into()));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Validation("t_final must be non-negative".into()));
        }
        if let Some(x0) = &self.initial_state {
            crate::error::check_dim(2 * n, x0.len())?;
        }
        Ok(())
    }

    pub fn with_gamma(&self, gamma: f64, delta: f64) -> Self {
        let mut s = self.clone();
        let witness = self.cbf_params().ok().and_then(|p| p.witness);
        s.cbf = Some(CbfParams {
            gamma,
            epsilon: 0.5 * gamma * delta,
            witness,
        });
        s
    }
}
