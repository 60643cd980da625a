//! JSON file format for safety specs, optionally carrying barrier parameters.
//!
//! ```json
//! { "n": 1,
//!   "halfspaces": [ {"a": [1.0], "b": 1.0}, {"a": [-1.0], "b": 1.0} ],
//!   "terms": [[1, 2]],
//!   "cbf": {"gamma": 1.0, "epsilon": 0.5, "witness": [0.0]} }
//! ```
//!
//! Term indices are 1-based in the file.

use serde::{Deserialize, Serialize};

use super::{HalfSpace, SafetySpec, WitnessOverrides};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbfParams {
    pub gamma: f64,
    pub epsilon: f64,
    /// Common interior witness for every index set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub n: usize,
    pub halfspaces: Vec<HalfSpace>,
    pub terms: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cbf: Option<CbfParams>,
}

impl SpecDocument {
    pub fn from_spec(spec: &SafetySpec, cbf: Option<CbfParams>) -> Self {
        SpecDocument {
            n: spec.n(),
            halfspaces: spec.halfspaces().to_vec(),
            terms: spec
                .terms()
                .iter()
                .map(|t| t.iter().map(|i| i + 1).collect())
                .collect(),
            cbf,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec documents always serialize")
    }

    pub fn spec(&self) -> Result<SafetySpec> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (l, t) in self.terms.iter().enumerate() {
            if t.contains(&0) {
                return Err(Error::Validation(format!(
                    "term {} uses index 0; indices are 1-based",
                    l + 1
                )));
            }
            terms.push(t.iter().map(|i| i - 1).collect());
        }
        SafetySpec::new(self.n, self.halfspaces.clone(), terms)
    }

    pub fn overrides(&self) -> WitnessOverrides {
        match self.cbf.as_ref().and_then(|c| c.witness.clone()) {
            Some(y) => WitnessOverrides::uniform(y),
            None => WitnessOverrides::none(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::presets::hexagon;
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let doc = SpecDocument::from_spec(
            &hexagon(),
            Some(CbfParams {
                gamma: 10.0,
                epsilon: 0.1,
                witness: Some(vec![0.0, 0.0]),
            }),
        );
        let back = SpecDocument::parse(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.spec().unwrap(), hexagon());
        assert_eq!(
            back.halfspaces[2].b().to_bits(),
            std::f64::consts::PI.to_bits()
        );
    }

    #[test]
    fn rejects_zero_index_and_junk() {
        let bad = r#"{"n":1,"halfspaces":[{"a":[1],"b":1},{"a":[-1],"b":1}],"terms":[[0,1]]}"#;
        assert!(SpecDocument::parse(bad).unwrap().spec().is_err());
        assert!(SpecDocument::parse("{").is_err());
        assert!(SpecDocument::parse(r#"{"n":1,"halfspaces":[],"terms":[],"x":1}"#).is_err());
    }
}
