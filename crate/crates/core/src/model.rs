//! Self-describing JSON model files.
//!
//! Neurons are stored in physical form (`w = w~^2`, `d = d~^2`), together
//! with everything needed to mesh the model without the source molecule:
//! decay, isovalue and the molecule's bounding box.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::erbf::{ErbfNeuron, ErbfParams};
use crate::error::{Error, Result};
use crate::pqr::BoundingBox;

pub const MODEL_FORMAT: &str = "molsparse-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredNeuron {
    pub weight: f64,
    pub axes: [f64; 3],
    pub center: [f64; 3],
    pub angles: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub source: String,
    pub n_atoms: usize,
    pub decay: f64,
    pub isovalue: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Box enclosing the atom spheres of the source molecule (no padding).
    pub molecule_box: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub metadata: ModelMetadata,
    pub neurons: Vec<StoredNeuron>,
}

impl ModelDocument {
    pub fn new(params: &ErbfParams, metadata: ModelMetadata) -> Self {
        let neurons = params
            .neurons
            .iter()
            .map(|n| StoredNeuron {
                weight: n.weight(),
                axes: n.axes().into(),
                center: n.center.into(),
                angles: n.angles.into(),
            })
            .collect();
        ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            metadata,
            neurons,
        }
    }

    /// Rebuilds the optimizer variables; `w~` and `d~` are the non-negative
    /// square roots of the stored values.
    pub fn params(&self) -> Result<ErbfParams> {
        let mut neurons = Vec::with_capacity(self.neurons.len());
        for (i, n) in self.neurons.iter().enumerate() {
            let values = std::iter::once(n.weight).chain(n.axes);
            if values.clone().any(|v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "neuron {i}: weight and axes must be finite and non-negative"
                )));
            }
            if n.center.iter().chain(&n.angles).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("model center or angle"));
            }
            neurons.push(ErbfNeuron {
                w_tilde: n.weight.sqrt(),
                d_tilde: Vector3::from(n.axes).map(f64::sqrt),
                center: Vector3::from(n.center),
                angles: Vector3::from(n.angles),
            });
        }
        Ok(ErbfParams::new(neurons))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format {:?} version {}",
                doc.format, doc.version
            )));
        }
        Ok(doc)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelDocument::from_json(&text)
    }
}
