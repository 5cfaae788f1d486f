//! JSON file formats. Complex numbers are written as `[re, im]` pairs.
//!
//! * Weight checkpoint: `{"widths": [...], "activations": [...], "layers": [[[re, im], ...], ...]}`
//!   with each layer in flat layout.
//! * Dataset: `[{"input": [[re, im], ...], "target": [[re, im], ...]}, ...]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::Result;
use crate::linalg::CVector;
use crate::network::{Dataset, NetworkTopology, Sample, WeightSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub layers: Vec<CVector>,
}

impl Checkpoint {
    pub fn new(topology: &NetworkTopology, weights: &WeightSet) -> Self {
        Self {
            widths: topology.widths().to_vec(),
            activations: topology.activations().to_vec(),
            layers: weights.layers().to_vec(),
        }
    }

    /// Validates shapes and splits into topology and weights.
    pub fn into_parts(self) -> Result<(NetworkTopology, WeightSet)> {
        let topology = NetworkTopology::new(self.widths, self.activations)?;
        let weights = WeightSet::from_layers(&topology, self.layers)?;
        Ok((topology, weights))
    }
}

pub fn checkpoint_to_string(topology: &NetworkTopology, weights: &WeightSet) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Checkpoint::new(
        topology, weights,
    ))?)
}

pub fn checkpoint_from_str(s: &str) -> Result<(NetworkTopology, WeightSet)> {
    serde_json::from_str::<Checkpoint>(s)?.into_parts()
}

pub fn write_checkpoint(
    path: &Path,
    topology: &NetworkTopology,
    weights: &WeightSet,
) -> Result<()> {
    fs::write(path, checkpoint_to_string(topology, weights)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(NetworkTopology, WeightSet)> {
    checkpoint_from_str(&fs::read_to_string(path)?)
}

pub fn dataset_to_string(dataset: &Dataset) -> Result<String> {
    Ok(serde_json::to_string_pretty(dataset.samples())?)
}

pub fn dataset_from_str(s: &str) -> Result<Dataset> {
    Dataset::new(serde_json::from_str::<Vec<Sample>>(s)?)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    fs::write(path, dataset_to_string(dataset)?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_str(&fs::read_to_string(path)?)
}
