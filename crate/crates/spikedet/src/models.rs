//! Model files: a network tagged by kind plus the record of how it was trained.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spikedet_core::baselines::AnnNetwork;
use spikedet_core::snn::{Protocol, SnnNetwork};
use spikedet_core::train::{AnnExample, Hyperparameters, TrainExample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Snn {
        protocol: Protocol,
        network: SnnNetwork,
    },
    Ann {
        stride: usize,
        network: AnnNetwork,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub detector: String,
    pub hyperparameters: Hyperparameters,
    pub bin_samples: usize,
    pub balance_ratio: f64,
    pub positive_core: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub dataset_seed: u64,
    pub init_seed: u64,
    pub positives: usize,
    pub negatives: usize,
    /// SHA-256 over the training examples.
    pub dataset_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingManifest>,
}

impl ModelFile {
    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("model is serializable");
        v.push(b'\n');
        v
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: ModelFile = serde_json::from_slice(bytes)?;
        match &file.model {
            Model::Snn { network, .. } => network.validate()?,
            Model::Ann { network, stride } => {
                network.validate()?;
                if *stride == 0 {
                    bail!("ANN stride must be positive");
                }
            }
        }
        Ok(file)
    }
}

/// Order-sensitive digest of a single-channel dataset.
pub fn digest_examples(examples: &[TrainExample]) -> String {
    let mut h = Sha256::new();
    for ex in examples {
        h.update((ex.start as u64).to_le_bytes());
        h.update([ex.label.class() as u8]);
        for c in &ex.input {
            h.update(c.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub fn digest_ann_examples(examples: &[AnnExample]) -> String {
    let mut h = Sha256::new();
    for ex in examples {
        h.update((ex.start as u64).to_le_bytes());
        h.update([ex.label.class() as u8]);
        for (a, b) in ex.on.iter().zip(&ex.off) {
            h.update(a.to_le_bytes());
            h.update(b.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_tag_round_trip() {
        let mut net = SnnNetwork::detector();
        net.init_uniform(3);
        let file = ModelFile {
            model: Model::Snn {
                protocol: Protocol::Stream,
                network: net,
            },
            training: None,
        };
        let json = file.to_json();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["kind"], "snn");
        assert_eq!(ModelFile::from_json(&json).unwrap(), file);

        let mut ann = AnnNetwork::detector();
        ann.init_uniform(4);
        let file = ModelFile {
            model: Model::Ann {
                stride: 47,
                network: ann,
            },
            training: None,
        };
        let v: serde_json::Value = serde_json::from_slice(&file.to_json()).unwrap();
        assert_eq!(v["kind"], "ann");
        assert_eq!(ModelFile::from_json(&file.to_json()).unwrap(), file);
    }

    #[test]
    fn rejects_inconsistent_network() {
        let mut net = SnnNetwork::detector();
        net.weights[0].pop();
        let file = ModelFile {
            model: Model::Snn {
                protocol: Protocol::NonStream,
                network: net,
            },
            training: None,
        };
        assert!(ModelFile::from_json(&file.to_json()).is_err());
        assert!(ModelFile::from_json(br#"{"kind":"cnn"}"#).is_err());
    }
}
