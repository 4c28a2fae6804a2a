//! Portable network checkpoints.
//!
//! Layout of a checkpoint file:
//!
//! | bytes          | content                                         |
//! |----------------|-------------------------------------------------|
//! | 8              | magic `EBMINR01`                                |
//! | 4              | header length `h`, little-endian `u32`          |
//! | `h`            | UTF-8 JSON header ([`CheckpointHeader`])        |
//! | `8 · count`    | parameters as little-endian `f64`, layout order |
//!
//! The parameter order is the flat layout documented in [`crate::network`].

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NormalizationTransform;
use crate::network::{CoordinateNetwork, NetworkConfig};

pub const MAGIC: &[u8; 8] = b"EBMINR01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub network: NetworkConfig,
    pub pe_progress: f64,
    pub parameter_count: usize,
    /// Maps original coordinates into the network's frame, when known.
    pub normalization: Option<NormalizationTransform>,
    pub epoch: usize,
    pub update: usize,
    pub beta: f64,
}

/// A network plus the metadata needed to use it outside training.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: CoordinateNetwork,
    pub normalization: Option<NormalizationTransform>,
    pub epoch: usize,
    pub update: usize,
    pub beta: f64,
}

impl Checkpoint {
    pub fn new(network: CoordinateNetwork) -> Self {
        Self {
            network,
            normalization: None,
            epoch: 0,
            update: 0,
            beta: 0.0,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = CheckpointHeader {
            network: self.network.config().clone(),
            pe_progress: self.network.pe_progress(),
            parameter_count: self.network.parameters().len(),
            normalization: self.normalization,
            epoch: self.epoch,
            update: self.update,
            beta: self.beta,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + 8 * header.parameter_count);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for p in self.network.parameters() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let h = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(12..12 + h).ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader =
            serde_json::from_slice(body).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        let data = &bytes[12 + h..];
        if data.len() != 8 * header.parameter_count {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter bytes, found {}",
                8 * header.parameter_count,
                data.len()
            )));
        }
        let params = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let network = CoordinateNetwork::from_parameters(header.network, params, header.pe_progress)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self {
            network,
            normalization: header.normalization,
            epoch: header.epoch,
            update: header.update,
            beta: header.beta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let cfg = NetworkConfig {
            hidden_dim: 8,
            pe_dims: 2,
            ..Default::default()
        };
        let mut net = CoordinateNetwork::random(&cfg, 3).unwrap();
        net.set_pe_progress(1.37);
        let ck = Checkpoint {
            network: net,
            normalization: Some(NormalizationTransform {
                center: [0.1, -2.0, 3.5],
                scale: 0.3,
            }),
            epoch: 10,
            update: 790,
            beta: 17.099759466766972,
        };
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corrupt_input() {
        let ck = Checkpoint::new(CoordinateNetwork::affine(crate::Vector3::x(), 0.0));
        let mut bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
