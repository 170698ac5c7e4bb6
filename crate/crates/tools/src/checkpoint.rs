//! Binary model checkpoints.
//!
//! Layout: 8-byte magic, little-endian `u32` format version, SHA-256 of the
//! schema and vocabularies, then the postcard-encoded [`Checkpoint`]. Floats
//! are stored as their IEEE bits, so a save/load round trip is exact.

use std::collections::BTreeSet;
use std::path::Path;

use adsage_core::adsage::AdsageModel;
use adsage_core::event::{FeatureSchema, Vocabularies};
use adsage_core::seq2one::Seq2oneModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ToolError, ToolResult};

pub const MAGIC: &[u8; 8] = b"ADSAGECK";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Detector {
    Adsage(AdsageModel),
    Seq2one(Seq2oneModel),
}

impl Detector {
    pub fn kind(&self) -> &'static str {
        match self {
            Detector::Adsage(_) => "adsage",
            Detector::Seq2one(_) => "seq2one",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: FeatureSchema,
    pub vocabs: Vocabularies,
    /// Users kept when training used a user sample.
    pub users: Option<BTreeSet<String>>,
    pub detector: Detector,
}

fn encode<T: Serialize>(value: &T) -> ToolResult<Vec<u8>> {
    postcard::to_stdvec(value).map_err(|e| ToolError::Data(format!("checkpoint encoding: {e}")))
}

/// Digest identifying the input space a model was trained on.
pub fn fingerprint(schema: &FeatureSchema, vocabs: &Vocabularies) -> ToolResult<[u8; 32]> {
    let mut h = Sha256::new();
    h.update(encode(schema)?);
    h.update(encode(vocabs)?);
    Ok(h.finalize().into())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> ToolResult<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&fingerprint(&self.schema, &self.vocabs)?);
        out.extend(encode(self)?);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> ToolResult<Self> {
        let fail = |message: String| ToolError::Checkpoint {
            path: origin.to_path_buf(),
            message,
        };
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(fail("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(fail(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let ckpt: Checkpoint = postcard::from_bytes(&bytes[HEADER_LEN..])
            .map_err(|e| fail(format!("corrupt payload (format v{version}): {e}")))?;
        if fingerprint(&ckpt.schema, &ckpt.vocabs)? != bytes[12..HEADER_LEN] {
            return Err(fail(format!("schema fingerprint does not match payload (format v{version})")));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> ToolResult<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| ToolError::io(path, e))
    }

    pub fn load(path: &Path) -> ToolResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| ToolError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Refuses to score data described by a different schema.
    pub fn check_schema(&self, schema: &FeatureSchema, origin: &Path) -> ToolResult<()> {
        if &self.schema == schema {
            return Ok(());
        }
        Err(ToolError::Checkpoint {
            path: origin.to_path_buf(),
            message: format!(
                "trained on schema `{}` but scoring uses `{}` (format v{FORMAT_VERSION}); retrain or pass the training schema",
                self.schema.name, schema.name
            ),
        })
    }
}
