//! JSON file formats: code specs, shards and messages. Symbols are decimal
//! integers in `[0, q)`; node ids are 1-based.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CodeKind, CodeSpec, HarnessError};
use crate::field::{self, FieldElement, PrimeField};
use crate::mbr::MbrCodeSpec;
use crate::mds;
use crate::shard::{Fingerprint, NodeShard};

pub const SPEC_VERSION: u32 = 1;

/// Public description of a code.
///
/// MBR specs carry `theta`, `psi` (one row per node) and `eta` (one row per
/// node); MDS specs carry the Cauchy generator shape `cauchy_rows x
/// cauchy_cols`, which fixes the generator entirely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub version: u32,
    pub kind: CodeKind,
    pub n: usize,
    pub k: usize,
    pub q: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cauchy_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cauchy_cols: Option<usize>,
    /// Seed the code was generated with (informational).
    pub seed: u64,
    pub fingerprint: Fingerprint,
}

fn missing(field: &str) -> HarnessError {
    HarnessError::InvalidFile(format!("spec file is missing `{field}`"))
}

fn elements(field: PrimeField, rows: &[Vec<u32>], what: &str) -> Result<Vec<Vec<FieldElement>>, HarnessError> {
    rows.iter()
        .map(|r| symbols_to_elements(field, r).map_err(|e| HarnessError::InvalidFile(format!("{what}: {e}"))))
        .collect()
}

/// Converts raw symbols, rejecting values outside `[0, q)`.
pub fn symbols_to_elements(field: PrimeField, symbols: &[u32]) -> Result<Vec<FieldElement>, HarnessError> {
    let q = field.modulus();
    symbols
        .iter()
        .map(|&v| {
            if v < q {
                Ok(field.element(u64::from(v)))
            } else {
                Err(HarnessError::InvalidFile(format!("symbol {v} is not below q = {q}")))
            }
        })
        .collect()
}

impl SpecFile {
    pub fn from_spec(spec: &CodeSpec, seed: u64) -> Self {
        let q = u64::from(spec.field().modulus());
        let (theta, psi, eta, cauchy_rows, cauchy_cols) = match spec {
            CodeSpec::Mbr(s) => (
                Some(s.theta()),
                Some(s.psi_vectors().iter().map(|v| field::values(v)).collect()),
                Some(s.eta_rows().iter().map(|v| field::values(v)).collect()),
                None,
                None,
            ),
            CodeSpec::Mds(s) => (None, None, None, Some(s.generator().rows()), Some(s.generator().cols())),
        };
        Self {
            version: SPEC_VERSION,
            kind: spec.kind(),
            n: spec.n(),
            k: spec.k(),
            q,
            theta,
            psi,
            eta,
            cauchy_rows,
            cauchy_cols,
            seed,
            fingerprint: spec.fingerprint().clone(),
        }
    }

    /// Rebuilds the code and checks the stored fingerprint against it.
    pub fn to_spec(&self) -> Result<CodeSpec, HarnessError> {
        if self.version != SPEC_VERSION {
            return Err(HarnessError::InvalidFile(format!(
                "unsupported spec version {} (expected {SPEC_VERSION})",
                self.version
            )));
        }
        let spec = match self.kind {
            CodeKind::Mbr => {
                let field = PrimeField::new(self.q)?;
                let theta = self.theta.ok_or_else(|| missing("theta"))?;
                let psi = elements(field, self.psi.as_ref().ok_or_else(|| missing("psi"))?, "psi")?;
                let eta = elements(field, self.eta.as_ref().ok_or_else(|| missing("eta"))?, "eta")?;
                CodeSpec::Mbr(MbrCodeSpec::from_parts(self.n, self.k, theta, field, psi, eta)?)
            }
            CodeKind::Mds => {
                let cols = self.cauchy_cols.ok_or_else(|| missing("cauchy_cols"))?;
                let rows = self.cauchy_rows.ok_or_else(|| missing("cauchy_rows"))?;
                let spec = mds::generate(self.n, self.k, cols, Some(self.q))?;
                if spec.generator().rows() != rows {
                    return Err(HarnessError::InvalidFile(format!(
                        "cauchy_rows = {rows} but n * B / k = {}",
                        spec.generator().rows()
                    )));
                }
                CodeSpec::Mds(spec)
            }
        };
        if spec.fingerprint() != &self.fingerprint {
            return Err(HarnessError::FingerprintMismatch {
                stored: self.fingerprint.clone(),
                computed: spec.fingerprint().clone(),
            });
        }
        Ok(spec)
    }
}

/// One node's data on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShardFile {
    pub fingerprint: Fingerprint,
    pub node_id: usize,
    pub symbols: Vec<u32>,
}

impl ShardFile {
    pub fn from_shard(shard: &NodeShard) -> Self {
        Self {
            fingerprint: shard.fingerprint.clone(),
            node_id: shard.node_id,
            symbols: field::values(&shard.symbols),
        }
    }

    /// Converts for use with `spec`, rejecting foreign fingerprints and
    /// out-of-range symbols.
    pub fn to_shard(&self, spec: &CodeSpec) -> Result<NodeShard, HarnessError> {
        if &self.fingerprint != spec.fingerprint() {
            return Err(HarnessError::FingerprintMismatch {
                stored: self.fingerprint.clone(),
                computed: spec.fingerprint().clone(),
            });
        }
        Ok(NodeShard {
            node_id: self.node_id,
            symbols: symbols_to_elements(spec.field(), &self.symbols)?,
            fingerprint: self.fingerprint.clone(),
        })
    }
}

fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a JSON document, reporting the offending line on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, HarnessError> {
    serde_json::from_str(text).map_err(|e| HarnessError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    parse_json(&read_text(path)?).map_err(|e| match e {
        HarnessError::Parse { line, message } => HarnessError::InvalidFile(format!(
            "{}: line {line}: {message}",
            path.display()
        )),
        other => other,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    fs::write(path, to_json(value)).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_spec(path: &Path) -> Result<CodeSpec, HarnessError> {
    read_json::<SpecFile>(path)?.to_spec()
}

pub fn load_shard(path: &Path, spec: &CodeSpec) -> Result<NodeShard, HarnessError> {
    read_json::<ShardFile>(path)?.to_shard(spec)
}

/// A message file is a JSON array of `B` symbols.
pub fn load_message(path: &Path, spec: &CodeSpec) -> Result<Vec<FieldElement>, HarnessError> {
    let raw: Vec<u32> = read_json(path)?;
    if raw.len() != spec.message_len() {
        return Err(HarnessError::InvalidFile(format!(
            "{}: message has {} symbols, code expects {}",
            path.display(),
            raw.len(),
            spec.message_len()
        )));
    }
    symbols_to_elements(spec.field(), &raw)
}
