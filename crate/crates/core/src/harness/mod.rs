//! Deterministic cluster simulator for both storage codes.
//!
//! [`ClusterState`] keeps what the nodes can see ([`Cluster`]: shards and the
//! online set) apart from the ground truth used only for verification. The
//! oblivious update runs on a `&Cluster` and has no path to the message.
//!
//! File formats and trace execution live in [`files`] and [`trace`].

mod cluster;
pub mod files;
pub mod trace;

pub use cluster::{
    Cluster, ClusterState, CommStats, Modification, StepError, StepOutcome, Verification,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldElement, FieldError, PrimeField};
use crate::mbr::{self, MbrCodeSpec, MbrError, SymbolLocation};
use crate::mds::{self, MdsCodeSpec, MdsError};
use crate::shard::{Diagnosis, Fingerprint, NodeShard, UpdateTranscript};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Mbr(#[from] MbrError),
    #[error(transparent)]
    Mds(#[from] MdsError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{kind} update uses exactly {expected} helpers, got {got}")]
    HelperCount { kind: CodeKind, expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Event { line: usize, source: StepError },
    #[error("{0}")]
    InvalidFile(String),
    #[error("stored fingerprint {stored} does not match recomputed {computed}")]
    FingerprintMismatch { stored: Fingerprint, computed: Fingerprint },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CodeKind {
    Mbr,
    Mds,
}

impl std::fmt::Display for CodeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CodeKind::Mbr => "mbr",
            CodeKind::Mds => "mds",
        })
    }
}

/// Either code, behind one interface. Update transcripts report the changed
/// symbol as a 0-based message index for both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeSpec {
    Mbr(MbrCodeSpec),
    Mds(MdsCodeSpec),
}

impl CodeSpec {
    pub fn kind(&self) -> CodeKind {
        match self {
            CodeSpec::Mbr(_) => CodeKind::Mbr,
            CodeSpec::Mds(_) => CodeKind::Mds,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            CodeSpec::Mbr(s) => s.n(),
            CodeSpec::Mds(s) => s.n(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            CodeSpec::Mbr(s) => s.k(),
            CodeSpec::Mds(s) => s.k(),
        }
    }

    pub fn field(&self) -> PrimeField {
        match self {
            CodeSpec::Mbr(s) => s.field(),
            CodeSpec::Mds(s) => s.field(),
        }
    }

    pub fn message_len(&self) -> usize {
        match self {
            CodeSpec::Mbr(s) => s.message_len(),
            CodeSpec::Mds(s) => s.message_len(),
        }
    }

    pub fn shard_len(&self) -> usize {
        match self {
            CodeSpec::Mbr(s) => s.shard_len(),
            CodeSpec::Mds(s) => s.shard_len(),
        }
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        match self {
            CodeSpec::Mbr(s) => s.fingerprint(),
            CodeSpec::Mds(s) => s.fingerprint(),
        }
    }

    /// Helpers contacted by one update: 2 for MBR, `k` for MDS.
    pub fn helpers_needed(&self) -> usize {
        match self {
            CodeSpec::Mbr(_) => 2,
            CodeSpec::Mds(s) => s.k(),
        }
    }

    pub fn encode(&self, msg: &[FieldElement]) -> Result<Vec<NodeShard>, HarnessError> {
        Ok(match self {
            CodeSpec::Mbr(s) => mbr::encode(s, msg)?,
            CodeSpec::Mds(s) => mds::encode(s, msg)?,
        })
    }

    pub fn encode_node(&self, msg: &[FieldElement], node: usize) -> Result<NodeShard, HarnessError> {
        Ok(match self {
            CodeSpec::Mbr(s) => mbr::encode_node(s, msg, node)?,
            CodeSpec::Mds(s) => mds::encode_node(s, msg, node)?,
        })
    }

    pub fn decode(&self, shards: &[NodeShard]) -> Result<Vec<FieldElement>, HarnessError> {
        Ok(match self {
            CodeSpec::Mbr(s) => mbr::decode(s, shards)?,
            CodeSpec::Mds(s) => mds::decode(s, shards)?,
        })
    }

    /// Runs the code's oblivious update of `stale` from `helpers`.
    pub fn update(&self, stale: &NodeShard, helpers: &[&NodeShard]) -> Result<UpdateTranscript<usize>, HarnessError> {
        let expected = self.helpers_needed();
        if helpers.len() != expected {
            return Err(HarnessError::HelperCount {
                kind: self.kind(),
                expected,
                got: helpers.len(),
            });
        }
        match self {
            CodeSpec::Mbr(s) => {
                let t = mbr::run_update(s, stale, helpers[0], helpers[1])?;
                Ok(index_transcript(s, t))
            }
            CodeSpec::Mds(s) => Ok(mds::run_update(s, stale, helpers)?),
        }
    }
}

fn index_transcript(spec: &MbrCodeSpec, t: UpdateTranscript<SymbolLocation>) -> UpdateTranscript<usize> {
    let diagnosis = match t.diagnosis {
        Diagnosis::NoChange => Diagnosis::NoChange,
        Diagnosis::Located { location, delta } => Diagnosis::Located {
            location: spec.location_index(location).expect("location comes from the table"),
            delta,
        },
    };
    UpdateTranscript {
        stale_id: t.stale_id,
        helper_ids: t.helper_ids,
        downloaded: t.downloaded,
        diagnosis,
        shard: t.shard,
    }
}
