//! Types shared by both storage codes: node shards, code fingerprints and
//! update transcripts.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::field::FieldElement;

/// Content hash of a public code description. Shards carry the fingerprint of
/// the code that produced them so that mixing codes is caught early.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(String);

impl Fingerprint {
    /// First 8 bytes of SHA-256 over `bytes`, as lowercase hex.
    pub fn of(bytes: &[u8]) -> Self {
        let digest = Sha256::digest(bytes);
        Self(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<String> for Fingerprint {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One node's stored symbols. Node ids are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeShard {
    pub node_id: usize,
    pub symbols: Vec<FieldElement>,
    pub fingerprint: Fingerprint,
}

/// Outcome of the ratio-identification step of an oblivious update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagnosis<L> {
    /// Both differences vanished: the stale shard was already current.
    NoChange,
    /// The changed symbol and the amount `new - old` it changed by.
    Located { location: L, delta: FieldElement },
}

/// Full record of one oblivious update, as seen by the stale node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateTranscript<L> {
    pub stale_id: usize,
    pub helper_ids: Vec<usize>,
    /// Every symbol that crossed the network towards the stale node.
    pub downloaded: Vec<FieldElement>,
    pub diagnosis: Diagnosis<L>,
    pub shard: NodeShard,
}

impl<L> UpdateTranscript<L> {
    pub fn symbols_downloaded(&self) -> usize {
        self.downloaded.len()
    }

    /// Download cost in bits, `symbols * log2 q`.
    pub fn bits_downloaded(&self) -> f64 {
        let q = self.downloaded.first().map_or(2, |s| s.modulus());
        self.downloaded.len() as f64 * (q as f64).log2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_is_stable_and_short() {
        let a = Fingerprint::of(b"mbr|4|2|11");
        assert_eq!(a, Fingerprint::of(b"mbr|4|2|11"));
        assert_ne!(a, Fingerprint::of(b"mbr|4|2|13"));
        assert_eq!(a.as_str().len(), 16);
        assert!(a.as_str().chars().all(|c| c.is_ascii_hexdigit()));
    }
}
