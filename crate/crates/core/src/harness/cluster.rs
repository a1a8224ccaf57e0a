use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::{CodeSpec, HarnessError};
use crate::field::{hamming_distance, FieldElement};
use crate::shard::{NodeShard, UpdateTranscript};

/// What the storage nodes collectively hold. Protocol code only ever sees
/// this.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    spec: CodeSpec,
    shards: Vec<NodeShard>,
    offline: BTreeSet<usize>,
}

impl Cluster {
    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    /// Node `id`'s current shard (stale while offline).
    pub fn shard(&self, id: usize) -> &NodeShard {
        &self.shards[id - 1]
    }

    pub fn is_online(&self, id: usize) -> bool {
        !self.offline.contains(&id)
    }

    pub fn online_nodes(&self) -> Vec<usize> {
        (1..=self.spec.n()).filter(|id| self.is_online(*id)).collect()
    }

    pub fn offline_nodes(&self) -> Vec<usize> {
        self.offline.iter().copied().collect()
    }

    fn check_id(&self, id: usize) -> Result<(), StepError> {
        if (1..=self.spec.n()).contains(&id) {
            Ok(())
        } else {
            Err(StepError::Invalid(format!("node {id} does not exist")))
        }
    }

    /// Lowest-id online nodes unless `requested` names them explicitly.
    pub fn select_helpers(&self, stale: usize, requested: Option<&[usize]>) -> Result<Vec<usize>, StepError> {
        let needed = self.spec.helpers_needed();
        match requested {
            Some(ids) => {
                if ids.len() != needed {
                    return Err(StepError::Invalid(format!(
                        "{} update uses exactly {needed} helpers, got {}",
                        self.spec.kind(),
                        ids.len()
                    )));
                }
                for (x, &u) in ids.iter().enumerate() {
                    self.check_id(u)?;
                    if u == stale || ids[..x].contains(&u) {
                        return Err(StepError::Invalid(format!("helper {u} is repeated or the stale node")));
                    }
                    if !self.is_online(u) {
                        return Err(StepError::Unavailable {
                            node: stale,
                            online_helpers: self.online_nodes().len(),
                            needed,
                        });
                    }
                }
                Ok(ids.to_vec())
            }
            None => {
                let online = self.online_nodes();
                if online.len() < needed {
                    return Err(StepError::Unavailable {
                        node: stale,
                        online_helpers: online.len(),
                        needed,
                    });
                }
                Ok(online[..needed].to_vec())
            }
        }
    }

    /// The oblivious update of node `stale` from `helpers`, using stored
    /// shards only.
    pub fn oblivious_update(&self, stale: usize, helpers: &[usize]) -> Result<UpdateTranscript<usize>, HarnessError> {
        let helper_shards: Vec<&NodeShard> = helpers.iter().map(|&u| self.shard(u)).collect();
        self.spec.update(self.shard(stale), &helper_shards)
    }
}

/// One ground-truth edit. `index` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modification {
    pub index: usize,
    pub old: FieldElement,
    pub new: FieldElement,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    /// The event does not apply to the current state.
    #[error("invalid event: {0}")]
    Invalid(String),
    /// Too few online helpers; the node stays offline.
    #[error("node {node} cannot update: {online_helpers} nodes online, {needed} helpers needed")]
    Unavailable { node: usize, online_helpers: usize, needed: usize },
    /// The update failed or disagreed with ground truth; the node stays
    /// offline with its stale shard.
    #[error("update of node {node} failed: {reason} (modifications while offline: {})", .modifications.len())]
    ProtocolFailure {
        node: usize,
        reason: String,
        modifications: Vec<Modification>,
        symbols_downloaded: usize,
    },
}

/// Download cost of one update, or a sum of several.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommStats {
    pub symbols_downloaded: usize,
    /// `symbols_downloaded * log2 q`.
    pub bits_downloaded: f64,
    /// `ceil(log2 B) + ceil(log2 q)` per update: the cost of being told which
    /// symbol changed and its new value.
    pub baseline_bits: f64,
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

impl CommStats {
    /// Stats for `updates` updates totalling `symbols` downloaded symbols.
    pub fn new(symbols: usize, updates: usize, q: u32, message_len: usize) -> Self {
        let per_update = ceil_log2(message_len as u64) + ceil_log2(u64::from(q));
        Self {
            symbols_downloaded: symbols,
            bits_downloaded: symbols as f64 * f64::from(q).log2(),
            baseline_bits: f64::from(per_update) * updates as f64,
        }
    }
}

/// Online nodes whose shard differs from the encoding of the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub divergent: Vec<usize>,
}

impl Verification {
    pub fn pass(&self) -> bool {
        self.divergent.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    TookOffline(usize),
    Modified(Modification),
    Updated {
        transcript: UpdateTranscript<usize>,
        stats: CommStats,
    },
    Verified(Verification),
}

/// Message and edit history as they really happened, never shown to nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
struct GroundTruth {
    msg: Vec<FieldElement>,
    /// For each offline node: the message when it left and every edit since.
    since_offline: BTreeMap<usize, (Vec<FieldElement>, Vec<Modification>)>,
}

/// A simulated cluster plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    cluster: Cluster,
    truth: GroundTruth,
    updates: usize,
    symbols: usize,
}

impl ClusterState {
    /// All nodes online, storing the encoding of `msg`.
    pub fn new(spec: CodeSpec, msg: Vec<FieldElement>) -> Result<Self, HarnessError> {
        let shards = spec.encode(&msg)?;
        Ok(Self {
            cluster: Cluster {
                spec,
                shards,
                offline: BTreeSet::new(),
            },
            truth: GroundTruth {
                msg,
                since_offline: BTreeMap::new(),
            },
            updates: 0,
            symbols: 0,
        })
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn spec(&self) -> &CodeSpec {
        &self.cluster.spec
    }

    /// Ground truth, for verification and reporting only.
    pub fn ground_truth(&self) -> &[FieldElement] {
        &self.truth.msg
    }

    /// Number of successful updates so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Totals over every successful update so far.
    pub fn comm_stats(&self) -> CommStats {
        let spec = &self.cluster.spec;
        CommStats::new(self.symbols, self.updates, spec.field().modulus(), spec.message_len())
    }

    pub fn take_offline(&mut self, id: usize) -> Result<StepOutcome, StepError> {
        self.cluster.check_id(id)?;
        if !self.cluster.offline.insert(id) {
            return Err(StepError::Invalid(format!("node {id} is already offline")));
        }
        self.truth.since_offline.insert(id, (self.truth.msg.clone(), Vec::new()));
        Ok(StepOutcome::TookOffline(id))
    }

    /// Sets message symbol `index` (0-based) to `value` and re-encodes every
    /// online node.
    pub fn modify(&mut self, index: usize, value: u64) -> Result<StepOutcome, StepError> {
        let spec = &self.cluster.spec;
        let b = spec.message_len();
        if index >= b {
            return Err(StepError::Invalid(format!("symbol index {} outside 1..={b}", index + 1)));
        }
        let q = spec.field().modulus();
        if value >= u64::from(q) {
            return Err(StepError::Invalid(format!("value {value} is not below q = {q}")));
        }
        let m = Modification {
            index,
            old: self.truth.msg[index],
            new: spec.field().element(value),
        };
        self.truth.msg[index] = m.new;
        for (_, log) in self.truth.since_offline.values_mut() {
            log.push(m);
        }
        let fresh = spec.encode(&self.truth.msg).expect("message length is fixed");
        for (shard, new) in self.cluster.shards.iter_mut().zip(fresh) {
            if !self.cluster.offline.contains(&shard.node_id) {
                *shard = new;
            }
        }
        Ok(StepOutcome::Modified(m))
    }

    /// Brings `id` back with an oblivious update. On any failure the node
    /// stays offline with its stale shard.
    ///
    /// More than one net change to the message while offline is reported as
    /// a protocol failure even if the patched shard happens to be right: the
    /// update is only specified for a single changed symbol.
    pub fn bring_online(&mut self, id: usize, helpers: Option<&[usize]>) -> Result<StepOutcome, StepError> {
        self.cluster.check_id(id)?;
        if self.cluster.is_online(id) {
            return Err(StepError::Invalid(format!("node {id} is not offline")));
        }
        let helpers = self.cluster.select_helpers(id, helpers)?;
        let result = self.cluster.oblivious_update(id, &helpers);

        let (snapshot, log) = &self.truth.since_offline[&id];
        let changed = hamming_distance(snapshot, &self.truth.msg);
        let failure = |reason: String, symbols_downloaded: usize| StepError::ProtocolFailure {
            node: id,
            reason,
            modifications: log.clone(),
            symbols_downloaded,
        };
        let transcript = result.map_err(|e| failure(e.to_string(), 0))?;
        let downloaded = transcript.symbols_downloaded();
        if changed > 1 {
            return Err(failure(
                format!("{changed} message symbols changed while offline; at most one is supported"),
                downloaded,
            ));
        }
        let expected = self.cluster.spec.encode_node(&self.truth.msg, id).expect("valid node");
        if transcript.shard != expected {
            return Err(failure("updated shard diverges from the current encoding".into(), downloaded));
        }

        self.cluster.shards[id - 1] = transcript.shard.clone();
        self.cluster.offline.remove(&id);
        self.truth.since_offline.remove(&id);
        self.updates += 1;
        self.symbols += downloaded;
        let spec = &self.cluster.spec;
        let stats = CommStats::new(downloaded, 1, spec.field().modulus(), spec.message_len());
        Ok(StepOutcome::Updated { transcript, stats })
    }

    /// Compares every online shard with the encoding of the ground truth.
    pub fn verify(&self) -> Verification {
        let expected = self.cluster.spec.encode(&self.truth.msg).expect("message length is fixed");
        let divergent = self
            .cluster
            .shards
            .iter()
            .zip(&expected)
            .filter(|(have, want)| self.cluster.is_online(have.node_id) && have != want)
            .map(|(have, _)| have.node_id)
            .collect();
        Verification { divergent }
    }

    /// Fault injection: overwrites one stored symbol of node `id`.
    pub fn corrupt(&mut self, id: usize, symbol: usize, value: FieldElement) {
        self.cluster.shards[id - 1].symbols[symbol] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::mds;
    use crate::shard::Diagnosis;

    fn mbr_state() -> ClusterState {
        let spec = crate::testutil::fig1_spec();
        let f = spec.field();
        ClusterState::new(CodeSpec::Mbr(spec), f.vector(&[1, 2, 3, 4, 5])).unwrap()
    }

    fn mds_state() -> ClusterState {
        let spec = mds::generate(4, 2, 4, Some(13)).unwrap();
        let f = spec.field();
        ClusterState::new(CodeSpec::Mds(spec), f.vector(&[7, 0, 12, 3])).unwrap()
    }

    #[test]
    fn zero_message_gives_zero_shards() {
        let spec = crate::testutil::fig1_spec();
        let f = spec.field();
        let st = ClusterState::new(CodeSpec::Mbr(spec), f.zeros(5)).unwrap();
        assert_eq!(st.cluster().online_nodes(), vec![1, 2, 3, 4]);
        for id in 1..=4 {
            let sh = st.cluster().shard(id);
            assert_eq!(sh.symbols.len(), 3);
            assert!(sh.symbols.iter().all(|x| x.is_zero()));
        }
        assert!(st.verify().pass());
    }

    #[test]
    fn init_rejects_wrong_length() {
        let spec = mds::generate(4, 2, 4, Some(13)).unwrap();
        let f = spec.field();
        assert!(ClusterState::new(CodeSpec::Mds(spec), f.zeros(3)).is_err());
    }

    #[test]
    fn no_change_cycle_downloads_minimum() {
        for (mut st, expected) in [(mbr_state(), 2), (mds_state(), 4)] {
            let before = st.cluster().shard(4).clone();
            st.take_offline(4).unwrap();
            let StepOutcome::Updated { transcript, stats } = st.bring_online(4, None).unwrap() else {
                panic!("expected an update");
            };
            assert_eq!(transcript.diagnosis, Diagnosis::NoChange);
            assert_eq!(stats.symbols_downloaded, expected);
            assert_eq!(st.cluster().shard(4), &before);
        }
    }

    #[test]
    fn single_modification_then_verify() {
        for mut st in [mbr_state(), mds_state()] {
            st.take_offline(2).unwrap();
            st.modify(1, 9).unwrap();
            assert!(st.verify().pass(), "offline shards are not compared");
            st.bring_online(2, None).unwrap();
            assert!(st.verify().pass());
            assert!(st.cluster().is_online(2));
        }
    }

    #[test]
    fn two_modifications_fail_and_node_stays_offline() {
        for mut st in [mbr_state(), mds_state()] {
            st.take_offline(3).unwrap();
            st.modify(0, 6).unwrap();
            st.modify(2, 8).unwrap();
            let err = st.bring_online(3, None).unwrap_err();
            let StepError::ProtocolFailure { node, modifications, .. } = err else {
                panic!("expected a protocol failure, got {err:?}");
            };
            assert_eq!(node, 3);
            assert_eq!(modifications.len(), 2);
            assert!(!st.cluster().is_online(3));
            assert!(st.verify().pass());
        }
    }

    #[test]
    fn reverted_edit_counts_as_no_net_change() {
        let mut st = mbr_state();
        st.take_offline(1).unwrap();
        st.modify(4, 0).unwrap();
        st.modify(4, 5).unwrap();
        assert!(st.bring_online(1, None).is_ok());
    }

    #[test]
    fn unavailable_when_too_few_helpers() {
        let mut st = mds_state();
        st.take_offline(1).unwrap();
        st.take_offline(2).unwrap();
        st.take_offline(3).unwrap();
        assert_eq!(
            st.bring_online(1, None),
            Err(StepError::Unavailable { node: 1, online_helpers: 1, needed: 2 })
        );
        assert!(matches!(st.bring_online(1, Some(&[2, 4])), Err(StepError::Unavailable { .. })));
    }

    #[test]
    fn helper_override_and_invalid_events() {
        let mut st = mbr_state();
        assert!(matches!(st.bring_online(1, None), Err(StepError::Invalid(_))));
        assert!(matches!(st.take_offline(9), Err(StepError::Invalid(_))));
        assert!(matches!(st.modify(5, 1), Err(StepError::Invalid(_))));
        assert!(matches!(st.modify(0, 11), Err(StepError::Invalid(_))));
        st.take_offline(1).unwrap();
        assert!(matches!(st.take_offline(1), Err(StepError::Invalid(_))));
        assert!(matches!(st.bring_online(1, Some(&[1, 2])), Err(StepError::Invalid(_))));
        assert!(matches!(st.bring_online(1, Some(&[2])), Err(StepError::Invalid(_))));
        st.modify(0, 0).unwrap();
        let StepOutcome::Updated { transcript, .. } = st.bring_online(1, Some(&[4, 3])).unwrap() else {
            panic!("expected an update");
        };
        assert_eq!(transcript.helper_ids, vec![4, 3]);
    }

    #[test]
    fn corrupted_node_is_listed() {
        let mut st = mds_state();
        let f = st.spec().field();
        let old = st.cluster().shard(2).symbols[0];
        st.corrupt(2, 0, old + f.one());
        assert_eq!(st.verify().divergent, vec![2]);
    }

    #[test]
    fn comm_stats_baseline() {
        let s = CommStats::new(2, 1, 11, 5);
        assert_eq!(s.baseline_bits, 7.0);
        assert!((s.bits_downloaded - 2.0 * 11f64.log2()).abs() < 1e-12);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(13), 4);
    }
}
