//! Trace files and their execution.
//!
//! A trace is JSON lines, one event per line; blank lines are skipped.
//! Symbol indices in traces and reports are 1-based.
//!
//! ```text
//! {"event": "take_offline", "node": 4}
//! {"event": "modify", "index": 1, "value": 7}
//! {"event": "bring_online", "node": 4, "helpers": [1, 2]}
//! {"event": "verify"}
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use super::files::{self, SpecFile};
use super::{ClusterState, CodeKind, CodeSpec, CommStats, HarnessError, StepError, StepOutcome};
use crate::shard::{Diagnosis, Fingerprint};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceEvent {
    TakeOffline {
        node: usize,
    },
    /// Sets 1-based message symbol `index` to `value`.
    Modify {
        index: usize,
        value: u64,
    },
    /// `helpers` overrides the default lowest-id-online policy.
    BringOnline {
        node: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        helpers: Option<Vec<usize>>,
    },
    /// Written `{"event": "verify"}`; extra fields are rejected.
    Verify {},
}

/// Parses JSON lines into `(line number, event)` pairs.
pub fn parse_trace(text: &str) -> Result<Vec<(usize, TraceEvent)>, HarnessError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|e| (i + 1, e))
                .map_err(|e| HarnessError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

impl ClusterState {
    /// Applies one event. A `modify` with index 0 is rejected like any other
    /// out-of-range index.
    pub fn step(&mut self, event: &TraceEvent) -> Result<StepOutcome, StepError> {
        match event {
            TraceEvent::TakeOffline { node } => self.take_offline(*node),
            TraceEvent::Modify { index, value } => {
                let index = index
                    .checked_sub(1)
                    .ok_or_else(|| StepError::Invalid("symbol indices start at 1".into()))?;
                self.modify(index, *value)
            }
            TraceEvent::BringOnline { node, helpers } => self.bring_online(*node, helpers.as_deref()),
            TraceEvent::Verify {} => Ok(StepOutcome::Verified(self.verify())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosisRecord {
    NoChange,
    /// `index` is 1-based.
    Located { index: usize, delta: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventRecord {
    TakeOffline {
        line: usize,
        node: usize,
    },
    Modify {
        line: usize,
        index: usize,
        old: u32,
        new: u32,
    },
    BringOnline {
        line: usize,
        node: usize,
        helpers: Vec<usize>,
        diagnosis: DiagnosisRecord,
        stats: CommStats,
    },
    UpdateFailed {
        line: usize,
        node: usize,
        reason: String,
    },
    Verify {
        line: usize,
        pass: bool,
        divergent: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub kind: CodeKind,
    pub n: usize,
    pub k: usize,
    pub q: u32,
    pub message_len: usize,
    pub shard_len: usize,
    pub fingerprint: Fingerprint,
    pub seed: u64,
    pub events: Vec<EventRecord>,
    pub updates: usize,
    pub failures: usize,
    pub totals: CommStats,
    pub final_divergent: Vec<usize>,
    /// No failed update, every `verify` event passed and the final state
    /// verifies.
    pub pass: bool,
}

impl TraceReport {
    pub fn to_json(&self) -> String {
        files::to_json(self)
    }
}

/// The initial message: `B` uniform symbols from a SplitMix64 stream seeded
/// with `seed`.
pub fn initial_message(spec: &CodeSpec, seed: u64) -> Vec<crate::field::FieldElement> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    spec.field().random_vector(&mut rng, spec.message_len())
}

/// Runs parsed events against a fresh cluster. Update failures are recorded
/// in the report; events that do not apply to the state abort the run.
pub fn run_events(spec: CodeSpec, events: &[(usize, TraceEvent)], seed: u64) -> Result<TraceReport, HarnessError> {
    let msg = initial_message(&spec, seed);
    let mut state = ClusterState::new(spec.clone(), msg)?;
    let mut records = Vec::with_capacity(events.len());
    let mut failures = 0;
    let mut verify_failed = false;
    for (line, event) in events {
        let line = *line;
        let record = match state.step(event) {
            Ok(StepOutcome::TookOffline(node)) => EventRecord::TakeOffline { line, node },
            Ok(StepOutcome::Modified(m)) => EventRecord::Modify {
                line,
                index: m.index + 1,
                old: m.old.value(),
                new: m.new.value(),
            },
            Ok(StepOutcome::Updated { transcript, stats }) => EventRecord::BringOnline {
                line,
                node: transcript.stale_id,
                helpers: transcript.helper_ids,
                diagnosis: match transcript.diagnosis {
                    Diagnosis::NoChange => DiagnosisRecord::NoChange,
                    Diagnosis::Located { location, delta } => DiagnosisRecord::Located {
                        index: location + 1,
                        delta: delta.value(),
                    },
                },
                stats,
            },
            Ok(StepOutcome::Verified(v)) => {
                verify_failed |= !v.pass();
                EventRecord::Verify {
                    line,
                    pass: v.pass(),
                    divergent: v.divergent,
                }
            }
            Err(e @ (StepError::Unavailable { node, .. } | StepError::ProtocolFailure { node, .. })) => {
                failures += 1;
                EventRecord::UpdateFailed {
                    line,
                    node,
                    reason: e.to_string(),
                }
            }
            Err(source @ StepError::Invalid(_)) => return Err(HarnessError::Event { line, source }),
        };
        records.push(record);
    }
    let final_check = state.verify();
    let totals = state.comm_stats();
    Ok(TraceReport {
        kind: spec.kind(),
        n: spec.n(),
        k: spec.k(),
        q: spec.field().modulus(),
        message_len: spec.message_len(),
        shard_len: spec.shard_len(),
        fingerprint: spec.fingerprint().clone(),
        seed,
        events: records,
        updates: state.updates(),
        failures,
        totals,
        pass: failures == 0 && !verify_failed && final_check.pass(),
        final_divergent: final_check.divergent,
    })
}

/// Loads a spec file and a trace file and runs the trace.
pub fn run_trace(spec_path: &Path, trace_path: &Path, seed: u64) -> Result<TraceReport, HarnessError> {
    let spec = files::read_json::<SpecFile>(spec_path)?.to_spec()?;
    let text = std::fs::read_to_string(trace_path).map_err(|source| HarnessError::Io {
        path: trace_path.to_path_buf(),
        source,
    })?;
    run_events(spec, &parse_trace(&text)?, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mds;

    fn mbr_spec() -> CodeSpec {
        CodeSpec::Mbr(crate::testutil::fig1_spec())
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "{\"event\":\"take_offline\",\"node\":4}\n\n{\"event\":\"modify\",\"index\":1}\n";
        match parse_trace(text) {
            Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = "{\"event\":\"reboot\"}";
        assert!(matches!(parse_trace(unknown), Err(HarnessError::Parse { line: 1, .. })));
        let extra = "{\"event\":\"verify\",\"node\":1}";
        assert!(matches!(parse_trace(extra), Err(HarnessError::Parse { line: 1, .. })));
    }

    #[test]
    fn events_round_trip() {
        let events = vec![
            TraceEvent::TakeOffline { node: 4 },
            TraceEvent::Modify { index: 1, value: 3 },
            TraceEvent::BringOnline { node: 4, helpers: Some(vec![1, 2]) },
            TraceEvent::BringOnline { node: 4, helpers: None },
            TraceEvent::Verify {},
        ];
        let text: String = events
            .iter()
            .map(|e| serde_json::to_string(e).unwrap() + "\n")
            .collect();
        let parsed: Vec<TraceEvent> = parse_trace(&text).unwrap().into_iter().map(|(_, e)| e).collect();
        assert_eq!(parsed, events);
    }

    #[test]
    fn empty_trace_downloads_nothing() {
        let r = run_events(mbr_spec(), &[], 5).unwrap();
        assert_eq!(r.totals.symbols_downloaded, 0);
        assert_eq!(r.totals.bits_downloaded, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn small_mbr_trace() {
        let events = parse_trace(
            "{\"event\":\"take_offline\",\"node\":4}\n{\"event\":\"modify\",\"index\":1,\"value\":0}\n{\"event\":\"bring_online\",\"node\":4}\n{\"event\":\"verify\"}\n",
        )
        .unwrap();
        let r = run_events(mbr_spec(), &events, 11).unwrap();
        assert!(r.pass, "{}", r.to_json());
        assert_eq!(r.updates, 1);
        assert_eq!(r.totals.symbols_downloaded, 2);
        assert_eq!(r.totals.baseline_bits, 7.0);
        assert!((r.totals.bits_downloaded - 6.918863237274595).abs() < 1e-12);
    }

    #[test]
    fn mds_trace_downloads_two_per_helper() {
        let spec = CodeSpec::Mds(mds::generate(4, 2, 4, Some(13)).unwrap());
        let events = parse_trace(
            "{\"event\":\"take_offline\",\"node\":3}\n{\"event\":\"modify\",\"index\":2,\"value\":5}\n{\"event\":\"bring_online\",\"node\":3}\n",
        )
        .unwrap();
        let r = run_events(spec, &events, 2).unwrap();
        assert!(r.pass);
        assert_eq!(r.totals.symbols_downloaded, 4);
        assert!((r.totals.bits_downloaded - 4.0 * 13f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn failures_are_recorded_and_invalid_events_abort() {
        let events = parse_trace(
            "{\"event\":\"take_offline\",\"node\":1}\n{\"event\":\"modify\",\"index\":1,\"value\":1}\n{\"event\":\"modify\",\"index\":2,\"value\":1}\n{\"event\":\"bring_online\",\"node\":1}\n",
        )
        .unwrap();
        let r = run_events(mbr_spec(), &events, 3).unwrap();
        assert_eq!(r.failures, 1);
        assert!(!r.pass);
        assert!(matches!(r.events.last(), Some(EventRecord::UpdateFailed { line: 4, node: 1, .. })));

        let bad = parse_trace("{\"event\":\"verify\"}\n{\"event\":\"bring_online\",\"node\":2}\n").unwrap();
        assert!(matches!(
            run_events(mbr_spec(), &bad, 3),
            Err(HarnessError::Event { line: 2, .. })
        ));
        let zero = parse_trace("{\"event\":\"modify\",\"index\":0,\"value\":1}").unwrap();
        assert!(run_events(mbr_spec(), &zero, 3).is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let events = parse_trace(
            "{\"event\":\"take_offline\",\"node\":2}\n{\"event\":\"modify\",\"index\":5,\"value\":4}\n{\"event\":\"bring_online\",\"node\":2}\n{\"event\":\"verify\"}\n",
        )
        .unwrap();
        let a = run_events(mbr_spec(), &events, 42).unwrap().to_json();
        let b = run_events(mbr_spec(), &events, 42).unwrap().to_json();
        assert_eq!(a, b);
    }
}
