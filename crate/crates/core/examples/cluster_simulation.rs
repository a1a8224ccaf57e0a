//! Runs a short trace on a simulated MDS cluster and prints the JSON report.

use oblivious_update::harness::trace::{parse_trace, run_events};
use oblivious_update::harness::CodeSpec;
use oblivious_update::mds;

const TRACE: &str = r#"
{"event":"take_offline","node":2}
{"event":"modify","index":3,"value":11}
{"event":"bring_online","node":2}
{"event":"take_offline","node":4}
{"event":"modify","index":1,"value":0}
{"event":"modify","index":2,"value":0}
{"event":"bring_online","node":4}
{"event":"verify"}
"#;

fn main() {
    let spec = CodeSpec::Mds(mds::generate(4, 2, 4, Some(13)).unwrap());
    let events = parse_trace(TRACE).unwrap();
    let report = run_events(spec, &events, 42).unwrap();
    print!("{}", report.to_json());
}
