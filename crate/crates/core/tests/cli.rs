use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

use oblivious_update::cli::{self, EXIT_FAILURE, EXIT_PASS, EXIT_USAGE};
use oblivious_update::field::PrimeField;
use oblivious_update::harness::files::{self, SpecFile};
use oblivious_update::harness::CodeSpec;
use oblivious_update::mbr::MbrCodeSpec;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn ou(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(std::iter::once("ou").chain(args.iter().copied()), &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(run: &Run) -> Value {
    serde_json::from_str(&run.stdout).unwrap_or_else(|e| panic!("{e}: {}", run.stdout))
}

fn mbr_spec(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("mbr.json");
    let r = ou(&["codegen", "--kind", "mbr", "--n", "4", "--k", "2", "--q", "11", "--seed", "3", "--out", p(&path)]);
    assert_eq!(r.code, EXIT_PASS, "{}", r.stderr);
    path
}

fn mds_spec(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("mds.json");
    let r = ou(&["codegen", "--kind", "mds", "--n", "4", "--k", "2", "--b", "4", "--q", "13", "--out", p(&path)]);
    assert_eq!(r.code, EXIT_PASS, "{}", r.stderr);
    path
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn encode(spec: &Path, msg: &Path, outdir: &Path) {
    let r = ou(&["encode", "--spec", p(spec), "--msg", p(msg), "--outdir", p(outdir)]);
    assert_eq!(r.code, EXIT_PASS, "{}", r.stderr);
}

fn round_trip(spec: PathBuf, dir: &TempDir, old: &str, new: &str, helpers: &[&str], expect_index: u64) {
    let (stale_dir, fresh_dir) = (dir.path().join("stale"), dir.path().join("fresh"));
    encode(&spec, &write(dir, "old.json", old), &stale_dir);
    encode(&spec, &write(dir, "new.json", new), &fresh_dir);

    let decoded = ou(&[
        "decode",
        "--spec",
        p(&spec),
        "--shards",
        p(&fresh_dir.join("node-2.json")),
        p(&fresh_dir.join("node-4.json")),
    ]);
    assert_eq!(decoded.code, EXIT_PASS, "{}", decoded.stderr);
    assert_eq!(json(&decoded), serde_json::from_str::<Value>(new).unwrap());

    let updated = dir.path().join("updated.json");
    let mut args = vec!["update", "--spec", p(&spec), "--stale"];
    let stale = stale_dir.join("node-1.json");
    args.push(p(&stale));
    args.push("--helpers");
    let helper_paths: Vec<PathBuf> = helpers.iter().map(|h| fresh_dir.join(h)).collect();
    args.extend(helper_paths.iter().map(|h| p(h)));
    args.extend(["--out", p(&updated)]);
    let r = ou(&args);
    assert_eq!(r.code, EXIT_PASS, "{}", r.stderr);
    let report = json(&r);
    assert_eq!(report["diagnosis"]["kind"], "located");
    assert_eq!(report["diagnosis"]["index"], expect_index);
    let want: Value = serde_json::from_str(&std::fs::read_to_string(fresh_dir.join("node-1.json")).unwrap()).unwrap();
    let got: Value = serde_json::from_str(&std::fs::read_to_string(&updated).unwrap()).unwrap();
    assert_eq!(got, want);
}

#[test]
fn mbr_encode_decode_update_round_trip() {
    let dir = TempDir::new().unwrap();
    let spec = mbr_spec(&dir);
    round_trip(spec, &dir, "[1, 2, 3, 4, 5]", "[1, 2, 3, 9, 5]", &["node-2.json", "node-3.json"], 4);
}

#[test]
fn mds_encode_decode_update_round_trip() {
    let dir = TempDir::new().unwrap();
    let spec = mds_spec(&dir);
    round_trip(spec, &dir, "[0, 0, 0, 0]", "[0, 12, 0, 0]", &["node-3.json", "node-4.json"], 2);
}

#[test]
fn verify_spec_passes_generated_codes() {
    let dir = TempDir::new().unwrap();
    for spec in [mbr_spec(&dir), mds_spec(&dir)] {
        let r = ou(&["verify-spec", "--spec", p(&spec)]);
        assert_eq!(r.code, EXIT_PASS, "{}", r.stdout);
        assert_eq!(json(&r)["pass"], true);
    }
}

#[test]
fn verify_spec_rejects_degenerate_code() {
    let f = PrimeField::new(11).unwrap();
    let psi = (1..=4).map(|c| f.vector(&[c, 2 * c, 3 * c])).collect();
    let eta = vec![f.vector(&[5]); 4];
    let spec = CodeSpec::Mbr(MbrCodeSpec::from_parts(4, 2, 1, f, psi, eta).unwrap());
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    files::write_json(&path, &SpecFile::from_spec(&spec, 0)).unwrap();
    let r = ou(&["verify-spec", "--spec", p(&path)]);
    assert_eq!(r.code, EXIT_FAILURE);
    let report = json(&r);
    assert_eq!(report["pass"], false);
    assert_eq!(report["violations"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_inputs_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(ou(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(ou(&["verify-spec", "--spec", "/nonexistent/spec.json"]).code, EXIT_USAGE);

    let spec = mbr_spec(&dir);
    let text = std::fs::read_to_string(&spec).unwrap();
    let mut file: Value = serde_json::from_str(&text).unwrap();
    file["fingerprint"] = "0000000000000000".into();
    let tampered = write(&dir, "tampered.json", &file.to_string());
    let r = ou(&["verify-spec", "--spec", p(&tampered)]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.stderr.contains("fingerprint"), "{}", r.stderr);
}

#[test]
fn wrong_helper_count_is_a_failure() {
    let dir = TempDir::new().unwrap();
    let spec = mds_spec(&dir);
    let shards = dir.path().join("shards");
    encode(&spec, &write(&dir, "m.json", "[1, 2, 3, 4]"), &shards);
    let (stale, helper) = (shards.join("node-1.json"), shards.join("node-2.json"));
    let r = ou(&["update", "--spec", p(&spec), "--stale", p(&stale), "--helpers", p(&helper)]);
    assert_eq!(r.code, EXIT_FAILURE, "{}", r.stderr);
}

#[test]
fn simulate_reports_updates_and_failures() {
    let dir = TempDir::new().unwrap();
    let spec = mbr_spec(&dir);
    let trace = write(
        &dir,
        "trace.jsonl",
        concat!(
            "{\"event\":\"take_offline\",\"node\":1}\n",
            "{\"event\":\"modify\",\"index\":2,\"value\":4}\n",
            "\n",
            "{\"event\":\"bring_online\",\"node\":1,\"helpers\":[3,4]}\n",
            "{\"event\":\"verify\"}\n",
        ),
    );
    let r = ou(&["simulate", "--spec", p(&spec), "--trace", p(&trace), "--seed", "5"]);
    assert_eq!(r.code, EXIT_PASS, "{}\n{}", r.stdout, r.stderr);
    let report = json(&r);
    assert_eq!(report["pass"], true);
    assert_eq!(report["updates"], 1);
    assert_eq!(report["failures"], 0);
    assert_eq!(report["events"].as_array().unwrap().len(), 4);

    let two_changes = write(
        &dir,
        "two.jsonl",
        concat!(
            "{\"event\":\"take_offline\",\"node\":1}\n",
            "{\"event\":\"modify\",\"index\":1,\"value\":1}\n",
            "{\"event\":\"modify\",\"index\":2,\"value\":2}\n",
            "{\"event\":\"bring_online\",\"node\":1}\n",
            "{\"event\":\"verify\"}\n",
        ),
    );
    let r = ou(&["simulate", "--spec", p(&spec), "--trace", p(&two_changes), "--seed", "5"]);
    assert_eq!(r.code, EXIT_FAILURE);
    assert_eq!(json(&r)["failures"], 1);

    let bad = write(&dir, "bad.jsonl", "{\"event\":\"take_offline\",\"node\":1,\"extra\":0}\n");
    assert_eq!(ou(&["simulate", "--spec", p(&spec), "--trace", p(&bad)]).code, EXIT_USAGE);
}

#[test]
fn seed_can_come_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let spec = mds_spec(&dir);
    let trace = write(&dir, "t.jsonl", "{\"event\":\"verify\"}\n");
    let run = |flag: bool| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ou"));
        cmd.args(["simulate", "--spec", p(&spec), "--trace", p(&trace)]);
        if flag {
            cmd.args(["--seed", "7"]).env_remove("OU_SEED");
        } else {
            cmd.env("OU_SEED", "7");
        }
        cmd.output().unwrap()
    };
    let (a, b) = (run(true), run(false));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn witness_subcommands_succeed() {
    let dir = TempDir::new().unwrap();
    let spec = mds_spec(&dir);
    let r = ou(&["witness", "--theorem", "1", "--q", "3", "--seed", "1"]);
    assert_eq!(r.code, EXIT_PASS, "{}", r.stderr);
    for theorem in ["4", "k-1"] {
        let r = ou(&["witness", "--theorem", theorem, "--spec", p(&spec), "--seed", "1"]);
        assert_eq!(r.code, EXIT_PASS, "{theorem}: {}", r.stderr);
        json(&r);
    }
}
