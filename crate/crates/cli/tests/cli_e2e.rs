//! End-to-end tests of the `fogstream` binary and the command layer.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;

use fogstream_cli::commands;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fogstream"))
}

fn run(args: &[&str], stdin: &[u8]) -> Output {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn fogstream");
    child.stdin.as_mut().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().expect("wait fogstream")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

struct Pair {
    _dir: tempfile::TempDir,
    device: PathBuf,
    fog: PathBuf,
}

fn keygen_pair(seed: u64) -> Pair {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("pair");
    let out = run(
        &[
            "keygen",
            "--out",
            prefix.to_str().unwrap(),
            "--seed",
            &seed.to_string(),
        ],
        b"",
    );
    assert_eq!(exit_code(&out), 0, "{out:?}");
    Pair {
        device: commands::device_state_path(&prefix),
        fog: commands::fog_state_path(&prefix),
        _dir: dir,
    }
}

#[test]
fn keygen_seeded_is_reproducible() {
    let a = keygen_pair(7);
    let b = keygen_pair(7);
    assert_eq!(fs::read(&a.device).unwrap(), fs::read(&b.device).unwrap());
    assert_eq!(fs::read(&a.device).unwrap(), fs::read(&a.fog).unwrap());

    let c = keygen_pair(8);
    assert_ne!(fs::read(&a.device).unwrap(), fs::read(&c.device).unwrap());
}

#[test]
fn keygen_unseeded_runs_differ() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("one");
    let p2 = dir.path().join("two");
    for p in [&p1, &p2] {
        let out = run(&["keygen", "--out", p.to_str().unwrap()], b"");
        assert_eq!(exit_code(&out), 0);
    }
    assert_ne!(
        fs::read(commands::device_state_path(&p1)).unwrap(),
        fs::read(commands::device_state_path(&p2)).unwrap()
    );
}

#[test]
fn keygen_refuses_overwrite_without_force() {
    let pair = keygen_pair(1);
    let prefix = pair.device.to_str().unwrap().trim_end_matches("-device.state");
    let out = run(&["keygen", "--out", prefix, "--seed", "2"], b"");
    assert_eq!(exit_code(&out), 3);

    let out = run(&["keygen", "--out", prefix, "--seed", "2", "--force"], b"");
    assert_eq!(exit_code(&out), 0);
}

#[test]
fn binary_pipe_roundtrip() {
    let pair = keygen_pair(11);
    let message = b"the quick brown fox jumps over the lazy dog, twice over!";

    let sent = run(&["send", "--state", pair.device.to_str().unwrap()], message);
    assert_eq!(exit_code(&sent), 0);
    // 56 bytes -> two tuples.
    assert_eq!(sent.stdout.len(), 144);

    let received = run(
        &["recv", "--state", pair.fog.to_str().unwrap()],
        &sent.stdout,
    );
    assert_eq!(exit_code(&received), 0, "{received:?}");
    assert_eq!(received.stdout, message);
}

#[test]
fn hex_pipe_roundtrip() {
    let pair = keygen_pair(12);
    let sent = run(
        &["send", "--state", pair.device.to_str().unwrap(), "--hex"],
        b"hex mode",
    );
    assert_eq!(exit_code(&sent), 0);
    let text = String::from_utf8(sent.stdout.clone()).unwrap();
    assert_eq!(text.trim().len(), 144);

    let received = run(
        &["recv", "--state", pair.fog.to_str().unwrap()],
        &sent.stdout,
    );
    assert_eq!(exit_code(&received), 0);
    assert_eq!(received.stdout, b"hex mode");
}

#[test]
fn empty_input_sends_one_tuple() {
    let pair = keygen_pair(13);
    let sent = run(&["send", "--state", pair.device.to_str().unwrap()], b"");
    assert_eq!(sent.stdout.len(), 72);
    let received = run(
        &["recv", "--state", pair.fog.to_str().unwrap()],
        &sent.stdout,
    );
    assert_eq!(exit_code(&received), 0);
    assert!(received.stdout.is_empty());
}

#[test]
fn long_input_splits_at_55() {
    let pair = keygen_pair(14);
    let sent = run(
        &["send", "--state", pair.device.to_str().unwrap()],
        &[0x31u8; 120],
    );
    // ceil(120 / 55) = 3 tuples.
    assert_eq!(sent.stdout.len(), 3 * 72);
}

#[test]
fn tampered_wire_exits_2_and_keeps_state() {
    let pair = keygen_pair(15);
    let sent = run(
        &["send", "--state", pair.device.to_str().unwrap()],
        b"authentic",
    );
    let mut tampered = sent.stdout.clone();
    let last = tampered.len() - 1;
    tampered[last] ^= 0x80;

    let fog_before = fs::read(&pair.fog).unwrap();
    let received = run(&["recv", "--state", pair.fog.to_str().unwrap()], &tampered);
    assert_eq!(exit_code(&received), 2);
    assert!(received.stdout.is_empty());
    // Rejected messages leave the persisted counters untouched.
    assert_eq!(fs::read(&pair.fog).unwrap(), fog_before);

    // The original still decrypts afterwards.
    let received = run(
        &["recv", "--state", pair.fog.to_str().unwrap()],
        &sent.stdout,
    );
    assert_eq!(exit_code(&received), 0);
    assert_eq!(received.stdout, b"authentic");
}

#[test]
fn window_flag_recovers_after_lost_tuples() {
    let pair = keygen_pair(16);
    for _ in 0..3 {
        let lost = run(&["send", "--state", pair.device.to_str().unwrap()], b"lost");
        assert_eq!(exit_code(&lost), 0);
    }
    let sent = run(
        &["send", "--state", pair.device.to_str().unwrap()],
        b"arrives",
    );
    let received = run(
        &[
            "recv",
            "--state",
            pair.fog.to_str().unwrap(),
            "--window",
            "16",
        ],
        &sent.stdout,
    );
    assert_eq!(exit_code(&received), 0);
    assert_eq!(received.stdout, b"arrives");
    let diag = String::from_utf8(received.stderr).unwrap();
    assert!(diag.contains("skipped=3"), "{diag}");
    // The override is per-run: the persisted window is unchanged.
    let saved = fs::read_to_string(&pair.fog).unwrap();
    assert!(saved.contains(" dual 1024 "), "{saved}");
}

#[test]
fn send_refuses_batches_past_counter_exhaustion() {
    // Two counters left, three blocks needed: nothing may be emitted and
    // the state must not move, or a later send would reuse keystream.
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("near-end.state");
    let max = (1u64 << 40) - 1;
    let line = format!(
        "0000000000000001 {} dual 16 {} 0\n",
        "ab".repeat(27),
        max - 2
    );
    fs::write(&state, &line).unwrap();

    let out = run(
        &["send", "--state", state.to_str().unwrap()],
        &[0x55u8; 120],
    );
    assert_eq!(exit_code(&out), 4);
    assert!(out.stdout.is_empty());
    assert_eq!(fs::read_to_string(&state).unwrap(), line);

    // Two blocks still fit exactly.
    let out = run(
        &["send", "--state", state.to_str().unwrap()],
        &[0x55u8; 110],
    );
    assert_eq!(exit_code(&out), 0);
    assert_eq!(out.stdout.len(), 144);
    assert!(fs::read_to_string(&state)
        .unwrap()
        .contains(&format!(" {max} 0")));
}

#[test]
fn state_rewrite_leaves_no_temp_files() {
    let pair = keygen_pair(17);
    run(&["send", "--state", pair.device.to_str().unwrap()], b"x");
    let dir = pair.device.parent().unwrap();
    let names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 2, "unexpected files: {names:?}");
}

#[test]
fn vectors_match_the_frozen_kat_file() {
    let out = run(&["vectors", "--count", "16"], b"");
    assert_eq!(exit_code(&out), 0);
    let frozen = workspace_root().join("crates/core/tests/data/blake2s_zero_key.kat");
    assert_eq!(out.stdout, fs::read(frozen).unwrap());
}

#[test]
fn vectors_count_zero_is_header_only() {
    let out = run(&["vectors", "--count", "0"], b"");
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with('#')));
}

#[test]
fn exit_codes_per_failure_class() {
    // Usage: unknown flag.
    let out = run(&["send", "--nonsense"], b"");
    assert_eq!(exit_code(&out), 1);

    // I/O: missing state file.
    let out = run(&["send", "--state", "/nonexistent/state"], b"");
    assert_eq!(exit_code(&out), 3);

    // Validation: unknown hash, unknown scheme, malformed scenario.
    let out = run(&["vectors", "--hash", "md5", "--count", "1"], b"");
    assert_eq!(exit_code(&out), 4);
    let out = run(&["bench", "--schemes", "rot13", "--blocks", "1000"], b"");
    assert_eq!(exit_code(&out), 4);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"seed\": 1}").unwrap();
    let out = run(&["scenario", "--file", bad.to_str().unwrap()], b"");
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn corrupt_state_file_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("broken.state");
    fs::write(&state, "not a state line\n").unwrap();
    let out = run(&["send", "--state", state.to_str().unwrap()], b"x");
    assert_eq!(exit_code(&out), 4);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 1"), "{stderr}");
}

#[test]
fn bundled_scenarios_produce_expected_reports() {
    let scenarios = workspace_root().join("scenarios");
    let dir = tempfile::tempdir().unwrap();

    let report = dir.path().join("replay.json");
    let out = run(
        &[
            "scenario",
            "--file",
            scenarios.join("replay.json").to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ],
        b"",
    );
    assert_eq!(exit_code(&out), 0);
    let replay: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(replay["delivered"], 100);
    assert_eq!(replay["rejected"], 100);
    assert_eq!(replay["undetected_modifications"], 0);

    let report = dir.path().join("desync.json");
    let out = run(
        &[
            "scenario",
            "--file",
            scenarios.join("desync.json").to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ],
        b"",
    );
    assert_eq!(exit_code(&out), 0);
    let desync: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(desync["desync_events"], 1);
    assert_eq!(desync["resync_recoveries"], 1);
    assert_eq!(desync["max_skipped"], 3);

    // The remaining bundled files stay valid and deterministic.
    for name in ["mitm.json", "bitflip.json", "dos_flood.json"] {
        let out = run(
            &[
                "scenario",
                "--file",
                scenarios.join(name).to_str().unwrap(),
            ],
            b"",
        );
        assert_eq!(exit_code(&out), 0, "{name}: {out:?}");
    }
    let flood = run(
        &[
            "scenario",
            "--file",
            scenarios.join("dos_flood.json").to_str().unwrap(),
        ],
        b"",
    );
    let text = String::from_utf8(flood.stdout).unwrap();
    assert!(
        text.contains("stale devices             0000000000000001"),
        "{text}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // send | recv is the identity on arbitrary binary input, run in-process
    // against real state files.
    #[test]
    fn send_recv_inverse_on_arbitrary_files(
        seed in any::<u64>(),
        data in prop::collection::vec(any::<u8>(), 0..8192),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("p");
        let mut log = Vec::new();
        commands::cmd_keygen(&prefix, Some(seed), false, &mut log).unwrap();

        let mut wire = Vec::new();
        commands::cmd_send(&commands::device_state_path(&prefix), &data, false, &mut wire).unwrap();
        prop_assert_eq!(wire.len() % 72, 0);

        let mut out = Vec::new();
        let mut diag = Vec::new();
        commands::cmd_recv(&commands::fog_state_path(&prefix), &wire, None, &mut out, &mut diag)
            .unwrap();
        prop_assert_eq!(out, data);
    }
}
