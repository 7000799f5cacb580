//! Command implementations behind the `fogstream` binary.
//!
//! State files are registry files: one `id_hex sk_hex mode window e_ctr d_ctr`
//! line per device. `keygen` writes a matched pair of them, and `send`/`recv`
//! advance the counters and rewrite the file atomically, so an interrupted
//! run leaves either the old state or the new one, never a torn file.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fogstream_core::fogregistry::{Registry, RegistryError, StateError};
use fogstream_core::framing::{DeviceId, TUPLE_LEN};
use fogstream_core::hashcore::{derive_keystream, format_kat_line, HashFn};
use fogstream_core::netsim::{run_scenario, Scenario};
use fogstream_core::session::{CounterMode, SessionError, DEFAULT_RESYNC_WINDOW};
use fogstream_core::types::{Counter, SecretKey, SECRET_KEY_LEN};

use crate::bench::{run_scheme, BenchConfig, BenchReport, CSV_HEADER, SCHEMES};
use crate::CliError;

/// Path of the device-side state file for a keygen prefix.
pub fn device_state_path(prefix: &Path) -> PathBuf {
    PathBuf::from(format!("{}-device.state", prefix.display()))
}

/// Path of the fog-side state file for a keygen prefix.
pub fn fog_state_path(prefix: &Path) -> PathBuf {
    PathBuf::from(format!("{}-fog.state", prefix.display()))
}

// Write-then-rename in the target directory.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn save_registry(path: &Path, registry: &Registry) -> Result<(), CliError> {
    let mut buf = Vec::new();
    registry.save_state(&mut buf)?;
    atomic_write(path, &buf)
}

fn load_registry(path: &Path) -> Result<Registry, CliError> {
    let file = fs::File::open(path)?;
    Registry::load_state(BufReader::new(file)).map_err(|e| match e {
        StateError::Io(io) => CliError::Io(io),
        parse => CliError::Validation(format!("{}: {parse}", path.display())),
    })
}

/// Generates a fresh key pair of state files, `<prefix>-device.state` and
/// `<prefix>-fog.state`, sharing one secret and one device id.
///
/// Without a seed the key comes from the operating system's entropy source;
/// a seed makes the output reproducible for tests.
pub fn cmd_keygen(
    prefix: &Path,
    seed: Option<u64>,
    force: bool,
    log: &mut impl Write,
) -> Result<(), CliError> {
    let device_path = device_state_path(prefix);
    let fog_path = fog_state_path(prefix);
    if !force {
        for path in [&device_path, &fog_path] {
            if path.exists() {
                return Err(CliError::Io(std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    format!("{} exists; pass --force to overwrite", path.display()),
                )));
            }
        }
    }

    let mut sk_bytes = [0u8; SECRET_KEY_LEN];
    let mut id_bytes = [0u8; 8];
    match seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.fill_bytes(&mut sk_bytes);
            rng.fill_bytes(&mut id_bytes);
        }
        None => {
            let mut rng = rand::rngs::OsRng;
            rng.fill_bytes(&mut sk_bytes);
            rng.fill_bytes(&mut id_bytes);
        }
    }
    let sk = SecretKey::from_bytes(&sk_bytes).unwrap();
    let id = DeviceId::from_bytes(id_bytes);

    let mut registry = Registry::new();
    registry
        .register_device(id, sk, CounterMode::Dual, DEFAULT_RESYNC_WINDOW)
        .expect("fresh registry");
    save_registry(&device_path, &registry)?;
    save_registry(&fog_path, &registry)?;
    writeln!(log, "device id {id}")?;
    writeln!(log, "wrote {}", device_path.display())?;
    writeln!(log, "wrote {}", fog_path.display())?;
    Ok(())
}

fn single_device_id(registry: &Registry, path: &Path) -> Result<DeviceId, CliError> {
    let mut ids = registry.devices().map(|r| r.id());
    match (ids.next(), ids.next()) {
        (Some(id), None) => Ok(id),
        _ => Err(CliError::Validation(format!(
            "{} must contain exactly one device for send",
            path.display()
        ))),
    }
}

/// Encrypts an input of any length as a sequence of wire tuples.
///
/// Input is split at 55 bytes per message, the last message carrying the
/// remainder; empty input becomes a single zero-length message. Output is
/// raw concatenated tuples, or one lowercase hex line per tuple with `hex`.
///
/// The advanced counters are persisted before any tuple is emitted: a run
/// interrupted mid-output can lose counters (the receiver's window absorbs
/// that) but can never reuse one, which would pair two messages with the
/// same keystream.
pub fn cmd_send(
    state: &Path,
    payload: &[u8],
    hex_output: bool,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let mut registry = load_registry(state)?;
    let id = single_device_id(&registry, state)?;

    let chunks: Vec<&[u8]> = if payload.is_empty() {
        vec![&[]]
    } else {
        payload.chunks(fogstream_core::framing::MAX_PAYLOAD_LEN).collect()
    };

    // The whole batch must fit the remaining counter space; otherwise fail
    // up front with nothing emitted and nothing advanced.
    let (e_ctr, _) = registry.device(id).unwrap().session().peek_counters();
    if e_ctr.saturating_add(chunks.len() as u64) > Counter::MAX {
        return Err(CliError::Validation(
            "counter space exhausted, rekey required".into(),
        ));
    }

    let wires: Vec<_> = chunks
        .iter()
        .map(|chunk| {
            registry.encrypt_for_device(id, chunk).map_err(|e| match e {
                RegistryError::Session(SessionError::RekeyRequired) => {
                    CliError::Validation("counter space exhausted, rekey required".into())
                }
                other => CliError::Validation(other.to_string()),
            })
        })
        .collect::<Result<_, _>>()?;

    save_registry(state, &registry)?;
    for wire in wires {
        if hex_output {
            writeln!(out, "{}", hex::encode(wire))?;
        } else {
            out.write_all(&wire)?;
        }
    }
    Ok(())
}

// Hex mode iff the input is text whose nonempty lines are pure hex digits;
// otherwise the input is raw tuples split every 72 bytes. Raw ciphertext is
// effectively never all hex digits, so the sniff is unambiguous in practice.
fn split_wire_input(data: &[u8]) -> Vec<Vec<u8>> {
    if let Ok(text) = std::str::from_utf8(data) {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        if !lines.is_empty()
            && lines
                .iter()
                .all(|l| l.chars().all(|c| c.is_ascii_hexdigit()))
        {
            return lines
                .iter()
                .map(|l| hex::decode(l).unwrap_or_default())
                .collect();
        }
    }
    data.chunks(TUPLE_LEN).map(<[u8]>::to_vec).collect()
}

/// Decrypts a stream of wire tuples against a state file.
///
/// Accepted payloads are concatenated to `out`; one status line per message
/// goes to `diag`. A `window` override applies to this run only and is not
/// written back. Accepted progress is persisted even when later messages
/// fail, and any rejection surfaces as [`CliError::Reject`] after the run.
pub fn cmd_recv(
    state: &Path,
    wire_input: &[u8],
    window_override: Option<u32>,
    out: &mut impl Write,
    diag: &mut impl Write,
) -> Result<(), CliError> {
    let mut registry = load_registry(state)?;
    let configured: Vec<(DeviceId, u32)> = registry
        .devices()
        .map(|r| (r.id(), r.session().resync_window()))
        .collect();
    if let Some(window) = window_override {
        for (id, _) in &configured {
            registry
                .set_resync_window(*id, window)
                .map_err(|e| CliError::Validation(e.to_string()))?;
        }
    }

    let mut any_reject = false;
    for (index, wire) in split_wire_input(wire_input).iter().enumerate() {
        match registry.handle_tuple(wire) {
            Ok(delivery) => {
                out.write_all(delivery.payload.as_slice())?;
                writeln!(
                    diag,
                    "message {index}: ok id={} len={} skipped={}",
                    delivery.id,
                    delivery.payload.len(),
                    delivery.skipped
                )?;
            }
            Err(err) => {
                any_reject = true;
                writeln!(diag, "message {index}: {err}")?;
            }
        }
    }

    if window_override.is_some() {
        for (id, window) in configured {
            registry.set_resync_window(id, window).expect("restore window");
        }
    }
    save_registry(state, &registry)?;
    if any_reject {
        return Err(CliError::Reject);
    }
    Ok(())
}

/// Emits the known-answer vector file for a hash: zero key, counters
/// `1..=count`.
pub fn cmd_vectors(hash_name: &str, count: u64, out: &mut impl Write) -> Result<(), CliError> {
    let hash = HashFn::by_name(hash_name).map_err(|e| CliError::Validation(e.to_string()))?;
    if count > Counter::MAX {
        return Err(CliError::Validation(format!(
            "count {count} exceeds the counter maximum {}",
            Counter::MAX
        )));
    }
    writeln!(out, "# keystream vectors")?;
    writeln!(out, "# hash: {}", hash.name())?;
    writeln!(out, "# fields: sk_hex ctr_hex keystream_hex")?;
    let sk = SecretKey::from_bytes(&[0u8; SECRET_KEY_LEN]).unwrap();
    for value in 1..=count {
        let ctr = Counter::new(value).unwrap();
        let ks = derive_keystream(&sk, ctr, hash);
        writeln!(out, "{}", format_kat_line(&sk, ctr, &ks))?;
    }
    Ok(())
}

/// Times the requested schemes and prints a table; optionally writes CSV.
pub fn cmd_bench(
    schemes: &[String],
    blocks: usize,
    csv_path: Option<&Path>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let selected: Vec<String> = if schemes.is_empty() {
        SCHEMES.iter().map(|s| s.to_string()).collect()
    } else {
        schemes.to_vec()
    };
    let cfg = BenchConfig { blocks };
    let reports: Vec<BenchReport> = selected
        .iter()
        .map(|s| run_scheme(s, &cfg).map_err(CliError::Validation))
        .collect::<Result<_, _>>()?;

    writeln!(
        out,
        "{:<22} {:>16} {:>16} {:>14}",
        "scheme", "enc (us/byte)", "dec (us/byte)", "setup (us)"
    )?;
    for r in &reports {
        let setup = r
            .key_setup_us
            .map(|us| format!("{us:.4}"))
            .unwrap_or_else(|| "N/A".to_string());
        writeln!(
            out,
            "{:<22} {:>16.6} {:>16.6} {:>14}",
            r.scheme, r.encrypt_us_per_byte, r.decrypt_us_per_byte, setup
        )?;
    }
    writeln!(out, "blocks per pass: {blocks}, host: {}", crate::bench::host_description())?;

    if let Some(path) = csv_path {
        let mut csv = String::from(CSV_HEADER);
        csv.push('\n');
        for r in &reports {
            csv.push_str(&r.to_csv_row());
            csv.push('\n');
        }
        fs::write(path, csv)?;
        writeln!(out, "csv written to {}", path.display())?;
    }
    Ok(())
}

/// Runs a scenario file and emits its report as a table plus JSON.
pub fn cmd_scenario(
    file: &Path,
    report_path: Option<&Path>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let text = fs::read_to_string(file)?;
    let scenario = Scenario::from_json(&text).map_err(|e| CliError::Validation(e.to_string()))?;
    let report = run_scenario(&scenario).map_err(|e| CliError::Validation(e.to_string()))?;
    writeln!(out, "{report}")?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match report_path {
        Some(path) => {
            fs::write(path, json)?;
            writeln!(out, "report written to {}", path.display())?;
        }
        None => writeln!(out, "{json}")?,
    }
    Ok(())
}
