//! Deterministic adversarial channel and scenario harness.
//!
//! A scenario describes a device-to-fog message flow plus a per-message
//! adversary schedule (drop, bit-flip, replay, inject, reorder). Running it
//! replays the schedule through the real framing, session, and registry code
//! and produces a quantitative report. Everything is derived from a named,
//! seedable generator so identical scenarios produce byte-identical reports
//! on any platform.
//!
//! The harness tracks every ground-truth plaintext, which is how "undetected
//! modification" is measurable at all; a real attacker has no such oracle.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framing::{encode_tuple, CipherBlock, DeviceId, BLOCK_LEN, MAX_PAYLOAD_LEN, TUPLE_LEN};
use crate::fogregistry::{Registry, RegistryError};
use crate::hashcore::{derive_keystream, precompute_keystream, HashFn, DEFAULT_HASH};
use crate::session::{CounterMode, Session, MAX_RESYNC_WINDOW};
use crate::types::{Counter, SecretKey, SECRET_KEY_LEN};

/// The one RNG the scenario format admits. Fixed by name in the file format
/// so archived scenarios stay reproducible.
pub const SCENARIO_RNG: &str = "chacha8";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario invalid: {0}")]
    Invalid(String),
}

/// One adversarial act applied to one scheduled message.
///
/// `pass` and `drop` act on the message itself. `bitflip` flips one bit of
/// the 72-byte wire tuple. `replay` delivers the message and then re-delivers
/// an earlier transmission (itself by default). `inject` delivers the message
/// and then raw attacker-chosen bytes. `reorder` delays the message by a
/// number of schedule steps; delivery order against later traffic is what
/// the protocol sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AdversaryAction {
    Pass,
    Drop,
    Bitflip {
        byte: usize,
        bit: u8,
    },
    Replay {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    Inject {
        hex: String,
    },
    Reorder {
        displacement: usize,
    },
}

fn default_repeat() -> usize {
    1
}

/// A schedule entry: an action, optionally applied to several consecutive
/// messages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    #[serde(flatten)]
    pub action: AdversaryAction,
    #[serde(default = "default_repeat")]
    pub repeat: usize,
}

impl From<AdversaryAction> for ScheduleEntry {
    fn from(action: AdversaryAction) -> Self {
        ScheduleEntry { action, repeat: 1 }
    }
}

/// How message payloads are produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayloadSpec {
    /// Independent random bytes, length uniform in `min_len..=max_len`.
    Random { min_len: usize, max_len: usize },
    /// The same fixed payload for every message.
    Fixed { hex: String },
}

impl Default for PayloadSpec {
    fn default() -> Self {
        PayloadSpec::Random {
            min_len: 0,
            max_len: MAX_PAYLOAD_LEN,
        }
    }
}

fn default_device_id() -> String {
    "0000000000000001".to_string()
}

fn default_stale_threshold() -> u64 {
    16
}

/// The device-to-fog link under test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub mode: CounterMode,
    /// Fog-side resynchronization window.
    pub window: u32,
    #[serde(default = "default_device_id")]
    pub device_id: String,
    /// Staleness threshold, in processed-message events, applied when the
    /// run ends.
    #[serde(default = "default_stale_threshold")]
    pub stale_threshold: u64,
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default = "default_rng")]
    pub rng: String,
    pub message_count: usize,
    #[serde(default)]
    pub payload: PayloadSpec,
    pub topology: Topology,
    pub schedule: Vec<ScheduleEntry>,
}

fn default_rng() -> String {
    SCENARIO_RNG.to_string()
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Expands `repeat` shorthand into one action per message.
    pub fn expanded_schedule(&self) -> Vec<AdversaryAction> {
        self.schedule
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.action.clone(), e.repeat))
            .collect()
    }

    /// Checks the scenario before any message runs.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.rng != SCENARIO_RNG {
            return Err(ScenarioError::Invalid(format!(
                "unsupported rng {:?}, expected {SCENARIO_RNG:?}",
                self.rng
            )));
        }
        // Check the repeat total before materializing anything, so a bogus
        // repeat count cannot make expansion itself expensive.
        let total = self
            .schedule
            .iter()
            .try_fold(0usize, |acc, e| acc.checked_add(e.repeat));
        if total != Some(self.message_count) {
            return Err(ScenarioError::Invalid(format!(
                "schedule covers {} messages, message_count is {}",
                total.map_or_else(|| "too many".to_string(), |t| t.to_string()),
                self.message_count
            )));
        }
        self.topology
            .device_id
            .parse::<DeviceId>()
            .map_err(ScenarioError::Invalid)?;
        if self.topology.window > MAX_RESYNC_WINDOW {
            return Err(ScenarioError::Invalid(format!(
                "window {} exceeds maximum {MAX_RESYNC_WINDOW}",
                self.topology.window
            )));
        }
        match &self.payload {
            PayloadSpec::Random { min_len, max_len } => {
                if min_len > max_len || *max_len > MAX_PAYLOAD_LEN {
                    return Err(ScenarioError::Invalid(format!(
                        "payload lengths {min_len}..={max_len} out of range"
                    )));
                }
            }
            PayloadSpec::Fixed { hex } => {
                let bytes = hex::decode(hex)
                    .map_err(|e| ScenarioError::Invalid(format!("payload hex: {e}")))?;
                if bytes.len() > MAX_PAYLOAD_LEN {
                    return Err(ScenarioError::Invalid(format!(
                        "fixed payload of {} bytes exceeds {MAX_PAYLOAD_LEN}",
                        bytes.len()
                    )));
                }
            }
        }
        for (i, action) in self.expanded_schedule().iter().enumerate() {
            match action {
                AdversaryAction::Bitflip { byte, bit } => {
                    if *byte >= TUPLE_LEN || *bit >= 8 {
                        return Err(ScenarioError::Invalid(format!(
                            "message {i}: bitflip position byte {byte} bit {bit} out of bounds"
                        )));
                    }
                }
                AdversaryAction::Replay { index: Some(j) } => {
                    if *j > i {
                        return Err(ScenarioError::Invalid(format!(
                            "message {i}: replay index {j} references a later message"
                        )));
                    }
                }
                AdversaryAction::Inject { hex } => {
                    hex::decode(hex)
                        .map_err(|e| ScenarioError::Invalid(format!("message {i}: inject hex: {e}")))?;
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Quantitative outcome of one scenario run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    /// Presentations the fog accepted.
    pub delivered: u64,
    /// Presentations the fog refused (integrity, framing, or unknown id).
    pub rejected: u64,
    /// Accepted presentations whose payload differed from the ground truth.
    pub undetected_modifications: u64,
    /// Times the receiver newly fell behind the sender.
    pub desync_events: u64,
    /// Accepted messages that had to skip ahead to resynchronize.
    pub resync_recoveries: u64,
    /// Largest counter distance skipped by one accepted message.
    pub max_skipped: u64,
    /// Devices flagged stale at the end of the run.
    pub stale_devices: Vec<String>,
}

impl std::fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "delivered                 {:>8}", self.delivered)?;
        writeln!(f, "rejected                  {:>8}", self.rejected)?;
        writeln!(
            f,
            "undetected modifications  {:>8}",
            self.undetected_modifications
        )?;
        writeln!(f, "desync events             {:>8}", self.desync_events)?;
        writeln!(f, "resync recoveries         {:>8}", self.resync_recoveries)?;
        writeln!(f, "max skipped               {:>8}", self.max_skipped)?;
        let stale = if self.stale_devices.is_empty() {
            "none".to_string()
        } else {
            self.stale_devices.join(", ")
        };
        write!(f, "stale devices             {stale}")
    }
}

// One wire buffer offered to the fog: the ground-truth message it descends
// from, if any, and the bytes on the wire.
struct Presentation {
    origin: Option<usize>,
    wire: Vec<u8>,
}

/// Runs a scenario to completion.
///
/// Fully deterministic for a given scenario, seed included. The schedule is
/// replayed through a real device session and a real fog registry; nothing
/// on the cryptographic path is simulated.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioReport, ScenarioError> {
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);

    let mut sk_bytes = [0u8; SECRET_KEY_LEN];
    rng.fill_bytes(&mut sk_bytes);
    let sk = SecretKey::from_bytes(&sk_bytes).unwrap();
    let device_id: DeviceId = sc.topology.device_id.parse().unwrap();

    let mut device = Session::new(sk.clone(), sc.topology.mode, 0, DEFAULT_HASH)
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let mut fog = Registry::new();
    fog.register_device(device_id, sk.clone(), sc.topology.mode, sc.topology.window)
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;

    let fixed_payload = match &sc.payload {
        PayloadSpec::Fixed { hex } => Some(hex::decode(hex).unwrap()),
        PayloadSpec::Random { .. } => None,
    };

    let mut report = ScenarioReport {
        delivered: 0,
        rejected: 0,
        undetected_modifications: 0,
        desync_events: 0,
        resync_recoveries: 0,
        max_skipped: 0,
        stale_devices: Vec::new(),
    };

    let mut transcript: Vec<Vec<u8>> = Vec::with_capacity(sc.message_count);
    let mut truths: Vec<Vec<u8>> = Vec::with_capacity(sc.message_count);
    // Reordered messages waiting for their delivery step.
    let mut in_transit: Vec<(usize, Presentation)> = Vec::new();
    let mut prev_gap = 0u64;

    let schedule = sc.expanded_schedule();
    for (step, action) in schedule.iter().enumerate() {
        let payload = match &fixed_payload {
            Some(p) => p.clone(),
            None => {
                let (min_len, max_len) = match &sc.payload {
                    PayloadSpec::Random { min_len, max_len } => (*min_len, *max_len),
                    PayloadSpec::Fixed { .. } => unreachable!(),
                };
                let len = rng.gen_range(min_len..=max_len);
                let mut p = vec![0u8; len];
                rng.fill_bytes(&mut p);
                p
            }
        };

        let enc = device
            .encrypt_next(&payload)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let wire = encode_tuple(device_id, &enc).to_vec();
        assert_no_leak(&wire, &payload, &sk);
        transcript.push(wire.clone());
        truths.push(payload);

        let mut presentations: Vec<Presentation> = Vec::new();
        match action {
            AdversaryAction::Pass => presentations.push(Presentation {
                origin: Some(step),
                wire,
            }),
            AdversaryAction::Drop => {}
            AdversaryAction::Bitflip { byte, bit } => {
                let mut modified = wire;
                modified[*byte] ^= 1 << bit;
                presentations.push(Presentation {
                    origin: Some(step),
                    wire: modified,
                });
            }
            AdversaryAction::Replay { index } => {
                let j = index.unwrap_or(step);
                presentations.push(Presentation {
                    origin: Some(step),
                    wire,
                });
                presentations.push(Presentation {
                    origin: Some(j),
                    wire: transcript[j].clone(),
                });
            }
            AdversaryAction::Inject { hex } => {
                presentations.push(Presentation {
                    origin: Some(step),
                    wire,
                });
                presentations.push(Presentation {
                    origin: None,
                    wire: hex::decode(hex).unwrap(),
                });
            }
            AdversaryAction::Reorder { displacement } => {
                in_transit.push((
                    step.saturating_add(*displacement),
                    Presentation {
                        origin: Some(step),
                        wire,
                    },
                ));
            }
        }

        // Delayed messages due at this step arrive after the step's own
        // traffic, in the order they entered the channel.
        let mut due: Vec<Presentation> = Vec::new();
        in_transit.retain_mut(|(due_step, p)| {
            if *due_step <= step {
                due.push(Presentation {
                    origin: p.origin,
                    wire: std::mem::take(&mut p.wire),
                });
                false
            } else {
                true
            }
        });
        presentations.extend(due);

        for p in presentations {
            process_presentation(&mut fog, &truths, &p, &mut report);
        }

        prev_gap = track_desync(&device, &fog, device_id, prev_gap, &mut report);
    }

    // Anything still in transit is delivered after the schedule ends.
    in_transit.sort_by_key(|(due_step, _)| *due_step);
    for (_, p) in in_transit {
        process_presentation(&mut fog, &truths, &p, &mut report);
    }
    track_desync(&device, &fog, device_id, prev_gap, &mut report);

    report.stale_devices = fog
        .stale_devices(sc.topology.stale_threshold)
        .iter()
        .map(|id| id.to_hex())
        .collect();
    Ok(report)
}

fn process_presentation(
    fog: &mut Registry,
    truths: &[Vec<u8>],
    p: &Presentation,
    report: &mut ScenarioReport,
) {
    match fog.handle_tuple(&p.wire) {
        Ok(delivery) => {
            report.delivered += 1;
            if delivery.skipped > 0 {
                report.resync_recoveries += 1;
                report.max_skipped = report.max_skipped.max(delivery.skipped);
            }
            let matches_truth = p
                .origin
                .map(|j| delivery.payload.as_slice() == truths[j].as_slice())
                .unwrap_or(false);
            if !matches_truth {
                report.undetected_modifications += 1;
            }
        }
        Err(
            RegistryError::Reject(_) | RegistryError::Framing(_) | RegistryError::UnknownDevice(_),
        ) => {
            report.rejected += 1;
        }
        Err(other) => unreachable!("handle_tuple cannot fail with {other:?}"),
    }
}

fn track_desync(
    device: &Session,
    fog: &Registry,
    device_id: DeviceId,
    prev_gap: u64,
    report: &mut ScenarioReport,
) -> u64 {
    let sender_e = device.peek_counters().0;
    let receiver_d = fog
        .device(device_id)
        .map(|r| r.session().peek_counters().1)
        .unwrap_or(0);
    let gap = sender_e.saturating_sub(receiver_d);
    if prev_gap == 0 && gap > 0 {
        report.desync_events += 1;
    }
    gap
}

// A record-only adversary must learn nothing: the wire never carries the key,
// and payloads long enough to rule out coincidence never appear in the clear.
fn assert_no_leak(wire: &[u8], payload: &[u8], sk: &SecretKey) {
    assert!(
        !contains(wire, sk.as_bytes()),
        "secret key leaked onto the wire"
    );
    if payload.len() >= 8 {
        assert!(
            !contains(wire, payload),
            "payload visible in ciphertext wire"
        );
    }
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Outcome of flipping every bit of one ciphertext block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitflipCensus {
    detected: Vec<bool>,
}

impl BitflipCensus {
    /// Detection flag per bit position, indexed `byte * 8 + bit`, 512 entries.
    pub fn detected(&self) -> &[bool] {
        &self.detected
    }

    pub fn detected_count(&self) -> usize {
        self.detected.iter().filter(|d| **d).count()
    }

    /// Detections whose bit position falls inside a byte range of the block.
    pub fn detected_in_bytes(&self, bytes: std::ops::Range<usize>) -> usize {
        self.detected[bytes.start * 8..bytes.end * 8]
            .iter()
            .filter(|d| **d)
            .count()
    }
}

/// Flips each of the 512 bits of one encrypted block in turn and records
/// whether a fresh, synchronized receiver rejects the result.
///
/// Under the XOR construction a ciphertext flip moves only the same
/// plaintext bit, so detection is confined to the check bytes and to length
/// values pushed past the 55-byte limit; the census makes that measurable.
pub fn bitflip_census(sk: &SecretKey, payload: &[u8], ctr: Counter) -> BitflipCensus {
    let hash = HashFn::by_name(DEFAULT_HASH).unwrap();
    let template = Session::resume(
        sk.clone(),
        CounterMode::Dual,
        0,
        DEFAULT_HASH,
        0,
        ctr.value() - 1,
    )
    .expect("census receiver");

    let block = crate::framing::frame_message(payload, sk).expect("census payload");
    let enc = derive_keystream(sk, ctr, hash).apply(block.as_bytes());

    let detected = (0..BLOCK_LEN * 8)
        .map(|pos| {
            let mut flipped = enc;
            flipped[pos / 8] ^= 1 << (pos % 8);
            let mut receiver = template.clone();
            receiver
                .decrypt_next(&CipherBlock::from_bytes(flipped))
                .is_err()
        })
        .collect();
    BitflipCensus { detected }
}

/// Probability that one uniformly random block passes a receiver scanning
/// `window + 1` counter candidates, from first principles:
/// `(window + 1) / 2^64`.
pub fn forgery_pass_probability(window: u32) -> f64 {
    (window as f64 + 1.0) / 2f64.powi(64)
}

/// Expected number of passes over `trials` random blocks.
pub fn forgery_expected_passes(trials: u64, window: u32) -> f64 {
    trials as f64 * forgery_pass_probability(window)
}

// The per-trial acceptance predicate for a fresh receiver. Rejected attempts
// leave the receiver's counter untouched, so the same `window + 1` candidate
// keystreams apply to every trial; they are precomputed once and each block
// is screened by XOR and comparison alone. A screen hit is confirmed through
// a real session before it counts.
struct ForgeryScreen {
    sk: SecretKey,
    window: u32,
    // Per candidate: the tail a passing block must carry, i.e. the check
    // constant re-masked by that keystream, plus the length-byte mask.
    screens: Vec<([u8; 8], u8)>,
}

impl ForgeryScreen {
    fn new(sk: &SecretKey, window: u32) -> Self {
        let hash = HashFn::by_name(DEFAULT_HASH).unwrap();
        let candidates = window as usize + 1;
        let pre = precompute_keystream(sk, Counter::new(1).unwrap(), candidates, hash)
            .expect("candidate range");
        let check = sk.check_bytes();
        let screens = (0..candidates)
            .map(|i| {
                let kb = *pre.get(i).unwrap().as_bytes();
                let mut tail = [0u8; 8];
                for (t, (k, c)) in tail.iter_mut().zip(kb[56..].iter().zip(check.iter())) {
                    *t = k ^ c;
                }
                (tail, kb[55])
            })
            .collect();
        ForgeryScreen {
            sk: sk.clone(),
            window,
            screens,
        }
    }

    fn passes(&self, block: &[u8; BLOCK_LEN]) -> bool {
        let hit = self.screens.iter().any(|(tail, ks55)| {
            block[56..] == *tail && (block[55] ^ ks55) as usize <= MAX_PAYLOAD_LEN
        });
        if !hit {
            return false;
        }
        let mut receiver =
            Session::new(self.sk.clone(), CounterMode::Dual, self.window, DEFAULT_HASH).unwrap();
        receiver
            .decrypt_with_resync(&CipherBlock::from_bytes(*block))
            .is_ok()
    }
}

/// Feeds `trials` uniformly random 64-byte blocks to a fresh receiver with
/// the given resync window and returns how many pass the integrity check.
pub fn forgery_trial(sk: &SecretKey, trials: u64, window: u32, seed: u64) -> u64 {
    let screen = ForgeryScreen::new(sk, window);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passes = 0u64;
    let mut block = [0u8; BLOCK_LEN];
    for _ in 0..trials {
        rng.fill_bytes(&mut block);
        if screen.passes(&block) {
            passes += 1;
        }
    }
    passes
}
