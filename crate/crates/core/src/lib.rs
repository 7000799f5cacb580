//! Hash-keystream encryption for IoT-to-fog links.
//!
//! Every message key is derived by hashing a copy of a 27-byte pre-shared
//! secret concatenated with a 5-byte monotone counter; the 32-byte digest,
//! doubled, is the one-time keystream XORed over a fixed 64-byte message
//! block whose last 8 bytes must decrypt to the key's first 8 bytes. The
//! counter never repeats and never moves on a failed check, so replayed,
//! modified, and forged traffic is refused without any per-message state
//! beyond the counter itself.
//!
//! The crate is organized along the protocol's moving parts:
//!
//! - [`hashcore`]: keystream derivation, the hash registry, precomputation,
//!   and the known-answer vector format.
//! - [`framing`]: the 64-byte block and 72-byte addressed-tuple codecs.
//! - [`session`]: the per-peer counter state machine, single- and
//!   dual-counter modes, windowed resynchronization, and memory accounting.
//! - [`fogregistry`]: fog-side multiplexing of many device sessions,
//!   staleness detection, and state persistence.
//! - [`netsim`]: a deterministic adversarial channel for reproducing attack
//!   scenarios as measurable experiments.

#![forbid(unsafe_code)]

pub mod fogregistry;
pub mod framing;
pub mod hashcore;
pub mod netsim;
pub mod session;
pub mod types;

pub use framing::{
    decode_tuple, deframe_message, encode_tuple, frame_message, CipherBlock, DeviceId,
    FramingError, Payload, PlainBlock, Reject, BLOCK_LEN, MAX_PAYLOAD_LEN, TUPLE_LEN,
};
pub use fogregistry::{Delivery, DeviceRecord, Registry, RegistryError, StateError};
pub use hashcore::{
    derive_keystream, hash32, precompute_keystream, HashError, HashFn, KeyInput, Keystream64,
    PrecomputedKeystream, DEFAULT_HASH, DIGEST_LEN, HASH_INPUT_LEN, KEYSTREAM_LEN,
};
pub use netsim::{
    bitflip_census, forgery_expected_passes, forgery_pass_probability, forgery_trial,
    run_scenario, AdversaryAction, BitflipCensus, PayloadSpec, Scenario, ScenarioError,
    ScenarioReport, ScheduleEntry, Topology,
};
pub use session::{
    memory_footprint, CounterMode, MemoryFootprint, MemoryParams, Session, SessionError,
    DEFAULT_RESYNC_WINDOW, MAX_RESYNC_WINDOW,
};
pub use types::{Counter, CounterError, KeyError, SecretKey, COUNTER_LEN, SECRET_KEY_LEN};
