//! Per-peer protocol state machine.
//!
//! A session owns the secret key, the counter state, and the resync window,
//! and provides encryption and decryption over 64-byte blocks. Counters are
//! stored as the *last used* value, starting at 0, and every operation
//! increments before use, so the first message of a session is keyed with
//! counter 1.
//!
//! Two counter modes exist. In single-counter mode one counter serves both
//! directions, which deadlocks when both peers send simultaneously: both
//! increment on encrypt, then both increment again on decrypt and look two
//! steps ahead of the message in flight. Dual-counter mode keeps separate
//! encryption and decryption counters so the send counter on one side tracks
//! the receive counter on the other, and simultaneous sends decrypt cleanly.
//! Dual is the default.
//!
//! A session is a single-owner mutable state machine: operations on one
//! session must be externally serialized, distinct sessions are independent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framing::{
    deframe_message, frame_message, CipherBlock, FramingError, Payload, PlainBlock, Reject,
};
use crate::hashcore::{derive_keystream, HashError, HashFn};
use crate::types::{Counter, SecretKey};

/// Default resynchronization window.
pub const DEFAULT_RESYNC_WINDOW: u32 = 1024;

/// Largest accepted resynchronization window. Kept very small relative to
/// the 64-bit check space so a wide scan still cannot make forgery viable.
pub const MAX_RESYNC_WINDOW: u32 = 5_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error(transparent)]
    UnknownHash(#[from] HashError),
    #[error("resync window {got} exceeds the maximum {MAX_RESYNC_WINDOW}")]
    WindowTooLarge { got: u32 },
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error("counter space exhausted, rekey required")]
    RekeyRequired,
    #[error("counter value {value} exceeds the 40-bit maximum")]
    CounterOutOfRange { value: u64 },
    #[error("single-counter session cannot resume with e_ctr {e} != d_ctr {d}")]
    SingleModeCounterMismatch { e: u64, d: u64 },
}

/// Whether a session keeps one shared counter or separate encrypt/decrypt
/// counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CounterMode {
    Single,
    Dual,
}

impl std::fmt::Display for CounterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CounterMode::Single => f.write_str("single"),
            CounterMode::Dual => f.write_str("dual"),
        }
    }
}

impl std::str::FromStr for CounterMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(CounterMode::Single),
            "dual" => Ok(CounterMode::Dual),
            other => Err(format!("unknown counter mode {other:?}")),
        }
    }
}

// Last-used counter state. Single mode holds one value for both directions.
#[derive(Debug, Clone, Copy)]
enum Counters {
    Single(u64),
    Dual { e: u64, d: u64 },
}

impl Counters {
    fn encrypt_side(&self) -> u64 {
        match self {
            Counters::Single(c) => *c,
            Counters::Dual { e, .. } => *e,
        }
    }

    fn decrypt_side(&self) -> u64 {
        match self {
            Counters::Single(c) => *c,
            Counters::Dual { d, .. } => *d,
        }
    }

    fn set_encrypt_side(&mut self, value: u64) {
        match self {
            Counters::Single(c) => *c = value,
            Counters::Dual { e, .. } => *e = value,
        }
    }

    fn set_decrypt_side(&mut self, value: u64) {
        match self {
            Counters::Single(c) => *c = value,
            Counters::Dual { d, .. } => *d = value,
        }
    }
}

/// Protocol state for one peer relationship.
#[derive(Clone)]
pub struct Session {
    sk: SecretKey,
    mode: CounterMode,
    counters: Counters,
    resync_window: u32,
    hash: &'static HashFn,
}

impl Session {
    /// Opens a fresh session. Both counters start in the pre-first-use state,
    /// so the first encryption and the first decryption each use counter 1.
    pub fn new(
        sk: SecretKey,
        mode: CounterMode,
        resync_window: u32,
        hash_name: &str,
    ) -> Result<Self, SessionError> {
        Session::resume(sk, mode, resync_window, hash_name, 0, 0)
    }

    /// Reopens a session at persisted last-used counter values.
    pub fn resume(
        sk: SecretKey,
        mode: CounterMode,
        resync_window: u32,
        hash_name: &str,
        e_ctr: u64,
        d_ctr: u64,
    ) -> Result<Self, SessionError> {
        let hash = HashFn::by_name(hash_name)?;
        if resync_window > MAX_RESYNC_WINDOW {
            return Err(SessionError::WindowTooLarge { got: resync_window });
        }
        for value in [e_ctr, d_ctr] {
            if value > Counter::MAX {
                return Err(SessionError::CounterOutOfRange { value });
            }
        }
        let counters = match mode {
            CounterMode::Single => {
                if e_ctr != d_ctr {
                    return Err(SessionError::SingleModeCounterMismatch { e: e_ctr, d: d_ctr });
                }
                Counters::Single(e_ctr)
            }
            CounterMode::Dual => Counters::Dual { e: e_ctr, d: d_ctr },
        };
        Ok(Session {
            sk,
            mode,
            counters,
            resync_window,
            hash,
        })
    }

    pub fn mode(&self) -> CounterMode {
        self.mode
    }

    pub fn resync_window(&self) -> u32 {
        self.resync_window
    }

    /// Adjusts the resync window of a live session.
    pub fn set_resync_window(&mut self, window: u32) -> Result<(), SessionError> {
        if window > MAX_RESYNC_WINDOW {
            return Err(SessionError::WindowTooLarge { got: window });
        }
        self.resync_window = window;
        Ok(())
    }

    pub fn hash_name(&self) -> &'static str {
        self.hash.name()
    }

    pub(crate) fn secret_key(&self) -> &SecretKey {
        &self.sk
    }

    /// Last-used counter values as `(e_ctr, d_ctr)`. A fresh session reads
    /// `(0, 0)`; in single mode both snapshots are the shared counter.
    pub fn peek_counters(&self) -> (u64, u64) {
        (self.counters.encrypt_side(), self.counters.decrypt_side())
    }

    /// Encrypts one payload of up to 55 bytes.
    ///
    /// Increments the encryption counter by exactly one and XORs the framed
    /// block with the keystream for the new counter value. On any error the
    /// session state is unchanged.
    pub fn encrypt_next(&mut self, payload: &[u8]) -> Result<CipherBlock, SessionError> {
        let block = frame_message(payload, &self.sk)?;
        let last = self.counters.encrypt_side();
        let ctr = Counter::new(last + 1).map_err(|_| SessionError::RekeyRequired)?;
        let ks = derive_keystream(&self.sk, ctr, self.hash);
        self.counters.set_encrypt_side(ctr.value());
        Ok(CipherBlock::from_bytes(ks.apply(block.as_bytes())))
    }

    /// Decrypts the next expected block, with no resynchronization scan.
    ///
    /// On success the decryption counter advances by one; on rejection it is
    /// left exactly where it was, as if the attempt never happened.
    pub fn decrypt_next(&mut self, enc: &CipherBlock) -> Result<Payload, Reject> {
        self.try_candidates(enc, 0).map(|(payload, _)| payload)
    }

    /// Decrypts with the session's resync window.
    ///
    /// Tries candidate counters `d+1 ..= d+1+W` in ascending order and commits
    /// to the first that passes the integrity check, returning how many
    /// counter values were skipped. Counters at or below the current value
    /// are never tried, so an old message can never re-enter. On total
    /// failure the state is unchanged.
    pub fn decrypt_with_resync(&mut self, enc: &CipherBlock) -> Result<(Payload, u64), Reject> {
        self.try_candidates(enc, self.resync_window)
    }

    // One keystream is derived per candidate; nothing is committed until a
    // candidate passes the check.
    fn try_candidates(&mut self, enc: &CipherBlock, window: u32) -> Result<(Payload, u64), Reject> {
        let last = self.counters.decrypt_side();
        for skipped in 0..=window as u64 {
            let value = last + 1 + skipped;
            let Ok(ctr) = Counter::new(value) else {
                break; // candidates past the 40-bit limit cannot exist
            };
            let ks = derive_keystream(&self.sk, ctr, self.hash);
            let block = PlainBlock::from_bytes(ks.apply(enc.as_bytes()));
            if let Ok(payload) = deframe_message(&block, &self.sk) {
                self.counters.set_decrypt_side(value);
                return Ok((payload, skipped));
            }
        }
        Err(Reject)
    }
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (e, d) = self.peek_counters();
        f.debug_struct("Session")
            .field("mode", &self.mode)
            .field("e_ctr", &e)
            .field("d_ctr", &d)
            .field("resync_window", &self.resync_window)
            .field("hash", &self.hash.name())
            .finish()
    }
}

/// Inputs to the memory accounting formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryParams {
    /// Working-state size of the hash implementation, size(H).
    pub hash_state: u64,
    /// size(SK || CTR); 27 + 5 = 32 for this protocol.
    pub sk_ctr: u64,
    /// Whether a second 5-byte decryption counter is kept.
    pub dual: bool,
}

impl MemoryParams {
    /// Parameters for a registered hash at the protocol's 32-byte key-plus-
    /// counter size.
    pub fn for_hash(hash: &HashFn, dual: bool) -> Self {
        MemoryParams {
            hash_state: hash.state_size() as u64,
            sk_ctr: crate::hashcore::HASH_INPUT_LEN as u64,
            dual,
        }
    }
}

/// SRAM requirement breakdown, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryFootprint {
    /// Long-lived storage: hash state, the stored key and counter(s).
    pub global_bytes: u64,
    /// Peak transient storage: the key copy and counter assembled per hash.
    pub peak_local_bytes: u64,
    /// Sum of the above.
    pub total_bytes: u64,
}

/// Computes the protocol's SRAM requirement.
///
/// Single-counter total is `size(H) + 2*size(SK || CTR)`; dual-counter mode
/// adds one 5-byte counter. The global share is the hash state plus one
/// stored key-and-counter (plus the extra counter in dual mode), and the
/// peak local share is the hashing copy.
pub fn memory_footprint(p: &MemoryParams) -> MemoryFootprint {
    let extra_ctr = if p.dual {
        crate::types::COUNTER_LEN as u64
    } else {
        0
    };
    let global_bytes = p.hash_state + p.sk_ctr + extra_ctr;
    let peak_local_bytes = p.sk_ctr;
    MemoryFootprint {
        global_bytes,
        peak_local_bytes,
        total_bytes: global_bytes + peak_local_bytes,
    }
}
