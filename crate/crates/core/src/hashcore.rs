//! Keystream derivation.
//!
//! Every message key is the digest of the 32-byte concatenation of a copy of
//! the 27-byte secret and a 5-byte counter, and the 64-byte keystream is that
//! digest concatenated with itself. Hash functions are addressed by name
//! through a small registry so the digest algorithm can be swapped without
//! touching the protocol; BLAKE2s-256 is the default and the only registered
//! entry.

use blake2::{Blake2s256, Digest};
use thiserror::Error;

use crate::types::{Counter, CounterError, SecretKey, COUNTER_LEN, SECRET_KEY_LEN};

/// Required hash input length: 27 key bytes followed by 5 counter bytes.
pub const HASH_INPUT_LEN: usize = SECRET_KEY_LEN + COUNTER_LEN;

/// Required digest length.
pub const DIGEST_LEN: usize = 32;

/// Length of one expanded keystream block.
pub const KEYSTREAM_LEN: usize = 2 * DIGEST_LEN;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HashError {
    #[error("unknown hash function {0:?}")]
    UnknownHash(String),
    #[error("hash input must be exactly {HASH_INPUT_LEN} bytes, got {got}")]
    InputLength { got: usize },
}

/// A registered 32-byte hash function.
///
/// `state_size` is the working-state size in bytes used by the memory
/// accounting formulas; the 107-byte default for BLAKE2s matches the
/// reference embedded implementation this protocol was costed against, and
/// [`crate::session::MemoryParams`] accepts any other figure.
#[derive(Clone, Copy)]
pub struct HashFn {
    name: &'static str,
    digest_size: usize,
    state_size: usize,
    func: fn(&[u8]) -> [u8; DIGEST_LEN],
}

fn blake2s_digest(data: &[u8]) -> [u8; DIGEST_LEN] {
    let mut h = Blake2s256::new();
    h.update(data);
    h.finalize().into()
}

/// Name of the default hash function.
pub const DEFAULT_HASH: &str = "blake2s";

static REGISTRY: &[HashFn] = &[HashFn {
    name: DEFAULT_HASH,
    digest_size: DIGEST_LEN,
    state_size: 107,
    func: blake2s_digest,
}];

impl HashFn {
    /// Looks a hash up by its registry name.
    pub fn by_name(name: &str) -> Result<&'static HashFn, HashError> {
        REGISTRY
            .iter()
            .find(|h| h.name == name)
            .ok_or_else(|| HashError::UnknownHash(name.to_string()))
    }

    /// All registered hash functions.
    pub fn registry() -> &'static [HashFn] {
        REGISTRY
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn digest_size(&self) -> usize {
        self.digest_size
    }

    pub fn state_size(&self) -> usize {
        self.state_size
    }

    /// Raw digest of arbitrary input. The protocol itself only ever hashes
    /// 32-byte inputs (see [`hash32`]); this entry point exists so the
    /// primitive can be checked against its published test vectors.
    pub fn digest(&self, data: &[u8]) -> [u8; DIGEST_LEN] {
        (self.func)(data)
    }
}

impl std::fmt::Debug for HashFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HashFn")
            .field("name", &self.name)
            .field("digest_size", &self.digest_size)
            .field("state_size", &self.state_size)
            .finish()
    }
}

/// The 32-byte hash input: a copy of the secret key followed by the counter.
///
/// Building one copies the key bytes, so the caller's key is never consumed
/// or altered by hashing.
#[derive(Clone)]
pub struct KeyInput {
    bytes: [u8; HASH_INPUT_LEN],
}

impl KeyInput {
    pub fn new(sk: &SecretKey, ctr: Counter) -> Self {
        let mut bytes = [0u8; HASH_INPUT_LEN];
        bytes[..SECRET_KEY_LEN].copy_from_slice(sk.as_bytes());
        // Counter occupies the trailing 5 bytes, big-endian.
        bytes[SECRET_KEY_LEN..].copy_from_slice(&ctr.to_wire());
        KeyInput { bytes }
    }

    pub fn as_bytes(&self) -> &[u8; HASH_INPUT_LEN] {
        &self.bytes
    }
}

impl std::fmt::Debug for KeyInput {
    // The input embeds key material; keep it out of logs.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyInput(32 bytes)")
    }
}

/// One 64-byte keystream block: a digest concatenated with itself.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Keystream64 {
    bytes: [u8; KEYSTREAM_LEN],
}

impl Keystream64 {
    /// Expands a 32-byte digest into the 64-byte keystream.
    pub fn from_digest(digest: [u8; DIGEST_LEN]) -> Self {
        let mut bytes = [0u8; KEYSTREAM_LEN];
        bytes[..DIGEST_LEN].copy_from_slice(&digest);
        bytes[DIGEST_LEN..].copy_from_slice(&digest);
        Keystream64 { bytes }
    }

    pub fn as_bytes(&self) -> &[u8; KEYSTREAM_LEN] {
        &self.bytes
    }

    /// The unduplicated digest half, the compact 32-byte storage form.
    pub fn digest(&self) -> [u8; DIGEST_LEN] {
        self.bytes[..DIGEST_LEN].try_into().unwrap()
    }

    /// XORs this keystream over a 64-byte block. Applying twice restores the
    /// input.
    pub fn apply(&self, block: &[u8; KEYSTREAM_LEN]) -> [u8; KEYSTREAM_LEN] {
        let mut out = *block;
        for (o, k) in out.iter_mut().zip(self.bytes.iter()) {
            *o ^= k;
        }
        out
    }
}

impl std::fmt::Debug for Keystream64 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Keystream64({})", hex::encode(self.bytes))
    }
}

/// Hashes an exactly-32-byte input with the given hash function.
///
/// Pure; rejects any other input length.
pub fn hash32(input: &[u8], h: &HashFn) -> Result<[u8; DIGEST_LEN], HashError> {
    if input.len() != HASH_INPUT_LEN {
        return Err(HashError::InputLength { got: input.len() });
    }
    Ok(h.digest(input))
}

/// Derives the keystream block for one (key, counter) pair.
///
/// Pure: the key is copied into the hash input and never mutated, and equal
/// arguments always produce byte-identical output.
pub fn derive_keystream(sk: &SecretKey, ctr: Counter, h: &HashFn) -> Keystream64 {
    let input = KeyInput::new(sk, ctr);
    Keystream64::from_digest(h.digest(input.as_bytes()))
}

/// Keystream blocks for a contiguous counter range, computed ahead of time.
///
/// Stored compactly as 32 bytes per counter (the unduplicated digest) and
/// expanded to 64 bytes on use, so a device can trade non-volatile storage
/// for near-zero per-message computation.
#[derive(Clone)]
pub struct PrecomputedKeystream {
    start: Counter,
    digests: Vec<[u8; DIGEST_LEN]>,
}

impl std::fmt::Debug for PrecomputedKeystream {
    // Keystream is pad material; show only the extent.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "PrecomputedKeystream(start={}, n={})",
            self.start.value(),
            self.digests.len()
        )
    }
}

impl PrecomputedKeystream {
    pub fn start(&self) -> Counter {
        self.start
    }

    pub fn len(&self) -> usize {
        self.digests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digests.is_empty()
    }

    /// Stored bytes: 32 per precomputed counter.
    pub fn storage_bytes(&self) -> usize {
        self.digests.len() * DIGEST_LEN
    }

    /// Expanded keystream for element `i`, equal to
    /// `derive_keystream(sk, start + i)`.
    pub fn get(&self, i: usize) -> Option<Keystream64> {
        self.digests.get(i).map(|d| Keystream64::from_digest(*d))
    }

    /// Expanded keystream for an absolute counter value, if it is in range.
    pub fn keystream_for(&self, ctr: Counter) -> Option<Keystream64> {
        let offset = ctr.value().checked_sub(self.start.value())?;
        self.get(usize::try_from(offset).ok()?)
    }
}

/// Precomputes `n` consecutive keystream blocks starting at `start_ctr`.
///
/// Fails if the range would run past the 40-bit counter limit.
pub fn precompute_keystream(
    sk: &SecretKey,
    start_ctr: Counter,
    n: usize,
    h: &HashFn,
) -> Result<PrecomputedKeystream, CounterError> {
    if n > 0 {
        let last = start_ctr.value() + (n as u64 - 1);
        if last > Counter::MAX {
            return Err(CounterError::OutOfRange { value: last });
        }
    }
    let digests = (0..n as u64)
        .map(|i| {
            let ctr = Counter::new(start_ctr.value() + i).unwrap();
            derive_keystream(sk, ctr, h).digest()
        })
        .collect();
    Ok(PrecomputedKeystream {
        start: start_ctr,
        digests,
    })
}

/// Formats one known-answer vector line: `sk_hex ctr_hex keystream_hex`.
pub fn format_kat_line(sk: &SecretKey, ctr: Counter, ks: &Keystream64) -> String {
    format!(
        "{} {} {}",
        hex::encode(sk.as_bytes()),
        hex::encode(ctr.to_wire()),
        hex::encode(ks.as_bytes())
    )
}

/// Parses one vector line produced by [`format_kat_line`]. Comment lines
/// beginning with `#` and blank lines are the caller's to skip.
pub fn parse_kat_line(line: &str) -> Result<(SecretKey, Counter, Keystream64), String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 fields, got {}", fields.len()));
    }
    let sk_bytes = hex::decode(fields[0]).map_err(|e| format!("bad sk hex: {e}"))?;
    let sk = SecretKey::from_bytes(&sk_bytes).map_err(|e| e.to_string())?;
    let ctr_bytes: [u8; COUNTER_LEN] = hex::decode(fields[1])
        .map_err(|e| format!("bad ctr hex: {e}"))?
        .try_into()
        .map_err(|_| "ctr must be 5 bytes".to_string())?;
    let ctr = Counter::from_wire(ctr_bytes).map_err(|e| e.to_string())?;
    let ks_bytes: [u8; KEYSTREAM_LEN] = hex::decode(fields[2])
        .map_err(|e| format!("bad keystream hex: {e}"))?
        .try_into()
        .map_err(|_| "keystream must be 64 bytes".to_string())?;
    if ks_bytes[..DIGEST_LEN] != ks_bytes[DIGEST_LEN..] {
        return Err("keystream halves differ".to_string());
    }
    let ks = Keystream64 { bytes: ks_bytes };
    Ok((sk, ctr, ks))
}
