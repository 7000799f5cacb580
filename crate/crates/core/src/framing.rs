//! Fixed 64-byte message blocks and the 72-byte fog-addressing tuple.
//!
//! Block layout, frozen: 55 bytes payload-plus-padding, 1 length byte,
//! 8 check bytes equal to the first 8 bytes of the secret key. Tuples
//! prepend an 8-byte device identifier to the ciphertext.

use thiserror::Error;

use crate::types::SecretKey;

/// Serialized size of a plaintext or ciphertext block.
pub const BLOCK_LEN: usize = 64;

/// Largest payload one block carries.
pub const MAX_PAYLOAD_LEN: usize = 55;

/// Size of the integrity-check field.
pub const CHECK_LEN: usize = 8;

/// Serialized size of a device identifier.
pub const DEVICE_ID_LEN: usize = 8;

/// Serialized size of a tuple: identifier followed by ciphertext.
pub const TUPLE_LEN: usize = DEVICE_ID_LEN + BLOCK_LEN;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FramingError {
    #[error("payload of {len} bytes exceeds the {MAX_PAYLOAD_LEN}-byte block capacity")]
    PayloadTooLong { len: usize },
    #[error("tuple must be exactly {TUPLE_LEN} bytes, got {len}")]
    BadTupleLength { len: usize },
}

/// Opaque integrity rejection.
///
/// Deliberately carries no detail: corruption, forgery, and counter mismatch
/// are indistinguishable to the caller, so rejection behavior cannot be used
/// as a decryption oracle.
#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
#[error("integrity reject")]
pub struct Reject;

/// An 8-byte device identifier, rendered big-endian on the wire.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId([u8; DEVICE_ID_LEN]);

impl DeviceId {
    pub fn from_bytes(bytes: [u8; DEVICE_ID_LEN]) -> Self {
        DeviceId(bytes)
    }

    pub fn from_u64(value: u64) -> Self {
        DeviceId(value.to_be_bytes())
    }

    pub fn as_bytes(&self) -> &[u8; DEVICE_ID_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::str::FromStr for DeviceId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|e| format!("bad device id hex: {e}"))?;
        let arr: [u8; DEVICE_ID_LEN] = bytes
            .try_into()
            .map_err(|_| format!("device id must be {DEVICE_ID_LEN} bytes"))?;
        Ok(DeviceId(arr))
    }
}

impl std::fmt::Display for DeviceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl std::fmt::Debug for DeviceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DeviceId({})", self.to_hex())
    }
}

/// A payload recovered from a block: up to 55 bytes, no heap allocation.
#[derive(Clone, Copy)]
pub struct Payload {
    buf: [u8; MAX_PAYLOAD_LEN],
    len: u8,
}

impl Payload {
    pub fn as_slice(&self) -> &[u8] {
        &self.buf[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.as_slice().to_vec()
    }
}

impl PartialEq for Payload {
    fn eq(&self, other: &Self) -> bool {
        self.as_slice() == other.as_slice()
    }
}

impl Eq for Payload {}

impl AsRef<[u8]> for Payload {
    fn as_ref(&self) -> &[u8] {
        self.as_slice()
    }
}

impl std::fmt::Debug for Payload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Payload({})", hex::encode(self.as_slice()))
    }
}

/// A framed 64-byte plaintext block.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PlainBlock([u8; BLOCK_LEN]);

impl PlainBlock {
    pub fn from_bytes(bytes: [u8; BLOCK_LEN]) -> Self {
        PlainBlock(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; BLOCK_LEN] {
        &self.0
    }

    pub fn length_byte(&self) -> u8 {
        self.0[MAX_PAYLOAD_LEN]
    }

    pub fn check_field(&self) -> &[u8] {
        &self.0[MAX_PAYLOAD_LEN + 1..]
    }
}

impl std::fmt::Debug for PlainBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PlainBlock({})", hex::encode(self.0))
    }
}

/// A 64-byte ciphertext block.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct CipherBlock([u8; BLOCK_LEN]);

impl CipherBlock {
    pub fn from_bytes(bytes: [u8; BLOCK_LEN]) -> Self {
        CipherBlock(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; BLOCK_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for CipherBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CipherBlock({})", hex::encode(self.0))
    }
}

/// Frames a payload of up to 55 bytes: payload, zero padding, length byte,
/// then the key's first 8 bytes as the integrity check.
pub fn frame_message(payload: &[u8], sk: &SecretKey) -> Result<PlainBlock, FramingError> {
    if payload.len() > MAX_PAYLOAD_LEN {
        return Err(FramingError::PayloadTooLong { len: payload.len() });
    }
    let mut block = [0u8; BLOCK_LEN];
    block[..payload.len()].copy_from_slice(payload);
    block[MAX_PAYLOAD_LEN] = payload.len() as u8;
    block[MAX_PAYLOAD_LEN + 1..].copy_from_slice(&sk.check_bytes());
    Ok(PlainBlock(block))
}

/// Recovers the payload from a block, verifying the integrity check.
///
/// Accepts iff the check bytes equal the key's first 8 bytes and the length
/// byte is at most 55; a length above 55 is corruption of byte 55 and takes
/// the same rejection path as a check mismatch.
pub fn deframe_message(block: &PlainBlock, sk: &SecretKey) -> Result<Payload, Reject> {
    if block.check_field() != sk.check_bytes() {
        return Err(Reject);
    }
    let len = block.length_byte() as usize;
    if len > MAX_PAYLOAD_LEN {
        return Err(Reject);
    }
    let mut buf = [0u8; MAX_PAYLOAD_LEN];
    buf[..len].copy_from_slice(&block.as_bytes()[..len]);
    Ok(Payload {
        buf,
        len: len as u8,
    })
}

/// Concatenates identifier and ciphertext into the 72-byte wire tuple.
pub fn encode_tuple(id: DeviceId, enc: &CipherBlock) -> [u8; TUPLE_LEN] {
    let mut wire = [0u8; TUPLE_LEN];
    wire[..DEVICE_ID_LEN].copy_from_slice(id.as_bytes());
    wire[DEVICE_ID_LEN..].copy_from_slice(enc.as_bytes());
    wire
}

/// Splits a wire tuple at byte 8. Succeeds iff the input is exactly 72 bytes.
pub fn decode_tuple(wire: &[u8]) -> Result<(DeviceId, CipherBlock), FramingError> {
    if wire.len() != TUPLE_LEN {
        return Err(FramingError::BadTupleLength { len: wire.len() });
    }
    let id = DeviceId(wire[..DEVICE_ID_LEN].try_into().unwrap());
    let enc = CipherBlock(wire[DEVICE_ID_LEN..].try_into().unwrap());
    Ok((id, enc))
}
