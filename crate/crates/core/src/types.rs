//! Shared protocol domain types: the pre-shared secret key and the 40-bit
//! message counter.

use thiserror::Error;

/// Length of the pre-shared secret key in bytes.
pub const SECRET_KEY_LEN: usize = 27;

/// Length of the wire serialization of a counter in bytes.
pub const COUNTER_LEN: usize = 5;

/// Errors constructing a [`SecretKey`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("secret key must be exactly {SECRET_KEY_LEN} bytes, got {got}")]
    InvalidLength { got: usize },
}

/// Errors constructing or advancing a [`Counter`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CounterError {
    /// Counters start at 1; zero is never a valid keystream input.
    #[error("counter value 0 is invalid (counters start at 1)")]
    Zero,
    #[error("counter value {value} exceeds the 40-bit maximum {max}", max = Counter::MAX)]
    OutOfRange { value: u64 },
    /// The counter space is used up; continuing would reuse keystream.
    #[error("counter space exhausted, rekey required")]
    Exhausted,
}

/// The 27-byte pre-shared secret `SK`.
///
/// Its first 8 bytes double as the integrity-check constant carried in every
/// plaintext block. The key itself is never serialized onto the wire; it only
/// appears in state files and process memory.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; SECRET_KEY_LEN]);

impl SecretKey {
    /// Builds a key from exactly 27 bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KeyError> {
        let arr: [u8; SECRET_KEY_LEN] = bytes
            .try_into()
            .map_err(|_| KeyError::InvalidLength { got: bytes.len() })?;
        Ok(SecretKey(arr))
    }

    pub fn as_bytes(&self) -> &[u8; SECRET_KEY_LEN] {
        &self.0
    }

    /// First 8 bytes of the key: the integrity-check constant.
    pub fn check_bytes(&self) -> [u8; 8] {
        self.0[..8].try_into().unwrap()
    }
}

impl std::fmt::Debug for SecretKey {
    // Never print key material.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SecretKey(27 bytes)")
    }
}

/// A 40-bit message counter value, always in `1..=Counter::MAX`.
///
/// This is the value concatenated to the key copy when deriving keystream.
/// Session state tracks the *last used* value (0 when fresh) and constructs a
/// `Counter` per operation, so a zero counter can never reach the hash input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Counter(u64);

impl Counter {
    /// Largest representable counter: 2^40 - 1.
    pub const MAX: u64 = (1u64 << 40) - 1;

    pub fn new(value: u64) -> Result<Self, CounterError> {
        if value == 0 {
            return Err(CounterError::Zero);
        }
        if value > Self::MAX {
            return Err(CounterError::OutOfRange { value });
        }
        Ok(Counter(value))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Serializes to exactly 5 bytes, most-significant byte first, so the
    /// initial value 1 renders as `00 00 00 00 01`.
    pub fn to_wire(self) -> [u8; COUNTER_LEN] {
        let be = self.0.to_be_bytes();
        be[3..8].try_into().unwrap()
    }

    pub fn from_wire(bytes: [u8; COUNTER_LEN]) -> Result<Self, CounterError> {
        let mut be = [0u8; 8];
        be[3..8].copy_from_slice(&bytes);
        Counter::new(u64::from_be_bytes(be))
    }

    pub fn next(self) -> Result<Self, CounterError> {
        if self.0 >= Self::MAX {
            return Err(CounterError::Exhausted);
        }
        Ok(Counter(self.0 + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_length_enforced() {
        assert!(SecretKey::from_bytes(&[0u8; 27]).is_ok());
        assert_eq!(
            SecretKey::from_bytes(&[0u8; 26]),
            Err(KeyError::InvalidLength { got: 26 })
        );
        assert_eq!(
            SecretKey::from_bytes(&[0u8; 32]),
            Err(KeyError::InvalidLength { got: 32 })
        );
    }

    #[test]
    fn check_bytes_are_key_prefix() {
        let mut raw = [0u8; 27];
        for (i, b) in raw.iter_mut().enumerate() {
            *b = i as u8;
        }
        let sk = SecretKey::from_bytes(&raw).unwrap();
        assert_eq!(sk.check_bytes(), [0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn debug_never_shows_key_bytes() {
        let sk = SecretKey::from_bytes(&[0xAB; 27]).unwrap();
        let shown = format!("{sk:?}");
        assert!(!shown.contains("ab"));
        assert!(!shown.contains("AB"));
    }

    #[test]
    fn counter_bounds() {
        assert_eq!(Counter::new(0), Err(CounterError::Zero));
        assert!(Counter::new(1).is_ok());
        assert!(Counter::new(Counter::MAX).is_ok());
        assert_eq!(
            Counter::new(Counter::MAX + 1),
            Err(CounterError::OutOfRange {
                value: Counter::MAX + 1
            })
        );
    }

    #[test]
    fn counter_wire_is_big_endian() {
        assert_eq!(Counter::new(1).unwrap().to_wire(), [0, 0, 0, 0, 1]);
        assert_eq!(
            Counter::new(0x0102030405).unwrap().to_wire(),
            [1, 2, 3, 4, 5]
        );
        assert_eq!(
            Counter::new(Counter::MAX).unwrap().to_wire(),
            [0xFF, 0xFF, 0xFF, 0xFF, 0xFF]
        );
    }

    #[test]
    fn counter_wire_roundtrip() {
        for v in [1u64, 2, 255, 256, 65536, Counter::MAX] {
            let c = Counter::new(v).unwrap();
            assert_eq!(Counter::from_wire(c.to_wire()).unwrap(), c);
        }
    }

    #[test]
    fn counter_exhaustion() {
        let last = Counter::new(Counter::MAX).unwrap();
        assert_eq!(last.next(), Err(CounterError::Exhausted));
        let ok = Counter::new(Counter::MAX - 1).unwrap();
        assert_eq!(ok.next().unwrap().value(), Counter::MAX);
    }
}
