//! Fog-node side session multiplexing.
//!
//! A registry keeps one session per device identifier, dispatches incoming
//! wire tuples to the right session, tracks per-device accept/reject
//! statistics against a monotonic event clock for staleness detection, and
//! persists the durable fields to a line-oriented state file.
//!
//! Tuples for distinct devices may be handled concurrently if the caller
//! provides the locking; operations on the same device must be serialized,
//! and saving needs exclusive access.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::framing::{decode_tuple, encode_tuple, DeviceId, FramingError, Payload, Reject, TUPLE_LEN};
use crate::hashcore::DEFAULT_HASH;
use crate::session::{CounterMode, Session, SessionError};
use crate::types::SecretKey;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("device {0} is already registered")]
    DuplicateDevice(DeviceId),
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error(transparent)]
    Reject(#[from] Reject),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Errors loading a persisted registry.
#[derive(Debug, Error)]
pub enum StateError {
    #[error("state i/o: {0}")]
    Io(#[from] io::Error),
    #[error("state file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A successfully dispatched tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub id: DeviceId,
    pub payload: Payload,
    /// Counter values skipped to resynchronize; 0 in the steady state.
    pub skipped: u64,
}

/// Per-device registry entry.
#[derive(Debug, Clone)]
pub struct DeviceRecord {
    id: DeviceId,
    session: Session,
    // Event-clock reading at registration or at the last accepted message.
    last_accepted: u64,
    accepted_count: u64,
    rejected_count: u64,
}

impl DeviceRecord {
    pub fn id(&self) -> DeviceId {
        self.id
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn last_accepted(&self) -> u64 {
        self.last_accepted
    }

    pub fn accepted_count(&self) -> u64 {
        self.accepted_count
    }

    pub fn rejected_count(&self) -> u64 {
        self.rejected_count
    }
}

/// Fog-side table of device sessions.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    devices: BTreeMap<DeviceId, DeviceRecord>,
    event_clock: u64,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Number of processed messages; advances on every [`Registry::handle_tuple`].
    pub fn event_clock(&self) -> u64 {
        self.event_clock
    }

    pub fn device(&self, id: DeviceId) -> Option<&DeviceRecord> {
        self.devices.get(&id)
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceRecord> {
        self.devices.values()
    }

    /// Installs a fresh session for a new device.
    pub fn register_device(
        &mut self,
        id: DeviceId,
        sk: SecretKey,
        mode: CounterMode,
        resync_window: u32,
    ) -> Result<&DeviceRecord, RegistryError> {
        let session = Session::new(sk, mode, resync_window, DEFAULT_HASH)?;
        self.install(id, session)
    }

    fn install(&mut self, id: DeviceId, session: Session) -> Result<&DeviceRecord, RegistryError> {
        if self.devices.contains_key(&id) {
            return Err(RegistryError::DuplicateDevice(id));
        }
        self.devices.insert(
            id,
            DeviceRecord {
                id,
                session,
                last_accepted: self.event_clock,
                accepted_count: 0,
                rejected_count: 0,
            },
        );
        Ok(self.devices.get(&id).unwrap())
    }

    /// Removes a device; returns whether it was present. Idempotent.
    pub fn remove_device(&mut self, id: DeviceId) -> bool {
        self.devices.remove(&id).is_some()
    }

    /// Overrides one device's resync window.
    pub fn set_resync_window(&mut self, id: DeviceId, window: u32) -> Result<(), RegistryError> {
        let record = self
            .devices
            .get_mut(&id)
            .ok_or(RegistryError::UnknownDevice(id))?;
        record.session.set_resync_window(window)?;
        Ok(())
    }

    /// Decodes and dispatches one wire tuple.
    ///
    /// The event clock advances for every call, whatever the outcome. A
    /// framing error or unknown identifier touches no session; an integrity
    /// reject bumps only the addressed device's reject count and leaves its
    /// counters exactly as they were.
    pub fn handle_tuple(&mut self, wire: &[u8]) -> Result<Delivery, RegistryError> {
        self.event_clock += 1;
        let (id, enc) = decode_tuple(wire)?;
        let record = self
            .devices
            .get_mut(&id)
            .ok_or(RegistryError::UnknownDevice(id))?;
        match record.session.decrypt_with_resync(&enc) {
            Ok((payload, skipped)) => {
                record.last_accepted = self.event_clock;
                record.accepted_count += 1;
                Ok(Delivery {
                    id,
                    payload,
                    skipped,
                })
            }
            Err(reject) => {
                record.rejected_count += 1;
                Err(RegistryError::Reject(reject))
            }
        }
    }

    /// Encrypts a payload for one registered device, returning the wire tuple.
    pub fn encrypt_for_device(
        &mut self,
        id: DeviceId,
        payload: &[u8],
    ) -> Result<[u8; TUPLE_LEN], RegistryError> {
        let record = self
            .devices
            .get_mut(&id)
            .ok_or(RegistryError::UnknownDevice(id))?;
        let enc = record.session.encrypt_next(payload)?;
        Ok(encode_tuple(id, &enc))
    }

    /// Devices that have not had a message accepted within `threshold`
    /// processed events: the suspected targets of modification floods or
    /// deletion attacks.
    pub fn stale_devices(&self, threshold: u64) -> Vec<DeviceId> {
        self.devices
            .values()
            .filter(|r| self.event_clock.saturating_sub(r.last_accepted) > threshold)
            .map(|r| r.id)
            .collect()
    }

    /// Writes the persistent fields as one line per device:
    /// `id_hex sk_hex mode window e_ctr d_ctr`.
    ///
    /// Statistics and the event clock are volatile by design and are not
    /// written.
    pub fn save_state(&self, sink: &mut impl Write) -> io::Result<()> {
        writeln!(sink, "# fogstream registry state")?;
        writeln!(sink, "# id_hex sk_hex mode window e_ctr d_ctr")?;
        for record in self.devices.values() {
            let s = &record.session;
            let (e, d) = s.peek_counters();
            writeln!(
                sink,
                "{} {} {} {} {} {}",
                record.id.to_hex(),
                hex::encode(s.secret_key().as_bytes()),
                s.mode(),
                s.resync_window(),
                e,
                d
            )?;
        }
        Ok(())
    }

    /// Reads a registry back from [`Registry::save_state`] output.
    ///
    /// `#` comment lines and blank lines are skipped. Counters and
    /// configuration round-trip exactly; statistics restart at zero.
    pub fn load_state(source: impl BufRead) -> Result<Registry, StateError> {
        let mut registry = Registry::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let record = parse_state_line(trimmed).map_err(|reason| StateError::Parse {
                line: line_no,
                reason,
            })?;
            registry
                .install(record.0, record.1)
                .map_err(|e| StateError::Parse {
                    line: line_no,
                    reason: e.to_string(),
                })?;
        }
        Ok(registry)
    }
}

fn parse_state_line(line: &str) -> Result<(DeviceId, Session), String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 fields, got {}", fields.len()));
    }
    let id: DeviceId = fields[0].parse()?;
    let sk_bytes = hex::decode(fields[1]).map_err(|e| format!("bad sk hex: {e}"))?;
    let sk = SecretKey::from_bytes(&sk_bytes).map_err(|e| e.to_string())?;
    let mode: CounterMode = fields[2].parse()?;
    let window: u32 = fields[3]
        .parse()
        .map_err(|e| format!("bad window: {e}"))?;
    let e_ctr: u64 = fields[4].parse().map_err(|e| format!("bad e_ctr: {e}"))?;
    let d_ctr: u64 = fields[5].parse().map_err(|e| format!("bad d_ctr: {e}"))?;
    let session =
        Session::resume(sk, mode, window, DEFAULT_HASH, e_ctr, d_ctr).map_err(|e| e.to_string())?;
    Ok((id, session))
}
