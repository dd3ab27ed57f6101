// SPDX-License-Identifier: Apache-2.0

//! Session keys, the record layer, and disconnect recovery.
//!
//! The session key is `md5(encode(shared_point))` — 16 bytes, exactly an
//! AES key. Records are framed `epoch(4) || seq(8) || ciphertext`, sealed
//! in CTR mode under the nonce `epoch || seq || 0x00000000`; counters never
//! repeat within a key's lifetime, so neither do nonces. Receiving accepts
//! strictly increasing sequence numbers only — the transport is assumed
//! ordered, and a replayed record is rejected outright.
//!
//! Disconnect recovery follows the 30-second / 10-minute rules: within 30
//! seconds the same key resumes the line; past that but within 10 minutes
//! the session demands renegotiation (the old key survives until the new
//! one replaces it, then is wiped); past 10 minutes the key is destroyed
//! and the session is closed for good. Boundaries are inclusive on the
//! lenient side: a gap of exactly 30 s still resumes, exactly 600 s still
//! renegotiates. All timing runs on injected timestamps — nothing here
//! reads a wall clock.

use std::sync::Arc;

use thiserror::Error;

use crate::clock::{Clock, Timestamp};
use crate::curve::{CurveParams, CurvePoint};
use crate::sig::md5;
use crate::symcipher::{open, seal, BlockKey, CtrEnvelope};

/// Resume with the same key at or below this gap (seconds).
pub const RESUME_WINDOW_SECS: u64 = 30;
/// Destroy the session key above this gap (seconds).
pub const DESTRUCTION_DEADLINE_SECS: u64 = 600;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("session is not active")]
    NotActive,
    #[error("record sequence {0} was already accepted")]
    ReplayedSequence(u64),
    #[error("record epoch {got} does not match current epoch {expected}")]
    EpochMismatch { expected: u32, got: u32 },
    #[error("operation not valid in the current session state")]
    BadState,
    #[error("shared point is degenerate; no key can be derived")]
    DegenerateKey,
}

/// Key material plus its epoch and establishment time.
pub struct SessionKey {
    key: BlockKey,
    established_at: Timestamp,
    epoch: u32,
}

impl SessionKey {
    pub fn key(&self) -> &BlockKey {
        &self.key
    }

    pub fn established_at(&self) -> Timestamp {
        self.established_at
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }
}

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionKey")
            .field("epoch", &self.epoch)
            .field("established_at", &self.established_at)
            .finish_non_exhaustive()
    }
}

/// Derives the session key from the shared point: `md5(0x04 || x || y)`.
/// Epoch starts at zero; renegotiation bumps it on install.
pub fn derive(
    params: &CurveParams,
    shared_point: &CurvePoint,
    clock: &dyn Clock,
) -> Result<SessionKey, SessionError> {
    if shared_point.is_infinity() {
        return Err(SessionError::DegenerateKey);
    }
    let digest = md5(&params.encode_point(shared_point));
    Ok(SessionKey {
        key: BlockKey::new(*digest.bytes()),
        established_at: clock.now(),
        epoch: 0,
    })
}

/// One encrypted record. Wire form: `epoch(4 BE) || seq(8 BE) || ciphertext`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordMessage {
    pub epoch: u32,
    pub seq: u64,
    pub ciphertext: Vec<u8>,
}

impl RecordMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.ciphertext.len());
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < 12 {
            return None;
        }
        Some(Self {
            epoch: u32::from_be_bytes(bytes[..4].try_into().unwrap()),
            seq: u64::from_be_bytes(bytes[4..12].try_into().unwrap()),
            ciphertext: bytes[12..].to_vec(),
        })
    }
}

fn record_nonce(epoch: u32, seq: u64) -> [u8; 16] {
    let mut nonce = [0u8; 16];
    nonce[..4].copy_from_slice(&epoch.to_be_bytes());
    nonce[4..12].copy_from_slice(&seq.to_be_bytes());
    nonce
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Active,
    Suspended { since: Timestamp },
    Renegotiating,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResumeDecision {
    ResumeWithSameKey,
    RequireRenegotiation,
    SessionDestroyed,
}

/// One side of an established channel. Externally synchronized: send and
/// recv on the same session must not interleave.
pub struct Session {
    state: SessionState,
    key: Option<SessionKey>,
    send_seq: u64,
    last_accepted: Option<u64>,
    clock: Arc<dyn Clock>,
}

impl Session {
    pub fn new(key: SessionKey, clock: Arc<dyn Clock>) -> Self {
        Self {
            state: SessionState::Active,
            key: Some(key),
            send_seq: 0,
            last_accepted: None,
            clock,
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn epoch(&self) -> Option<u32> {
        self.key.as_ref().map(SessionKey::epoch)
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    fn active_key(&self) -> Result<&SessionKey, SessionError> {
        if self.state != SessionState::Active {
            return Err(SessionError::NotActive);
        }
        self.key.as_ref().ok_or(SessionError::NotActive)
    }

    /// Seals a record under the current key and bumps the send counter.
    pub fn send(&mut self, plaintext: &[u8]) -> Result<RecordMessage, SessionError> {
        let key = self.active_key()?;
        let epoch = key.epoch;
        let seq = self.send_seq;
        let envelope = seal(key.key(), record_nonce(epoch, seq), plaintext);
        self.send_seq += 1;
        Ok(RecordMessage {
            epoch,
            seq,
            ciphertext: envelope.ciphertext,
        })
    }

    /// Opens a record: current epoch only, strictly monotone sequence.
    pub fn recv(&mut self, message: &RecordMessage) -> Result<Vec<u8>, SessionError> {
        let key = self.active_key()?;
        if message.epoch != key.epoch {
            return Err(SessionError::EpochMismatch {
                expected: key.epoch,
                got: message.epoch,
            });
        }
        if let Some(last) = self.last_accepted {
            if message.seq <= last {
                return Err(SessionError::ReplayedSequence(message.seq));
            }
        }
        let plaintext = open(
            key.key(),
            &CtrEnvelope {
                nonce: record_nonce(message.epoch, message.seq),
                ciphertext: message.ciphertext.clone(),
            },
        );
        self.last_accepted = Some(message.seq);
        Ok(plaintext)
    }

    /// Marks the line as dropped at `at`; the session suspends.
    pub fn mark_disconnected(&mut self, at: Timestamp) -> Result<(), SessionError> {
        if self.state != SessionState::Active {
            return Err(SessionError::BadState);
        }
        self.state = SessionState::Suspended { since: at };
        Ok(())
    }

    /// Applies the recovery rules to a reconnect at `at`:
    ///
    /// - gap ≤ 30 s: same key, counters preserved, session active again;
    /// - 30 s < gap ≤ 600 s: renegotiation required; the old key is kept
    ///   until [`Self::install_rekey`] replaces it;
    /// - gap > 600 s: the key is destroyed and the session closes.
    pub fn attempt_resume(&mut self, at: Timestamp) -> Result<ResumeDecision, SessionError> {
        let SessionState::Suspended { since } = self.state else {
            return Err(SessionError::BadState);
        };
        let gap = at.saturating_sub(since);
        if gap <= RESUME_WINDOW_SECS {
            self.state = SessionState::Active;
            Ok(ResumeDecision::ResumeWithSameKey)
        } else if gap <= DESTRUCTION_DEADLINE_SECS {
            self.state = SessionState::Renegotiating;
            Ok(ResumeDecision::RequireRenegotiation)
        } else {
            // Dropping the key zeroizes it.
            self.key = None;
            self.state = SessionState::Closed;
            Ok(ResumeDecision::SessionDestroyed)
        }
    }

    /// Installs a renegotiated key: epoch is bumped, the old key is wiped,
    /// counters restart, and the session goes active.
    pub fn install_rekey(&mut self, new_key: SessionKey) -> Result<(), SessionError> {
        if self.state != SessionState::Renegotiating {
            return Err(SessionError::BadState);
        }
        let old_epoch = self.key.as_ref().map(SessionKey::epoch).unwrap_or(0);
        self.key = Some(SessionKey {
            key: new_key.key,
            established_at: new_key.established_at,
            epoch: old_epoch + 1,
        });
        self.send_seq = 0;
        self.last_accepted = None;
        self.state = SessionState::Active;
        Ok(())
    }

    /// Serialized state snapshot for zeroization audits: state tag,
    /// counters, epoch, and the raw key bytes if any are held.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self.state {
            SessionState::Active => out.push(0x01),
            SessionState::Suspended { since } => {
                out.push(0x02);
                out.extend_from_slice(&since.to_be_bytes());
            }
            SessionState::Renegotiating => out.push(0x03),
            SessionState::Closed => out.push(0x04),
        }
        out.extend_from_slice(&self.send_seq.to_be_bytes());
        out.extend_from_slice(&self.last_accepted.unwrap_or(u64::MAX).to_be_bytes());
        if let Some(key) = &self.key {
            out.extend_from_slice(&key.epoch.to_be_bytes());
            out.extend_from_slice(key.key().bytes());
        }
        out
    }
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("state", &self.state)
            .field("epoch", &self.epoch())
            .field("send_seq", &self.send_seq)
            .field("last_accepted", &self.last_accepted)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::curve::CurveParams;

    const TOY_DOC: &str = "p=61\na=02\nb=0e\ngx=03\ngy=0c\nn=65\nh=01\nname=toy-97\n";

    fn toy() -> CurveParams {
        CurveParams::parse(TOY_DOC).unwrap()
    }

    fn fresh_session(params: &CurveParams) -> (Session, Session) {
        let clock = Arc::new(ManualClock::new(1_000));
        let point = params.scalar_mul(&7u32.into(), params.base_point());
        let alice = Session::new(
            derive(params, &point, clock.as_ref()).unwrap(),
            clock.clone(),
        );
        let bob = Session::new(
            derive(params, &point, clock.as_ref()).unwrap(),
            clock.clone(),
        );
        (alice, bob)
    }

    #[test]
    fn derive_is_deterministic_and_matches_md5_of_encoding() {
        let params = toy();
        let clock = ManualClock::new(0);
        let point = params.scalar_mul(&5u32.into(), params.base_point());
        let key = derive(&params, &point, &clock).unwrap();
        let expected = md5(&params.encode_point(&point));
        assert_eq!(key.key().bytes(), expected.bytes());
        assert_eq!(key.epoch(), 0);
        let again = derive(&params, &point, &clock).unwrap();
        assert_eq!(key.key().bytes(), again.key().bytes());
    }

    #[test]
    fn derive_rejects_infinity() {
        let params = toy();
        let clock = ManualClock::new(0);
        assert_eq!(
            derive(&params, &CurvePoint::Infinity, &clock).err(),
            Some(SessionError::DegenerateKey)
        );
    }

    #[test]
    fn send_recv_round_trip() {
        let params = toy();
        let (mut alice, mut bob) = fresh_session(&params);
        for payload in [&b"hello"[..], b"", &[0u8; 300]] {
            let record = alice.send(payload).unwrap();
            assert_eq!(bob.recv(&record).unwrap(), payload);
        }
        assert_eq!(alice.send_seq, 3);
    }

    #[test]
    fn replayed_record_rejected() {
        let params = toy();
        let (mut alice, mut bob) = fresh_session(&params);
        let record = alice.send(b"once").unwrap();
        assert!(bob.recv(&record).is_ok());
        assert_eq!(
            bob.recv(&record).err(),
            Some(SessionError::ReplayedSequence(0))
        );
        // Older sequence numbers are replays too.
        let newer = alice.send(b"two").unwrap();
        let newest = alice.send(b"three").unwrap();
        assert!(bob.recv(&newest).is_ok());
        assert_eq!(
            bob.recv(&newer).err(),
            Some(SessionError::ReplayedSequence(1))
        );
    }

    #[test]
    fn epoch_mismatch_rejected() {
        let params = toy();
        let (mut alice, mut bob) = fresh_session(&params);
        let mut record = alice.send(b"x").unwrap();
        record.epoch = 1;
        assert!(matches!(
            bob.recv(&record),
            Err(SessionError::EpochMismatch {
                expected: 0,
                got: 1
            })
        ));
    }

    #[test]
    fn timer_boundaries() {
        let params = toy();
        let cases = [
            (29, ResumeDecision::ResumeWithSameKey),
            (30, ResumeDecision::ResumeWithSameKey),
            (31, ResumeDecision::RequireRenegotiation),
            (599, ResumeDecision::RequireRenegotiation),
            (600, ResumeDecision::RequireRenegotiation),
            (601, ResumeDecision::SessionDestroyed),
        ];
        for (gap, expected) in cases {
            let (mut session, _) = fresh_session(&params);
            session.mark_disconnected(5_000).unwrap();
            assert_eq!(
                session.attempt_resume(5_000 + gap).unwrap(),
                expected,
                "gap {gap}"
            );
        }
    }

    #[test]
    fn resume_with_same_key_preserves_counters() {
        let params = toy();
        let (mut alice, mut bob) = fresh_session(&params);
        let first = alice.send(b"pre-drop").unwrap();
        bob.recv(&first).unwrap();
        alice.mark_disconnected(2_000).unwrap();
        assert!(matches!(alice.send(b"nope"), Err(SessionError::NotActive)));
        assert_eq!(
            alice.attempt_resume(2_010).unwrap(),
            ResumeDecision::ResumeWithSameKey
        );
        let second = alice.send(b"post-drop").unwrap();
        assert_eq!(second.seq, 1);
        assert_eq!(bob.recv(&second).unwrap(), b"post-drop");
    }

    #[test]
    fn renegotiation_installs_next_epoch_and_wipes_old_key() {
        let params = toy();
        let clock = Arc::new(ManualClock::new(0));
        let old_point = params.scalar_mul(&9u32.into(), params.base_point());
        let new_point = params.scalar_mul(&13u32.into(), params.base_point());
        let old_key_bytes = *derive(&params, &old_point, clock.as_ref())
            .unwrap()
            .key()
            .bytes();

        let mut session = Session::new(
            derive(&params, &old_point, clock.as_ref()).unwrap(),
            clock.clone(),
        );
        let stale = session.send(b"sealed under epoch 0").unwrap();
        session.mark_disconnected(100).unwrap();
        assert_eq!(
            session.attempt_resume(200).unwrap(),
            ResumeDecision::RequireRenegotiation
        );
        // Old key is retained until the replacement lands.
        assert!(session
            .state_bytes()
            .windows(old_key_bytes.len())
            .any(|w| w == old_key_bytes));

        session
            .install_rekey(derive(&params, &new_point, clock.as_ref()).unwrap())
            .unwrap();
        assert_eq!(session.epoch(), Some(1));
        assert_eq!(session.state(), SessionState::Active);
        // Counters restart and the old epoch's records are dead.
        assert!(matches!(
            session.recv(&stale),
            Err(SessionError::EpochMismatch { .. })
        ));
        let snapshot = session.state_bytes();
        assert!(!snapshot
            .windows(old_key_bytes.len())
            .any(|w| w == old_key_bytes));
    }

    #[test]
    fn destroyed_session_holds_no_key_and_rejects_io() {
        let params = toy();
        let (mut session, _) = fresh_session(&params);
        let key_bytes = *session.key.as_ref().unwrap().key().bytes();
        session.mark_disconnected(1_000).unwrap();
        assert_eq!(
            session.attempt_resume(1_000 + 601).unwrap(),
            ResumeDecision::SessionDestroyed
        );
        assert_eq!(session.state(), SessionState::Closed);
        assert!(matches!(session.send(b"x"), Err(SessionError::NotActive)));
        let dead_record = RecordMessage {
            epoch: 0,
            seq: 0,
            ciphertext: vec![1, 2, 3],
        };
        assert!(matches!(
            session.recv(&dead_record),
            Err(SessionError::NotActive)
        ));
        assert!(!session.state_bytes().windows(16).any(|w| w == key_bytes));
    }

    #[test]
    fn state_machine_rejects_out_of_order_transitions() {
        let params = toy();
        let (mut session, _) = fresh_session(&params);
        assert!(matches!(
            session.attempt_resume(0),
            Err(SessionError::BadState)
        ));
        let clock = ManualClock::new(0);
        let point = params.scalar_mul(&3u32.into(), params.base_point());
        assert!(matches!(
            session.install_rekey(derive(&params, &point, &clock).unwrap()),
            Err(SessionError::BadState)
        ));
        session.mark_disconnected(10).unwrap();
        assert!(matches!(
            session.mark_disconnected(11),
            Err(SessionError::BadState)
        ));
    }

    #[test]
    fn nonce_uniqueness_over_session_lifetime() {
        let params = toy();
        let (mut alice, _) = fresh_session(&params);
        let mut nonces = std::collections::HashSet::new();
        for _ in 0..200 {
            let record = alice.send(b"payload").unwrap();
            assert!(nonces.insert(record_nonce(record.epoch, record.seq)));
        }
        // Rekey and keep going; the epoch keeps nonces distinct.
        alice.mark_disconnected(1_000).unwrap();
        alice.attempt_resume(1_100).unwrap();
        let point = params.scalar_mul(&21u32.into(), params.base_point());
        let clock = ManualClock::new(1_100);
        alice
            .install_rekey(derive(&params, &point, &clock).unwrap())
            .unwrap();
        for _ in 0..200 {
            let record = alice.send(b"payload").unwrap();
            assert!(nonces.insert(record_nonce(record.epoch, record.seq)));
        }
    }

    #[test]
    fn record_wire_round_trip() {
        let record = RecordMessage {
            epoch: 3,
            seq: 77,
            ciphertext: vec![9, 8, 7],
        };
        assert_eq!(RecordMessage::decode(&record.encode()).unwrap(), record);
        assert!(RecordMessage::decode(&[0u8; 11]).is_none());
    }
}
