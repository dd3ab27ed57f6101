// SPDX-License-Identifier: Apache-2.0

//! The two-message handshake state machines.
//!
//! Both protocols exchange ephemeral DH shares sealed under the pre-shared
//! group key `K` and meet at the same shared point:
//!
//! - **Protocol A**: each side sends `seal(K, encode(x G))` for a fresh
//!   ephemeral scalar `x`. Opening under the wrong key yields bytes that
//!   almost never decode to a curve point, which is the man-in-the-middle
//!   tripwire.
//! - **Protocol B**: the payload additionally carries an ECDSA signature
//!   over `md5(encode(share))`, and a cleartext sender claim rides in the
//!   framing so the receiver knows which directory entry must verify it.
//!
//! The exchange is symmetric: both roles emit a share immediately and
//! absorb the peer's share whenever it arrives, so message crossing is
//! harmless. After a successful absorb the ephemeral scalar is destroyed in
//! place — established (and aborted) states hold only a zeroed scalar, and
//! no recorded transcript plus long-term key can rebuild the session key.
//! There are no timestamps; replay of a stale share produces a session the
//! replayer cannot read, which scenario S3 exercises.
//!
//! Wire layout (integers big-endian):
//!
//! ```text
//! version(1)=0x01  msg_type(1)  session_id(8)
//! [claim_len(1) claim  — msg_type 0x02 only]
//! nonce(16)  payload_len(2)  payload
//! ```

use thiserror::Error;

use crate::curve::{CurveError, CurveParams, CurvePoint, Scalar};
use crate::drbg::{DrbgError, DrbgState};
use crate::keystore::{GroupDirectory, LongTermKey};
use crate::sig::{ec_sign, ec_verify, md5, EcSignature, KeyPair, SigError};
use crate::symcipher::{open, seal, BlockKey, CtrEnvelope};

pub const WIRE_VERSION: u8 = 0x01;
/// Protocol A share: sealed point only.
pub const MSG_TYPE_SHARE: u8 = 0x01;
/// Protocol B share: cleartext claim, sealed point and signature.
pub const MSG_TYPE_SIGNED_SHARE: u8 = 0x02;

#[derive(Debug, Error)]
pub enum HandshakeError {
    #[error("operation not valid in the current phase")]
    BadPhase,
    #[error("payload did not decrypt to a well-formed share")]
    DecryptGarbage,
    #[error("decrypted share is not on the curve")]
    NotOnCurve,
    #[error("share signature did not verify against the claimed identity")]
    SignatureInvalid,
    #[error("claimed sender `{0}` is not in the directory")]
    UnknownPeer(String),
    #[error("peer share is degenerate (identity or small-order point)")]
    DegenerateShare,
    #[error("protocol B requires an identity key pair")]
    MissingIdentity,
    #[error("protocol B requires a group directory")]
    MissingDirectory,
    #[error("malformed handshake message: {0}")]
    Malformed(String),
    #[error(transparent)]
    Rng(#[from] DrbgError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

impl From<SigError> for HandshakeError {
    fn from(err: SigError) -> Self {
        match err {
            SigError::Rng(e) => HandshakeError::Rng(e),
            SigError::Curve(e) => HandshakeError::Curve(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Start,
    SentShare,
    Established,
    Aborted,
}

/// One parsed handshake message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandshakeMessage {
    pub version: u8,
    pub msg_type: u8,
    pub session_id: [u8; 8],
    /// Cleartext sender claim; present exactly for signed shares.
    pub sender_claim: Option<String>,
    pub nonce: [u8; 16],
    pub payload: Vec<u8>,
}

impl HandshakeMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(28 + self.payload.len());
        out.push(self.version);
        out.push(self.msg_type);
        out.extend_from_slice(&self.session_id);
        if let Some(claim) = &self.sender_claim {
            let claim = claim.as_bytes();
            assert!(
                claim.len() <= u8::MAX as usize,
                "claim longer than 255 bytes"
            );
            out.push(claim.len() as u8);
            out.extend_from_slice(claim);
        }
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, HandshakeError> {
        let mut cursor = 0usize;
        let mut take = |len: usize| -> Result<&[u8], HandshakeError> {
            let slice = bytes
                .get(cursor..cursor + len)
                .ok_or_else(|| HandshakeError::Malformed("truncated message".into()))?;
            cursor += len;
            Ok(slice)
        };

        let version = take(1)?[0];
        if version != WIRE_VERSION {
            return Err(HandshakeError::Malformed(format!(
                "unsupported version {version:#04x}"
            )));
        }
        let msg_type = take(1)?[0];
        let session_id: [u8; 8] = take(8)?.try_into().unwrap();
        let sender_claim = match msg_type {
            MSG_TYPE_SHARE => None,
            MSG_TYPE_SIGNED_SHARE => {
                let claim_len = take(1)?[0] as usize;
                let claim = String::from_utf8(take(claim_len)?.to_vec())
                    .map_err(|_| HandshakeError::Malformed("claim is not UTF-8".into()))?;
                Some(claim)
            }
            other => {
                return Err(HandshakeError::Malformed(format!(
                    "unknown message type {other:#04x}"
                )))
            }
        };
        let nonce: [u8; 16] = take(16)?.try_into().unwrap();
        let payload_len = u16::from_be_bytes(take(2)?.try_into().unwrap()) as usize;
        let payload = take(payload_len)?.to_vec();
        if cursor != bytes.len() {
            return Err(HandshakeError::Malformed("trailing bytes".into()));
        }
        Ok(Self {
            version,
            msg_type,
            session_id,
            sender_claim,
            nonce,
            payload,
        })
    }
}

/// The raw shared point both sides arrive at; feed it to
/// [`crate::session::derive`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionKeyMaterial {
    point: CurvePoint,
}

impl SessionKeyMaterial {
    pub fn point(&self) -> &CurvePoint {
        &self.point
    }

    pub fn into_point(self) -> CurvePoint {
        self.point
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranscriptDirection {
    Sent,
    Received,
}

/// A message as it crossed the wire, for forensics and scenario assertions.
#[derive(Debug, Clone)]
pub struct TranscriptEntry {
    pub direction: TranscriptDirection,
    pub bytes: Vec<u8>,
}

/// Per-role handshake state. Phase transitions are monotone; there is no
/// re-entry into an earlier phase.
pub struct Handshake {
    role: Role,
    protocol: Protocol,
    phase: Phase,
    params: CurveParams,
    psk: BlockKey,
    ephemeral: Scalar,
    own_share: CurvePoint,
    peer_share: Option<CurvePoint>,
    session_id: [u8; 8],
    directory: Option<GroupDirectory>,
    transcript: Vec<TranscriptEntry>,
}

impl Handshake {
    /// Draws the ephemeral scalar, seals the share (signing it first under
    /// Protocol B), and returns the state in `SentShare` together with the
    /// outgoing message. Both roles emit a message; the initiator merely
    /// sends first.
    ///
    /// DRBG draw order is fixed — ephemeral scalar, session id, nonce, then
    /// the signature nonce for Protocol B — so a seeded run is reproducible
    /// byte for byte.
    pub fn start(
        role: Role,
        protocol: Protocol,
        psk: &LongTermKey,
        params: &CurveParams,
        rng: &mut DrbgState,
        identity: Option<&KeyPair>,
        directory: Option<&GroupDirectory>,
    ) -> Result<(Self, HandshakeMessage), HandshakeError> {
        let (identity, directory) = match protocol {
            Protocol::A => (None, None),
            Protocol::B => (
                Some(identity.ok_or(HandshakeError::MissingIdentity)?),
                Some(directory.ok_or(HandshakeError::MissingDirectory)?),
            ),
        };

        let ephemeral = rng.gen_scalar(params)?;
        let own_share = params
            .scalar_mul_secret(&ephemeral, params.base_point())
            .expect("freshly drawn scalar is live");
        let session_id: [u8; 8] = rng.next_bytes(8)?.try_into().unwrap();
        let nonce: [u8; 16] = rng.next_bytes(16)?.try_into().unwrap();

        let share_bytes = params.encode_point(&own_share);
        let (msg_type, sender_claim, plaintext) = match protocol {
            Protocol::A => (MSG_TYPE_SHARE, None, share_bytes),
            Protocol::B => {
                let identity = identity.expect("checked above");
                let signature = ec_sign(params, identity, &md5(&share_bytes), rng)?;
                let mut plaintext = share_bytes;
                plaintext.extend_from_slice(&signature.to_bytes(params));
                (
                    MSG_TYPE_SIGNED_SHARE,
                    Some(identity.owner().to_string()),
                    plaintext,
                )
            }
        };

        let payload = seal(psk.key(), nonce, &plaintext).ciphertext;
        let message = HandshakeMessage {
            version: WIRE_VERSION,
            msg_type,
            session_id,
            sender_claim,
            nonce,
            payload,
        };

        let mut state = Self {
            role,
            protocol,
            phase: Phase::Start,
            params: params.clone(),
            psk: psk.key().clone(),
            ephemeral,
            own_share,
            peer_share: None,
            session_id,
            directory: directory.cloned(),
            transcript: Vec::new(),
        };
        state.transcript.push(TranscriptEntry {
            direction: TranscriptDirection::Sent,
            bytes: message.encode(),
        });
        state.phase = Phase::SentShare;
        Ok((state, message))
    }

    /// Consumes the peer's message: opens the payload under the PSK,
    /// insists the plaintext decodes to an on-curve share (verifying the
    /// signature against the claimed directory entry under Protocol B),
    /// computes the shared point, destroys the ephemeral, and moves to
    /// `Established`. Any rejection destroys the ephemeral too and moves to
    /// `Aborted`.
    pub fn absorb(
        &mut self,
        message: &HandshakeMessage,
    ) -> Result<SessionKeyMaterial, HandshakeError> {
        if self.phase != Phase::SentShare {
            return Err(HandshakeError::BadPhase);
        }
        self.transcript.push(TranscriptEntry {
            direction: TranscriptDirection::Received,
            bytes: message.encode(),
        });
        match self.absorb_inner(message) {
            Ok(material) => {
                self.phase = Phase::Established;
                Ok(material)
            }
            Err(err) => {
                self.ephemeral.destroy();
                self.phase = Phase::Aborted;
                Err(err)
            }
        }
    }

    fn absorb_inner(
        &mut self,
        message: &HandshakeMessage,
    ) -> Result<SessionKeyMaterial, HandshakeError> {
        let expected_type = match self.protocol {
            Protocol::A => MSG_TYPE_SHARE,
            Protocol::B => MSG_TYPE_SIGNED_SHARE,
        };
        if message.msg_type != expected_type {
            return Err(HandshakeError::Malformed(format!(
                "message type {:#04x} does not match the configured protocol",
                message.msg_type
            )));
        }

        let plaintext = open(
            &self.psk,
            &CtrEnvelope {
                nonce: message.nonce,
                ciphertext: message.payload.clone(),
            },
        );

        let share = match self.protocol {
            Protocol::A => self.decode_share(&plaintext)?,
            Protocol::B => {
                let point_len = match plaintext.first() {
                    Some(0x00) => 1,
                    Some(0x04) => self.params.point_encoding_len(),
                    _ => return Err(HandshakeError::DecryptGarbage),
                };
                if plaintext.len() < point_len {
                    return Err(HandshakeError::DecryptGarbage);
                }
                let (share_bytes, sig_bytes) = plaintext.split_at(point_len);
                let share = self.decode_share(share_bytes)?;
                let signature = EcSignature::from_bytes(&self.params, sig_bytes)
                    .map_err(|_| HandshakeError::DecryptGarbage)?;
                let claim = message
                    .sender_claim
                    .as_deref()
                    .ok_or_else(|| HandshakeError::Malformed("missing sender claim".into()))?;
                let directory = self
                    .directory
                    .as_ref()
                    .ok_or(HandshakeError::MissingDirectory)?;
                let public = directory
                    .lookup(claim)
                    .map_err(|_| HandshakeError::UnknownPeer(claim.to_string()))?;
                if !ec_verify(&self.params, public, &md5(share_bytes), &signature) {
                    return Err(HandshakeError::SignatureInvalid);
                }
                share
            }
        };

        if share.is_infinity() {
            return Err(HandshakeError::DegenerateShare);
        }
        if self.params.cofactor() > 1
            && !self
                .params
                .scalar_mul(self.params.order(), &share)
                .is_infinity()
        {
            // Outside the prime-order subgroup.
            return Err(HandshakeError::DegenerateShare);
        }

        let shared_point = self.params.scalar_mul_secret(&self.ephemeral, &share)?;
        if shared_point.is_infinity() {
            return Err(HandshakeError::DegenerateShare);
        }

        // The forward-secrecy step: the secret number dies here.
        self.ephemeral.destroy();
        self.peer_share = Some(share);
        Ok(SessionKeyMaterial {
            point: shared_point,
        })
    }

    fn decode_share(&self, bytes: &[u8]) -> Result<CurvePoint, HandshakeError> {
        self.params.decode_point(bytes).map_err(|err| match err {
            CurveError::NotOnCurve => HandshakeError::NotOnCurve,
            _ => HandshakeError::DecryptGarbage,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn session_id(&self) -> [u8; 8] {
        self.session_id
    }

    pub fn own_share(&self) -> &CurvePoint {
        &self.own_share
    }

    pub fn peer_share(&self) -> Option<&CurvePoint> {
        self.peer_share.as_ref()
    }

    /// The ephemeral scalar, exposed for destruction audits: reading its
    /// value after establishment or abort fails with `DestroyedScalar`.
    pub fn audit_ephemeral(&self) -> &Scalar {
        &self.ephemeral
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// Canonical transcript: `direction(1) || len(4 BE) || message` per
    /// entry, in order.
    pub fn transcript_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for entry in &self.transcript {
            out.push(match entry.direction {
                TranscriptDirection::Sent => 0x00,
                TranscriptDirection::Received => 0x01,
            });
            out.extend_from_slice(&(entry.bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&entry.bytes);
        }
        out
    }
}

impl std::fmt::Debug for Handshake {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Handshake")
            .field("role", &self.role)
            .field("protocol", &self.protocol)
            .field("phase", &self.phase)
            .field("session_id", &hex::encode(self.session_id))
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drbg::seed_from_u64;
    use crate::keystore::{gen_identity, generate_ltk, GroupDirectory};

    const TOY_DOC: &str = "p=61\na=02\nb=0e\ngx=03\ngy=0c\nn=65\nh=01\nname=toy-97\n";

    fn toy() -> CurveParams {
        CurveParams::parse(TOY_DOC).unwrap()
    }

    fn psk(seed: u64) -> LongTermKey {
        let mut rng = DrbgState::seed(&seed_from_u64(seed)).unwrap();
        generate_ltk(&mut rng, "test", 0).unwrap()
    }

    fn run_protocol_a(
        params: &CurveParams,
        psk: &LongTermKey,
        alice_seed: u64,
        bob_seed: u64,
    ) -> (Handshake, Handshake, SessionKeyMaterial, SessionKeyMaterial) {
        let mut alice_rng = DrbgState::seed(&seed_from_u64(alice_seed)).unwrap();
        let mut bob_rng = DrbgState::seed(&seed_from_u64(bob_seed)).unwrap();
        let (mut alice, msg_a) = Handshake::start(
            Role::Initiator,
            Protocol::A,
            psk,
            params,
            &mut alice_rng,
            None,
            None,
        )
        .unwrap();
        let (mut bob, msg_b) = Handshake::start(
            Role::Responder,
            Protocol::A,
            psk,
            params,
            &mut bob_rng,
            None,
            None,
        )
        .unwrap();
        let bob_key = bob.absorb(&msg_a).unwrap();
        let alice_key = alice.absorb(&msg_b).unwrap();
        (alice, bob, alice_key, bob_key)
    }

    #[test]
    fn honest_protocol_a_agrees() {
        let params = toy();
        let psk = psk(100);
        let (alice, bob, alice_key, bob_key) = run_protocol_a(&params, &psk, 1, 2);
        assert_eq!(alice_key, bob_key);
        assert_eq!(alice.phase(), Phase::Established);
        assert_eq!(bob.phase(), Phase::Established);
        assert!(!alice_key.point().is_infinity());
    }

    #[test]
    fn ephemerals_are_destroyed_after_establishment() {
        let params = toy();
        let psk = psk(101);
        let (alice, bob, _, _) = run_protocol_a(&params, &psk, 3, 4);
        for side in [&alice, &bob] {
            assert!(side.audit_ephemeral().is_destroyed());
            assert!(matches!(
                side.audit_ephemeral().value(),
                Err(CurveError::DestroyedScalar)
            ));
            assert!(side.audit_ephemeral().state_bytes().iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn start_message_opens_to_a_valid_point() {
        let params = toy();
        let psk = psk(102);
        let mut rng = DrbgState::seed(&seed_from_u64(5)).unwrap();
        let (state, msg) = Handshake::start(
            Role::Initiator,
            Protocol::A,
            &psk,
            &params,
            &mut rng,
            None,
            None,
        )
        .unwrap();
        let plaintext = open(
            psk.key(),
            &CtrEnvelope {
                nonce: msg.nonce,
                ciphertext: msg.payload.clone(),
            },
        );
        let point = params.decode_point(&plaintext).unwrap();
        assert_eq!(&point, state.own_share());
    }

    #[test]
    fn tampered_ciphertext_aborts() {
        let params = toy();
        let psk = psk(103);
        let mut alice_rng = DrbgState::seed(&seed_from_u64(6)).unwrap();
        let mut bob_rng = DrbgState::seed(&seed_from_u64(7)).unwrap();
        let (_, mut msg) = Handshake::start(
            Role::Initiator,
            Protocol::A,
            &psk,
            &params,
            &mut alice_rng,
            None,
            None,
        )
        .unwrap();
        let (mut bob, _) = Handshake::start(
            Role::Responder,
            Protocol::A,
            &psk,
            &params,
            &mut bob_rng,
            None,
            None,
        )
        .unwrap();
        msg.payload[1] ^= 0x40;
        let err = bob.absorb(&msg).unwrap_err();
        assert!(
            matches!(
                err,
                HandshakeError::NotOnCurve | HandshakeError::DecryptGarbage
            ),
            "{err:?}"
        );
        assert_eq!(bob.phase(), Phase::Aborted);
        assert!(bob.audit_ephemeral().is_destroyed());
    }

    #[test]
    fn absorb_twice_is_bad_phase() {
        let params = toy();
        let psk = psk(104);
        let (mut alice, _, _, _) = run_protocol_a(&params, &psk, 8, 9);
        let mut rng = DrbgState::seed(&seed_from_u64(10)).unwrap();
        let (_, msg) = Handshake::start(
            Role::Responder,
            Protocol::A,
            &psk,
            &params,
            &mut rng,
            None,
            None,
        )
        .unwrap();
        assert!(matches!(alice.absorb(&msg), Err(HandshakeError::BadPhase)));
        // Phase unchanged by a caller-order bug.
        assert_eq!(alice.phase(), Phase::Established);
    }

    #[test]
    fn protocol_b_requires_identity_and_directory() {
        let params = toy();
        let psk = psk(105);
        let mut rng = DrbgState::seed(&seed_from_u64(11)).unwrap();
        let dir = GroupDirectory::new(params.name());
        assert!(matches!(
            Handshake::start(
                Role::Initiator,
                Protocol::B,
                &psk,
                &params,
                &mut rng,
                None,
                Some(&dir)
            ),
            Err(HandshakeError::MissingIdentity)
        ));
        let identity = gen_identity(&mut rng, &params, "alice").unwrap();
        assert!(matches!(
            Handshake::start(
                Role::Initiator,
                Protocol::B,
                &psk,
                &params,
                &mut rng,
                Some(&identity),
                None
            ),
            Err(HandshakeError::MissingDirectory)
        ));
    }

    fn protocol_b_setup(
        params: &CurveParams,
        seed: u64,
    ) -> (LongTermKey, KeyPair, KeyPair, GroupDirectory) {
        let mut rng = DrbgState::seed(&seed_from_u64(seed)).unwrap();
        let psk = generate_ltk(&mut rng, "group", 0).unwrap();
        let alice = gen_identity(&mut rng, params, "alice").unwrap();
        let bob = gen_identity(&mut rng, params, "bob").unwrap();
        let mut dir = GroupDirectory::new(params.name());
        dir.add(params, "alice", alice.public().clone()).unwrap();
        dir.add(params, "bob", bob.public().clone()).unwrap();
        (psk, alice, bob, dir)
    }

    #[test]
    fn honest_protocol_b_agrees() {
        let params = toy();
        let (psk, alice_id, bob_id, dir) = protocol_b_setup(&params, 200);
        let mut alice_rng = DrbgState::seed(&seed_from_u64(12)).unwrap();
        let mut bob_rng = DrbgState::seed(&seed_from_u64(13)).unwrap();
        let (mut alice, msg_a) = Handshake::start(
            Role::Initiator,
            Protocol::B,
            &psk,
            &params,
            &mut alice_rng,
            Some(&alice_id),
            Some(&dir),
        )
        .unwrap();
        let (mut bob, msg_b) = Handshake::start(
            Role::Responder,
            Protocol::B,
            &psk,
            &params,
            &mut bob_rng,
            Some(&bob_id),
            Some(&dir),
        )
        .unwrap();
        assert_eq!(msg_a.sender_claim.as_deref(), Some("alice"));
        let bob_key = bob.absorb(&msg_a).unwrap();
        let alice_key = alice.absorb(&msg_b).unwrap();
        assert_eq!(alice_key, bob_key);
    }

    #[test]
    fn protocol_b_wrong_claim_rejects() {
        let params = toy();
        let (psk, _, bob_id, dir) = protocol_b_setup(&params, 201);
        let mut bob_rng = DrbgState::seed(&seed_from_u64(14)).unwrap();
        let mut carol_rng = DrbgState::seed(&seed_from_u64(15)).unwrap();
        // Bob signs, but the message claims to be from Alice.
        let (_, mut msg) = Handshake::start(
            Role::Initiator,
            Protocol::B,
            &psk,
            &params,
            &mut bob_rng,
            Some(&bob_id),
            Some(&dir),
        )
        .unwrap();
        msg.sender_claim = Some("alice".into());
        let (mut receiver, _) = Handshake::start(
            Role::Responder,
            Protocol::B,
            &psk,
            &params,
            &mut carol_rng,
            Some(&bob_id),
            Some(&dir),
        )
        .unwrap();
        assert!(matches!(
            receiver.absorb(&msg),
            Err(HandshakeError::SignatureInvalid)
        ));
        assert_eq!(receiver.phase(), Phase::Aborted);
    }

    #[test]
    fn protocol_b_unknown_claim_rejects() {
        let params = toy();
        let (psk, alice_id, bob_id, dir) = protocol_b_setup(&params, 202);
        let mut alice_rng = DrbgState::seed(&seed_from_u64(16)).unwrap();
        let mut bob_rng = DrbgState::seed(&seed_from_u64(17)).unwrap();
        let (_, mut msg) = Handshake::start(
            Role::Initiator,
            Protocol::B,
            &psk,
            &params,
            &mut alice_rng,
            Some(&alice_id),
            Some(&dir),
        )
        .unwrap();
        msg.sender_claim = Some("mallory".into());
        let (mut bob, _) = Handshake::start(
            Role::Responder,
            Protocol::B,
            &psk,
            &params,
            &mut bob_rng,
            Some(&bob_id),
            Some(&dir),
        )
        .unwrap();
        assert!(matches!(
            bob.absorb(&msg),
            Err(HandshakeError::UnknownPeer(name)) if name == "mallory"
        ));
    }

    #[test]
    fn wire_round_trip_and_decode_rejections() {
        let params = toy();
        let psk = psk(106);
        let mut rng = DrbgState::seed(&seed_from_u64(18)).unwrap();
        let (_, msg) = Handshake::start(
            Role::Initiator,
            Protocol::A,
            &psk,
            &params,
            &mut rng,
            None,
            None,
        )
        .unwrap();
        let bytes = msg.encode();
        assert_eq!(HandshakeMessage::decode(&bytes).unwrap(), msg);

        let mut wrong_version = bytes.clone();
        wrong_version[0] = 0x02;
        assert!(HandshakeMessage::decode(&wrong_version).is_err());
        let mut wrong_type = bytes.clone();
        wrong_type[1] = 0x7f;
        assert!(HandshakeMessage::decode(&wrong_type).is_err());
        assert!(HandshakeMessage::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(HandshakeMessage::decode(&trailing).is_err());
    }

    #[test]
    fn transcript_counts_and_content() {
        let params = toy();
        let psk = psk(107);
        let (alice, _, alice_key, _) = run_protocol_a(&params, &psk, 19, 20);
        assert_eq!(alice.transcript().len(), 2);
        assert_eq!(alice.transcript()[0].direction, TranscriptDirection::Sent);
        assert_eq!(
            alice.transcript()[1].direction,
            TranscriptDirection::Received
        );
        // The derivation bytes never appear in the transcript.
        let transcript = alice.transcript_bytes();
        let secret_encoding = params.encode_point(alice_key.point());
        assert!(!transcript
            .windows(secret_encoding.len())
            .any(|w| w == secret_encoding));
    }

    #[test]
    fn aborted_run_keeps_partial_transcript() {
        let params = toy();
        let psk = psk(108);
        let mut rng = DrbgState::seed(&seed_from_u64(21)).unwrap();
        let (mut state, msg) = Handshake::start(
            Role::Responder,
            Protocol::A,
            &psk,
            &params,
            &mut rng,
            None,
            None,
        )
        .unwrap();
        let mut bad = msg.clone();
        bad.payload[0] ^= 0xff;
        let _ = state.absorb(&bad);
        assert_eq!(state.phase(), Phase::Aborted);
        assert_eq!(state.transcript().len(), 2);
    }

    #[test]
    fn mismatched_protocol_message_aborts() {
        let params = toy();
        let (psk, alice_id, _, dir) = protocol_b_setup(&params, 203);
        let mut a_rng = DrbgState::seed(&seed_from_u64(22)).unwrap();
        let mut b_rng = DrbgState::seed(&seed_from_u64(23)).unwrap();
        let (_, plain_msg) = Handshake::start(
            Role::Initiator,
            Protocol::A,
            &psk,
            &params,
            &mut a_rng,
            None,
            None,
        )
        .unwrap();
        let (mut bob, _) = Handshake::start(
            Role::Responder,
            Protocol::B,
            &psk,
            &params,
            &mut b_rng,
            Some(&alice_id),
            Some(&dir),
        )
        .unwrap();
        assert!(matches!(
            bob.absorb(&plain_msg),
            Err(HandshakeError::Malformed(_))
        ));
        assert_eq!(bob.phase(), Phase::Aborted);
    }

    #[test]
    fn fixed_seed_reproduces_message_bytes() {
        let params = toy();
        let psk = psk(109);
        let encode_once = || {
            let mut rng = DrbgState::seed(&seed_from_u64(24)).unwrap();
            let (_, msg) = Handshake::start(
                Role::Initiator,
                Protocol::A,
                &psk,
                &params,
                &mut rng,
                None,
                None,
            )
            .unwrap();
            msg.encode()
        };
        assert_eq!(encode_once(), encode_once());
    }
}
