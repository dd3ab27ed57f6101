// SPDX-License-Identifier: Apache-2.0

//! Secure-channel toolkit: PSK-authenticated elliptic-curve Diffie-Hellman
//! handshakes with forward secrecy by ephemeral-scalar destruction, an
//! AES-CTR record layer with disconnect-recovery rules, and a deterministic
//! in-memory adversary simulator that turns the security argument into
//! executable scenarios.
//!
//! # Layout
//!
//! - [`curve`] — prime-field short-Weierstrass group arithmetic, parameter
//!   loading and validation, point wire encoding, destroyable scalars.
//! - [`symcipher`] — AES-128 block cipher and a CTR envelope. No integrity:
//!   the record layer is deliberately malleable (see [`simnet`] scenario S4).
//! - [`drbg`] — deterministic AES-CTR generator used for ephemeral scalars,
//!   nonces, and key generation. Seed injection makes every protocol run
//!   reproducible.
//! - [`sig`] — MD5 digest plus an ECDSA-style signature used by Protocol B
//!   for identity binding inside a trusted group.
//! - [`handshake`] — the two-message handshake state machines: Protocol A
//!   (PSK-encrypted ECDH) and Protocol B (PSK-encrypted, signed ECDH).
//! - [`session`] — session-key derivation, epoch/sequence record framing,
//!   replay rejection, and the 30-second / 10-minute disconnect rules.
//! - [`keystore`] — long-term key files and the published directory of
//!   group public keys.
//! - [`simnet`] — scripted wire, capability-gated adversary, scenarios
//!   S1–S5 with brute-force oracles on the toy curve.
//! - [`batch`] — data-parallel trial runner (rayon behind the `parallel`
//!   feature, sequential fallback otherwise) used by the scenario batteries.
//!
//! # Security posture
//!
//! This crate mirrors its protocol's published design faithfully, including
//! its gaps: the record layer has no MAC, MD5 is the only digest, and
//! long-term keys rest in plaintext files. Scenario S4 demonstrates the
//! malleability gap rather than hiding it. Arithmetic is not
//! constant-time; zeroization of secrets is in scope, timing side channels
//! are not.

pub mod batch;
pub mod clock;
pub mod curve;
pub mod drbg;
pub mod handshake;
pub mod keystore;
pub mod session;
pub mod sig;
pub mod simnet;
pub mod symcipher;
