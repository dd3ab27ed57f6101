// SPDX-License-Identifier: Apache-2.0

//! MD5 digest and the elliptic-curve signature used by Protocol B.
//!
//! The signature is plain ECDSA over the loaded curve, with
//! `e = int(digest) mod n`. Protocol B signs the hash of a party's encoded
//! DH share so that group members can pin shares to published identities.
//! The ephemeral nonce is a destroyable [`Scalar`] and is destroyed before
//! signing returns, under the same contract as handshake ephemerals.

mod md5;

pub use md5::{md5, Digest128};

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use crate::curve::{mod_inverse, CurveError, CurveParams, CurvePoint, Scalar};
use crate::drbg::{DrbgError, DrbgState};

#[derive(Debug, Error)]
pub enum SigError {
    #[error(transparent)]
    Rng(#[from] DrbgError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// A party's long-lived identity: private scalar, public point, owner label.
pub struct KeyPair {
    private: Scalar,
    public: CurvePoint,
    owner: String,
}

impl KeyPair {
    /// Binds `private` to its public point `private * G`.
    pub fn from_private(
        params: &CurveParams,
        private: Scalar,
        owner: impl Into<String>,
    ) -> Result<Self, CurveError> {
        let public = params.scalar_mul_secret(&private, params.base_point())?;
        Ok(Self {
            private,
            public,
            owner: owner.into(),
        })
    }

    pub fn public(&self) -> &CurvePoint {
        &self.public
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn private(&self) -> &Scalar {
        &self.private
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("owner", &self.owner)
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// Signature components, each in `[1, n-1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcSignature {
    r: BigUint,
    s: BigUint,
}

impl EcSignature {
    pub fn new(r: BigUint, s: BigUint) -> Self {
        Self { r, s }
    }

    pub fn r(&self) -> &BigUint {
        &self.r
    }

    pub fn s(&self) -> &BigUint {
        &self.s
    }

    /// Wire form: `r || s`, each big-endian zero-padded to the scalar width.
    pub fn to_bytes(&self, params: &CurveParams) -> Vec<u8> {
        let width = params.scalar_len();
        let mut out = vec![0u8; 2 * width];
        let r = self.r.to_bytes_be();
        let s = self.s.to_bytes_be();
        out[width - r.len()..width].copy_from_slice(&r);
        out[2 * width - s.len()..].copy_from_slice(&s);
        out
    }

    pub fn from_bytes(params: &CurveParams, bytes: &[u8]) -> Result<Self, CurveError> {
        let width = params.scalar_len();
        if bytes.len() != 2 * width {
            return Err(CurveError::BadLength(bytes.len()));
        }
        Ok(Self {
            r: BigUint::from_bytes_be(&bytes[..width]),
            s: BigUint::from_bytes_be(&bytes[width..]),
        })
    }
}

fn digest_to_field(digest: &Digest128, n: &BigUint) -> BigUint {
    BigUint::from_bytes_be(digest.bytes()) % n
}

/// One signing attempt with a caller-provided ephemeral. Destroys the
/// ephemeral before returning; yields `None` when r or s degenerates to
/// zero and the caller must redraw.
pub(crate) fn sign_with_ephemeral(
    params: &CurveParams,
    private: &Scalar,
    e: &BigUint,
    ephemeral: &mut Scalar,
) -> Result<Option<EcSignature>, CurveError> {
    let n = params.order();
    let k = ephemeral.value()?;
    let d = private.value()?;
    let result = (|| {
        let kg = params.scalar_mul(&k, params.base_point());
        let r = kg.x()? % n;
        if r.is_zero() {
            return None;
        }
        let k_inv = mod_inverse(&k, n).expect("k in [1, n-1], n prime");
        let s = (k_inv * ((e + &r * &d) % n)) % n;
        if s.is_zero() {
            return None;
        }
        Some(EcSignature::new(r, s))
    })();
    ephemeral.destroy();
    Ok(result)
}

/// Signs a digest: draw `k`, `r = (kG).x mod n`, `s = k^{-1}(e + r d) mod n`,
/// retrying on a zero component. The ephemeral is destroyed after every
/// attempt.
pub fn ec_sign(
    params: &CurveParams,
    keypair: &KeyPair,
    digest: &Digest128,
    rng: &mut DrbgState,
) -> Result<EcSignature, SigError> {
    let e = digest_to_field(digest, params.order());
    loop {
        let mut ephemeral = rng.gen_scalar(params)?;
        if let Some(sig) = sign_with_ephemeral(params, &keypair.private, &e, &mut ephemeral)? {
            return Ok(sig);
        }
    }
}

/// Verifies a signature: `R = (e/s) G + (r/s) Q`, accept iff `R != infinity`
/// and `R.x mod n = r`. Malformed ranges simply reject.
pub fn ec_verify(
    params: &CurveParams,
    public: &CurvePoint,
    digest: &Digest128,
    sig: &EcSignature,
) -> bool {
    let n = params.order();
    let in_range = |v: &BigUint| !v.is_zero() && v < n;
    if !in_range(&sig.r) || !in_range(&sig.s) {
        return false;
    }
    let e = digest_to_field(digest, n);
    let s_inv = mod_inverse(&sig.s, n).expect("s in [1, n-1], n prime");
    let u1 = (&e * &s_inv) % n;
    let u2 = (&sig.r * &s_inv) % n;
    let point = params.point_add(
        &params.scalar_mul(&u1, params.base_point()),
        &params.scalar_mul(&u2, public),
    );
    match point.x() {
        None => false,
        Some(x) => x % n == sig.r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drbg::seed_from_u64;

    const TOY_DOC: &str = "p=61\na=02\nb=0e\ngx=03\ngy=0c\nn=65\nh=01\nname=toy-97\n";

    fn toy() -> CurveParams {
        CurveParams::parse(TOY_DOC).unwrap()
    }

    fn keypair(params: &CurveParams, seed: u64) -> KeyPair {
        let mut rng = DrbgState::seed(&seed_from_u64(seed)).unwrap();
        let private = rng.gen_scalar(params).unwrap();
        KeyPair::from_private(params, private, "tester").unwrap()
    }

    #[test]
    fn sign_verify_round_trip() {
        let params = toy();
        let kp = keypair(&params, 11);
        let mut rng = DrbgState::seed(&seed_from_u64(12)).unwrap();
        let digest = md5(b"share bytes");
        let sig = ec_sign(&params, &kp, &digest, &mut rng).unwrap();
        assert!(ec_verify(&params, kp.public(), &digest, &sig));
    }

    #[test]
    fn flipped_digest_bit_rejects() {
        let params = toy();
        let kp = keypair(&params, 21);
        let mut rng = DrbgState::seed(&seed_from_u64(22)).unwrap();
        let digest = md5(b"handshake share");
        let sig = ec_sign(&params, &kp, &digest, &mut rng).unwrap();

        let mut tampered = *digest.bytes();
        tampered[0] ^= 0x01;
        assert!(!ec_verify(
            &params,
            kp.public(),
            &Digest128::new(tampered),
            &sig
        ));
    }

    #[test]
    fn wrong_key_rejects() {
        let params = toy();
        let alice = keypair(&params, 31);
        let bob = keypair(&params, 32);
        let mut rng = DrbgState::seed(&seed_from_u64(33)).unwrap();
        let digest = md5(b"bound to alice");
        let sig = ec_sign(&params, &alice, &digest, &mut rng).unwrap();
        assert!(ec_verify(&params, alice.public(), &digest, &sig));
        assert!(!ec_verify(&params, bob.public(), &digest, &sig));
    }

    #[test]
    fn out_of_range_components_reject() {
        let params = toy();
        let kp = keypair(&params, 41);
        let digest = md5(b"msg");
        let n = params.order().clone();
        for (r, s) in [
            (BigUint::zero(), BigUint::from(3u32)),
            (BigUint::from(3u32), BigUint::zero()),
            (n.clone(), BigUint::from(3u32)),
            (BigUint::from(3u32), n.clone()),
        ] {
            assert!(!ec_verify(
                &params,
                kp.public(),
                &digest,
                &EcSignature::new(r, s)
            ));
        }
    }

    #[test]
    fn ephemeral_is_destroyed_even_on_retry_path() {
        let params = toy();
        let kp = keypair(&params, 51);
        let e = digest_to_field(&md5(b"x"), params.order());
        let mut ephemeral = Scalar::from_biguint(&BigUint::from(9u32), params.scalar_len());
        let _ = sign_with_ephemeral(&params, kp.private(), &e, &mut ephemeral).unwrap();
        assert!(ephemeral.is_destroyed());
        assert!(ephemeral.state_bytes().iter().all(|&b| b == 0));
    }

    #[test]
    fn signature_wire_form_round_trips() {
        let params = toy();
        let kp = keypair(&params, 61);
        let mut rng = DrbgState::seed(&seed_from_u64(62)).unwrap();
        let digest = md5(b"wire");
        let sig = ec_sign(&params, &kp, &digest, &mut rng).unwrap();
        let bytes = sig.to_bytes(&params);
        assert_eq!(bytes.len(), 2 * params.scalar_len());
        assert_eq!(EcSignature::from_bytes(&params, &bytes).unwrap(), sig);
        assert!(EcSignature::from_bytes(&params, &bytes[1..]).is_err());
    }
}
