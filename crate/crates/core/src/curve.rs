// SPDX-License-Identifier: Apache-2.0

//! Prime-field short-Weierstrass elliptic-curve arithmetic.
//!
//! Curve constants never live in code: [`CurveParams::parse`] reads them
//! from a parameter document (`key = hex` lines) and validates every
//! invariant before handing anything back — field primality, curve
//! non-singularity, base-point membership, order primality, and
//! `n * G = infinity`. Two documents ship with the repository: a 256-bit
//! production curve and a 97-element-field toy curve whose whole group is
//! enumerable, which is what the brute-force oracles run against.
//!
//! Points are affine with an explicit infinity case. Arithmetic is
//! variable-time; zeroization of secret scalars is handled by [`Scalar`],
//! timing channels are out of scope.

use std::fmt;
use std::path::Path;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use thiserror::Error;
use zeroize::Zeroize;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("malformed parameter document: {0}")]
    MalformedDocument(String),
    #[error("base point does not satisfy the curve equation")]
    PointNotOnCurve,
    #[error("group order failed the primality test")]
    CompositeOrder,
    #[error("n * G is not the identity")]
    WrongOrder,
    #[error("scalar has been destroyed")]
    DestroyedScalar,
    #[error("encoded point has invalid length {0}")]
    BadLength(usize),
    #[error("encoded point has unknown prefix {0:#04x}")]
    BadPrefix(u8),
    #[error("decoded coordinates are not on the curve")]
    NotOnCurve,
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

/// A point in affine coordinates, or the group identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CurvePoint {
    Infinity,
    Affine { x: BigUint, y: BigUint },
}

impl CurvePoint {
    pub fn affine(x: BigUint, y: BigUint) -> Self {
        CurvePoint::Affine { x, y }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }

    /// Affine x coordinate; `None` for the identity.
    pub fn x(&self) -> Option<&BigUint> {
        match self {
            CurvePoint::Infinity => None,
            CurvePoint::Affine { x, .. } => Some(x),
        }
    }
}

/// A secret integer in `[1, n-1]` that can be destroyed in place.
///
/// Destruction overwrites the backing bytes with zeros and latches a flag;
/// every later read fails with [`CurveError::DestroyedScalar`]. This is the
/// forward-secrecy mechanism: once a handshake derives its session key, the
/// ephemeral scalar is destroyed and nothing — including the party that
/// generated it — can rederive the session key from a recorded transcript.
pub struct Scalar {
    bytes: Vec<u8>,
    destroyed: bool,
}

impl Scalar {
    /// Big-endian value, zero-padded to `width` bytes.
    pub fn from_biguint(value: &BigUint, width: usize) -> Self {
        let raw = value.to_bytes_be();
        assert!(raw.len() <= width, "scalar wider than its field");
        let mut bytes = vec![0u8; width - raw.len()];
        bytes.extend_from_slice(&raw);
        Self {
            bytes,
            destroyed: false,
        }
    }

    pub fn value(&self) -> Result<BigUint, CurveError> {
        if self.destroyed {
            return Err(CurveError::DestroyedScalar);
        }
        Ok(BigUint::from_bytes_be(&self.bytes))
    }

    /// Overwrites the value with zeros. Idempotent.
    pub fn destroy(&mut self) {
        self.bytes.zeroize();
        self.destroyed = true;
    }

    pub fn is_destroyed(&self) -> bool {
        self.destroyed
    }

    /// Raw backing bytes, for zeroization audits.
    pub fn state_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

impl Drop for Scalar {
    fn drop(&mut self) {
        self.bytes.zeroize();
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.destroyed {
            f.write_str("Scalar(destroyed)")
        } else {
            f.write_str("Scalar(..)")
        }
    }
}

/// Validated domain parameters. Immutable and freely shareable.
#[derive(Debug, Clone)]
pub struct CurveParams {
    p: BigUint,
    a: BigUint,
    b: BigUint,
    g: CurvePoint,
    n: BigUint,
    h: u32,
    name: String,
    field_len: usize,
    scalar_len: usize,
}

impl CurveParams {
    /// Parses and validates a parameter document: `key = hex` lines with
    /// `#` comments, keys `p a b gx gy n h name` (name is plain text).
    pub fn parse(document: &str) -> Result<Self, CurveError> {
        let mut fields = std::collections::HashMap::new();
        for (lineno, raw) in document.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CurveError::MalformedDocument(format!(
                    "line {}: expected `key = value`",
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_ascii_lowercase();
            if fields
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CurveError::MalformedDocument(format!(
                    "duplicate key `{key}`"
                )));
            }
        }

        let name = fields.remove("name").unwrap_or_else(|| "unnamed".into());
        let mut take_hex = |key: &str| -> Result<BigUint, CurveError> {
            let raw = fields
                .remove(key)
                .ok_or_else(|| CurveError::MalformedDocument(format!("missing key `{key}`")))?;
            let cleaned: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
            BigUint::parse_bytes(cleaned.as_bytes(), 16).ok_or_else(|| {
                CurveError::MalformedDocument(format!("key `{key}` is not big-endian hex"))
            })
        };

        let p = take_hex("p")?;
        let a = take_hex("a")?;
        let b = take_hex("b")?;
        let gx = take_hex("gx")?;
        let gy = take_hex("gy")?;
        let n = take_hex("n")?;
        let h_raw = take_hex("h")?;
        if let Some(extra) = fields.keys().next() {
            return Err(CurveError::MalformedDocument(format!(
                "unknown key `{extra}`"
            )));
        }

        let three = BigUint::from(3u32);
        if p <= three || (&p % 2u32).is_zero() {
            return Err(CurveError::MalformedDocument(
                "p must be an odd integer greater than 3".into(),
            ));
        }
        if !is_probable_prime(&p) {
            return Err(CurveError::MalformedDocument("p is not prime".into()));
        }
        for (label, v) in [("a", &a), ("b", &b), ("gx", &gx), ("gy", &gy)] {
            if *v >= p {
                return Err(CurveError::MalformedDocument(format!(
                    "{label} is not reduced mod p"
                )));
            }
        }

        // Non-singularity: 4a^3 + 27b^2 != 0 mod p.
        let discriminant =
            (BigUint::from(4u32) * a.modpow(&three, &p) + BigUint::from(27u32) * &b * &b) % &p;
        if discriminant.is_zero() {
            return Err(CurveError::MalformedDocument(
                "singular curve: 4a^3 + 27b^2 = 0 mod p".into(),
            ));
        }

        let h = u32::try_from(&h_raw).map_err(|_| {
            CurveError::MalformedDocument("cofactor h does not fit a small integer".into())
        })?;
        if h == 0 {
            return Err(CurveError::MalformedDocument(
                "cofactor h must be >= 1".into(),
            ));
        }

        let field_len = p.bits().div_ceil(8) as usize;
        let scalar_len = n.bits().div_ceil(8) as usize;
        let params = Self {
            g: CurvePoint::affine(gx, gy),
            p,
            a,
            b,
            n,
            h,
            name,
            field_len,
            scalar_len,
        };

        if !params.is_on_curve(&params.g) {
            return Err(CurveError::PointNotOnCurve);
        }
        if params.n <= BigUint::one() || !is_probable_prime(&params.n) {
            return Err(CurveError::CompositeOrder);
        }
        if !params.scalar_mul(&params.n, &params.g).is_infinity() {
            return Err(CurveError::WrongOrder);
        }
        Ok(params)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, CurveError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn prime(&self) -> &BigUint {
        &self.p
    }

    pub fn coefficient_a(&self) -> &BigUint {
        &self.a
    }

    pub fn coefficient_b(&self) -> &BigUint {
        &self.b
    }

    pub fn base_point(&self) -> &CurvePoint {
        &self.g
    }

    pub fn order(&self) -> &BigUint {
        &self.n
    }

    pub fn cofactor(&self) -> u32 {
        self.h
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Bytes per field element in the wire encoding.
    pub fn field_len(&self) -> usize {
        self.field_len
    }

    /// Bytes per scalar (and per signature component) on the wire.
    pub fn scalar_len(&self) -> usize {
        self.scalar_len
    }

    /// Wire length of a non-identity point encoding: `0x04 || x || y`.
    pub fn point_encoding_len(&self) -> usize {
        1 + 2 * self.field_len
    }

    pub fn is_on_curve(&self, point: &CurvePoint) -> bool {
        match point {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => {
                if *x >= self.p || *y >= self.p {
                    return false;
                }
                let lhs = (y * y) % &self.p;
                let rhs = (x * x * x + &self.a * x + &self.b) % &self.p;
                lhs == rhs
            }
        }
    }

    fn field_sub(&self, lhs: &BigUint, rhs: &BigUint) -> BigUint {
        if lhs >= rhs {
            (lhs - rhs) % &self.p
        } else {
            &self.p - ((rhs - lhs) % &self.p)
        }
    }

    /// Chord-tangent group law. Total on valid points.
    pub fn point_add(&self, p1: &CurvePoint, p2: &CurvePoint) -> CurvePoint {
        let (x1, y1) = match p1 {
            CurvePoint::Infinity => return p2.clone(),
            CurvePoint::Affine { x, y } => (x, y),
        };
        let (x2, y2) = match p2 {
            CurvePoint::Infinity => return p1.clone(),
            CurvePoint::Affine { x, y } => (x, y),
        };

        let lambda = if x1 == x2 {
            if (y1 + y2) % &self.p == BigUint::zero() {
                // Inverse pair (this also covers doubling a point with y = 0).
                return CurvePoint::Infinity;
            }
            // Tangent: (3x^2 + a) / 2y.
            let num = (BigUint::from(3u32) * x1 * x1 + &self.a) % &self.p;
            let den = (BigUint::from(2u32) * y1) % &self.p;
            (num * mod_inverse(&den, &self.p).expect("2y invertible in a prime field")) % &self.p
        } else {
            // Chord: (y2 - y1) / (x2 - x1).
            let num = self.field_sub(y2, y1);
            let den = self.field_sub(x2, x1);
            (num * mod_inverse(&den, &self.p).expect("x2 - x1 invertible in a prime field"))
                % &self.p
        };

        let x3 = self.field_sub(&((&lambda * &lambda) % &self.p), &((x1 + x2) % &self.p));
        let y3 = self.field_sub(&((&lambda * self.field_sub(x1, &x3)) % &self.p), y1);
        CurvePoint::affine(x3, y3)
    }

    /// `k * q` by double-and-add, most significant bit first.
    pub fn scalar_mul(&self, k: &BigUint, q: &CurvePoint) -> CurvePoint {
        let mut acc = CurvePoint::Infinity;
        for i in (0..k.bits()).rev() {
            acc = self.point_add(&acc, &acc);
            if k.bit(i) {
                acc = self.point_add(&acc, q);
            }
        }
        acc
    }

    /// `k * q` for a destroyable scalar; fails if `k` was erased.
    pub fn scalar_mul_secret(&self, k: &Scalar, q: &CurvePoint) -> Result<CurvePoint, CurveError> {
        Ok(self.scalar_mul(&k.value()?, q))
    }

    /// Wire form: single byte `0x00` for infinity, else
    /// `0x04 || x || y` with both coordinates zero-padded to the field length.
    pub fn encode_point(&self, q: &CurvePoint) -> Vec<u8> {
        match q {
            CurvePoint::Infinity => vec![0x00],
            CurvePoint::Affine { x, y } => {
                let mut out = Vec::with_capacity(self.point_encoding_len());
                out.push(0x04);
                out.extend_from_slice(&pad_be(x, self.field_len));
                out.extend_from_slice(&pad_be(y, self.field_len));
                out
            }
        }
    }

    /// Inverse of [`Self::encode_point`]; verifies curve membership.
    pub fn decode_point(&self, bytes: &[u8]) -> Result<CurvePoint, CurveError> {
        match bytes.first() {
            None => Err(CurveError::BadLength(0)),
            Some(0x00) => {
                if bytes.len() == 1 {
                    Ok(CurvePoint::Infinity)
                } else {
                    Err(CurveError::BadLength(bytes.len()))
                }
            }
            Some(0x04) => {
                if bytes.len() != self.point_encoding_len() {
                    return Err(CurveError::BadLength(bytes.len()));
                }
                let x = BigUint::from_bytes_be(&bytes[1..1 + self.field_len]);
                let y = BigUint::from_bytes_be(&bytes[1 + self.field_len..]);
                let point = CurvePoint::affine(x, y);
                if self.is_on_curve(&point) {
                    Ok(point)
                } else {
                    Err(CurveError::NotOnCurve)
                }
            }
            Some(&other) => Err(CurveError::BadPrefix(other)),
        }
    }
}

fn pad_be(value: &BigUint, width: usize) -> Vec<u8> {
    let raw = value.to_bytes_be();
    debug_assert!(raw.len() <= width);
    let mut out = vec![0u8; width.saturating_sub(raw.len())];
    out.extend_from_slice(&raw);
    out
}

/// Modular inverse by extended Euclid; `None` when gcd(a, m) != 1.
pub fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a.clone() % modulus);
    let m = BigInt::from(modulus.clone());
    let (mut r0, mut r1) = (m.clone(), a);
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    if !r0.is_one() {
        return None;
    }
    let mut inv = t0 % &m;
    if inv.is_negative() {
        inv += &m;
    }
    inv.to_biguint()
}

/// Miller-Rabin with the first 40 primes as bases. Deterministic behavior,
/// probabilistic guarantee for large inputs.
pub fn is_probable_prime(n: &BigUint) -> bool {
    const BASES: [u32; 40] = [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
        97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
    ];
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for base in BASES {
        let b = BigUint::from(base);
        if *n == b {
            return true;
        }
        if (n % &b).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - BigUint::one();
    let trailing = n_minus_1.trailing_zeros().unwrap_or(0);
    let odd_part = &n_minus_1 >> trailing;
    'bases: for base in BASES {
        let mut x = BigUint::from(base).modpow(&odd_part, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..trailing {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const TOY_DOC: &str = "\
        p  = 61\n\
        a  = 02\n\
        b  = 0e\n\
        gx = 03\n\
        gy = 0c\n\
        n  = 65\n\
        h  = 01\n\
        name = toy-97\n";

    fn toy() -> CurveParams {
        CurveParams::parse(TOY_DOC).unwrap()
    }

    #[test]
    fn toy_document_loads() {
        let params = toy();
        assert_eq!(params.prime(), &BigUint::from(97u32));
        assert_eq!(params.order(), &BigUint::from(101u32));
        assert_eq!(params.cofactor(), 1);
        assert_eq!(params.name(), "toy-97");
        assert_eq!(params.field_len(), 1);
    }

    #[test]
    fn spec_example_composite_group_with_prime_subgroup_loads() {
        // y^2 = x^3 + 2x + 3 over F_97 has order 100; the point (3, 6)
        // generates the prime-order-5 subgroup, so h = 20.
        let doc = "p=61\na=02\nb=03\ngx=03\ngy=06\nn=05\nh=14\nname=toy-sub5\n";
        let params = CurveParams::parse(doc).unwrap();
        assert_eq!(params.order(), &BigUint::from(5u32));
        assert_eq!(params.cofactor(), 20);
    }

    #[test]
    fn singular_curve_rejected_as_malformed() {
        // b chosen so 4a^3 + 27b^2 = 0 mod 97 (a=0, b=0).
        let doc = "p=61\na=00\nb=00\ngx=03\ngy=0c\nn=65\nh=01\n";
        assert!(matches!(
            CurveParams::parse(doc),
            Err(CurveError::MalformedDocument(_))
        ));
    }

    #[test]
    fn off_curve_base_point_rejected() {
        let doc = "p=61\na=02\nb=0e\ngx=03\ngy=0d\nn=65\nh=01\n";
        assert!(matches!(
            CurveParams::parse(doc),
            Err(CurveError::PointNotOnCurve)
        ));
    }

    #[test]
    fn composite_order_rejected() {
        let doc = "p=61\na=02\nb=0e\ngx=03\ngy=0c\nn=64\nh=01\n";
        assert!(matches!(
            CurveParams::parse(doc),
            Err(CurveError::CompositeOrder)
        ));
    }

    #[test]
    fn wrong_order_rejected() {
        // 103 is prime but is not the order of G.
        let doc = "p=61\na=02\nb=0e\ngx=03\ngy=0c\nn=67\nh=01\n";
        assert!(matches!(
            CurveParams::parse(doc),
            Err(CurveError::WrongOrder)
        ));
    }

    #[test]
    fn missing_and_junk_keys_rejected() {
        assert!(matches!(
            CurveParams::parse("p=61\na=02\n"),
            Err(CurveError::MalformedDocument(_))
        ));
        assert!(matches!(
            CurveParams::parse(&format!("{TOY_DOC}bogus = 01\n")),
            Err(CurveError::MalformedDocument(_))
        ));
        assert!(matches!(
            CurveParams::parse("p=zz\na=02\nb=0e\ngx=03\ngy=0c\nn=65\nh=01\n"),
            Err(CurveError::MalformedDocument(_))
        ));
    }

    #[test]
    fn identity_element() {
        let params = toy();
        let g = params.base_point().clone();
        assert_eq!(params.point_add(&g, &CurvePoint::Infinity), g);
        assert_eq!(params.point_add(&CurvePoint::Infinity, &g), g);
        assert_eq!(
            params.point_add(&CurvePoint::Infinity, &CurvePoint::Infinity),
            CurvePoint::Infinity
        );
    }

    #[test]
    fn inverse_pair_sums_to_infinity() {
        let params = toy();
        let g = params.base_point().clone();
        let (x, y) = match &g {
            CurvePoint::Affine { x, y } => (x.clone(), y.clone()),
            _ => unreachable!(),
        };
        let neg = CurvePoint::affine(x, params.prime() - y);
        assert!(params.is_on_curve(&neg));
        assert_eq!(params.point_add(&g, &neg), CurvePoint::Infinity);
    }

    #[test]
    fn scalar_mul_edges() {
        let params = toy();
        let g = params.base_point().clone();
        assert_eq!(
            params.scalar_mul(&BigUint::zero(), &g),
            CurvePoint::Infinity
        );
        assert_eq!(params.scalar_mul(&BigUint::one(), &g), g);
        assert!(params.scalar_mul(params.order(), &g).is_infinity());
    }

    #[test]
    fn encode_decode_round_trip_and_rejections() {
        let params = toy();
        let g = params.base_point().clone();
        assert_eq!(params.encode_point(&CurvePoint::Infinity), vec![0x00]);
        assert_eq!(params.decode_point(&params.encode_point(&g)).unwrap(), g);
        // y' off-curve.
        assert!(matches!(
            params.decode_point(&[0x04, 0x03, 0x0d]),
            Err(CurveError::NotOnCurve)
        ));
        assert!(matches!(
            params.decode_point(&[0x04, 0x03]),
            Err(CurveError::BadLength(2))
        ));
        assert!(matches!(
            params.decode_point(&[0x02, 0x03, 0x0c]),
            Err(CurveError::BadPrefix(0x02))
        ));
        assert!(matches!(
            params.decode_point(&[0x00, 0x00]),
            Err(CurveError::BadLength(2))
        ));
        assert!(matches!(
            params.decode_point(&[]),
            Err(CurveError::BadLength(0))
        ));
        // Coordinates >= p are not valid curve coordinates.
        assert!(matches!(
            params.decode_point(&[0x04, 0x61, 0x0c]),
            Err(CurveError::NotOnCurve)
        ));
    }

    #[test]
    fn destroyed_scalar_reads_fail_and_bytes_are_gone() {
        let mut s = Scalar::from_biguint(&BigUint::from(0x5a5au32), 4);
        assert_eq!(s.value().unwrap(), BigUint::from(0x5a5au32));
        s.destroy();
        assert!(matches!(s.value(), Err(CurveError::DestroyedScalar)));
        assert!(s.state_bytes().iter().all(|&b| b == 0));
        // Idempotent.
        s.destroy();
        assert!(s.is_destroyed());
    }

    #[test]
    fn destroyed_scalar_blocks_multiplication() {
        let params = toy();
        let mut s = Scalar::from_biguint(&BigUint::from(7u32), 1);
        let _ = params.scalar_mul_secret(&s, params.base_point()).unwrap();
        s.destroy();
        assert!(matches!(
            params.scalar_mul_secret(&s, params.base_point()),
            Err(CurveError::DestroyedScalar)
        ));
    }

    #[test]
    fn mod_inverse_agrees_with_fermat() {
        let p = BigUint::from(97u32);
        for v in 1u32..97 {
            let v = BigUint::from(v);
            let inv = mod_inverse(&v, &p).unwrap();
            assert_eq!((inv * &v) % &p, BigUint::one());
        }
        assert!(mod_inverse(&BigUint::from(6u32), &BigUint::from(9u32)).is_none());
    }

    #[test]
    fn primality_spot_checks() {
        for prime in [2u32, 3, 97, 101, 65537] {
            assert!(is_probable_prime(&BigUint::from(prime)), "{prime}");
        }
        for composite in [1u32, 100, 561, 65535] {
            assert!(!is_probable_prime(&BigUint::from(composite)), "{composite}");
        }
        // Carmichael-ish strong pseudoprime candidates.
        assert!(!is_probable_prime(&BigUint::from(3215031751u64)));
    }
}
