// SPDX-License-Identifier: Apache-2.0

//! Shared test oracles.
//!
//! `tiny` is an independent reference implementation of the curve math in
//! plain `i128` arithmetic: group law straight from the chord-tangent
//! formulas, scalar multiplication by *repeated addition*, ECDSA by the
//! textbook equations. It shares no code with the library's big-integer
//! path, which is the point — the two must agree.

#![allow(dead_code)]

use std::path::PathBuf;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use pfslink_core::curve::{CurveParams, CurvePoint};

pub fn params_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../params")
}

pub fn toy_params() -> CurveParams {
    CurveParams::from_path(params_dir().join("toy97.curve")).expect("toy curve file loads")
}

pub fn sm2_params() -> CurveParams {
    CurveParams::from_path(params_dir().join("sm2.curve")).expect("sm2 curve file loads")
}

/// Mid-size curve for the signature batteries: group order 131749 keeps
/// ECDSA's 2/n accidental-acceptance rate negligible across a
/// thousand-trial sweep, which the 101-element toy group cannot.
pub fn toy131k_params() -> CurveParams {
    CurveParams::from_path(params_dir().join("toy131k.curve")).expect("toy131k curve file loads")
}

/// `None` is the identity; `Some((x, y))` an affine point.
pub type TinyPoint = Option<(i128, i128)>;

/// Reference curve arithmetic over a machine-word prime field.
pub struct TinyCurve {
    pub p: i128,
    pub a: i128,
    pub b: i128,
    pub gx: i128,
    pub gy: i128,
    pub n: i128,
}

/// The shipped toy curve, restated independently of the parameter file.
pub const TINY_TOY: TinyCurve = TinyCurve {
    p: 97,
    a: 2,
    b: 14,
    gx: 3,
    gy: 12,
    n: 101,
};

impl TinyCurve {
    fn modp(&self, v: i128) -> i128 {
        v.rem_euclid(self.p)
    }

    fn modn(&self, v: i128) -> i128 {
        v.rem_euclid(self.n)
    }

    fn inv_mod(&self, v: i128, modulus: i128) -> i128 {
        // Fermat: modulus is prime in every use here.
        let mut base = v.rem_euclid(modulus);
        let mut exp = modulus - 2;
        let mut acc = 1i128;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % modulus;
            }
            base = base * base % modulus;
            exp >>= 1;
        }
        acc
    }

    pub fn on_curve(&self, pt: TinyPoint) -> bool {
        match pt {
            None => true,
            Some((x, y)) => {
                (0..self.p).contains(&x)
                    && (0..self.p).contains(&y)
                    && self.modp(y * y) == self.modp(x * x * x + self.a * x + self.b)
            }
        }
    }

    pub fn add(&self, p1: TinyPoint, p2: TinyPoint) -> TinyPoint {
        let (x1, y1) = match p1 {
            None => return p2,
            Some(c) => c,
        };
        let (x2, y2) = match p2 {
            None => return p1,
            Some(c) => c,
        };
        let lambda = if x1 == x2 {
            if self.modp(y1 + y2) == 0 {
                return None;
            }
            self.modp((3 * x1 * x1 + self.a) * self.inv_mod(2 * y1, self.p))
        } else {
            self.modp((y2 - y1) * self.inv_mod(x2 - x1, self.p))
        };
        let x3 = self.modp(lambda * lambda - x1 - x2);
        let y3 = self.modp(lambda * (x1 - x3) - y1);
        Some((x3, y3))
    }

    /// Brute force: k successive additions, no double-and-add.
    pub fn mul_repeated(&self, k: i128, pt: TinyPoint) -> TinyPoint {
        let mut acc = None;
        for _ in 0..k {
            acc = self.add(acc, pt);
        }
        acc
    }

    pub fn generator(&self) -> TinyPoint {
        Some((self.gx, self.gy))
    }

    /// Every affine point, by scanning the full coordinate plane.
    pub fn enumerate(&self) -> Vec<(i128, i128)> {
        let mut points = Vec::new();
        for x in 0..self.p {
            for y in 0..self.p {
                if self.on_curve(Some((x, y))) {
                    points.push((x, y));
                }
            }
        }
        points
    }

    /// Textbook ECDSA signing with an explicit nonce; `None` when r or s
    /// degenerates.
    pub fn ecdsa_sign(&self, d: i128, e: i128, k: i128) -> Option<(i128, i128)> {
        let (rx, _) = self.mul_repeated(k, self.generator())?;
        let r = self.modn(rx);
        if r == 0 {
            return None;
        }
        let s = self.modn(self.inv_mod(k, self.n) * self.modn(e + r * d));
        if s == 0 {
            return None;
        }
        Some((r, s))
    }

    /// Textbook ECDSA verification via repeated-addition multiplication.
    pub fn ecdsa_verify(&self, public: TinyPoint, e: i128, r: i128, s: i128) -> bool {
        if !(1..self.n).contains(&r) || !(1..self.n).contains(&s) {
            return false;
        }
        let w = self.inv_mod(s, self.n);
        let u1 = self.modn(e * w);
        let u2 = self.modn(r * w);
        let point = self.add(
            self.mul_repeated(u1, self.generator()),
            self.mul_repeated(u2, public),
        );
        match point {
            None => false,
            Some((x, _)) => self.modn(x) == r,
        }
    }
}

pub fn to_tiny(point: &CurvePoint) -> TinyPoint {
    match point {
        CurvePoint::Infinity => None,
        CurvePoint::Affine { x, y } => Some((
            x.to_i128().expect("toy coordinate"),
            y.to_i128().expect("toy coordinate"),
        )),
    }
}

pub fn from_tiny(pt: TinyPoint) -> CurvePoint {
    match pt {
        None => CurvePoint::Infinity,
        Some((x, y)) => CurvePoint::affine(BigUint::from(x as u64), BigUint::from(y as u64)),
    }
}
