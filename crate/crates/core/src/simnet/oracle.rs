// SPDX-License-Identifier: Apache-2.0

//! Brute-force oracles on enumerable curves.
//!
//! These are the adversary's only completing computations in the security
//! scenarios: exhaustively walking the group. They are feasible exactly
//! because the toy curve's field has under a hundred elements; the same
//! walk on a 256-bit group order is the discrete-log assumption.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::curve::{CurveParams, CurvePoint};

/// Fields larger than this are not enumerable at desk scale.
pub const MAX_ENUMERABLE_PRIME: u64 = 1 << 14;

/// `Some(p)` when the whole group can be walked by brute force.
pub fn enumerable_prime(params: &CurveParams) -> Option<u64> {
    params
        .prime()
        .to_u64()
        .filter(|&p| p <= MAX_ENUMERABLE_PRIME)
}

/// Every affine point on the curve, by scanning all (x, y) pairs.
pub fn enumerate_affine_points(params: &CurveParams) -> Vec<CurvePoint> {
    let p = enumerable_prime(params).expect("curve is not enumerable");
    let mut points = Vec::new();
    for x in 0..p {
        for y in 0..p {
            let candidate = CurvePoint::affine(BigUint::from(x), BigUint::from(y));
            if params.is_on_curve(&candidate) {
                points.push(candidate);
            }
        }
    }
    points
}

/// Number of byte strings that decode as a non-identity point: one
/// `0x04 || x || y` encoding per affine point.
pub fn valid_encoding_count(params: &CurveParams) -> u64 {
    enumerate_affine_points(params).len() as u64
}

/// Outcome of a linear discrete-log search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlogResult {
    pub exponent: u64,
    /// Group elements visited: the search walks G, 2G, 3G, … until the
    /// target appears, so this equals the exponent.
    pub visited: u64,
}

/// Solves `target = k * G` by walking successive multiples of the base
/// point. `None` if the target is not a multiple of G (cannot happen in a
/// prime-order group for on-curve targets).
pub fn dlog_linear(params: &CurveParams, target: &CurvePoint) -> Option<DlogResult> {
    if target.is_infinity() {
        return Some(DlogResult {
            exponent: 0,
            visited: 0,
        });
    }
    let n = params.order().to_u64()?;
    let mut acc = params.base_point().clone();
    for k in 1..n {
        if &acc == target {
            return Some(DlogResult {
                exponent: k,
                visited: k,
            });
        }
        acc = params.point_add(&acc, params.base_point());
    }
    if &acc == target {
        return Some(DlogResult {
            exponent: n - 1,
            visited: n - 1,
        });
    }
    None
}
