// SPDX-License-Identifier: Apache-2.0

//! AES-128 block cipher and a counter-mode envelope.
//!
//! The block cipher is written out from the standard's definition (S-box,
//! ShiftRows, MixColumns over GF(2^8), key schedule) rather than pulled in
//! from a crypto crate, because the known-answer tests pin it bit-exactly
//! and the DRBG cross-checks against it.
//!
//! CTR mode provides confidentiality only. There is no MAC: flipping
//! ciphertext bit i flips plaintext bit i, and scenario S4 in [`crate::simnet`]
//! demonstrates exactly that. Callers own nonce uniqueness.

use thiserror::Error;
use zeroize::Zeroize;

pub const BLOCK_LEN: usize = 16;
pub const KEY_LEN: usize = 16;

const ROUNDS: usize = 10;
const ROUND_KEY_WORDS: usize = 4 * (ROUNDS + 1);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CipherError {
    #[error("block must be exactly {BLOCK_LEN} bytes, got {0}")]
    BadBlockLength(usize),
    #[error("key must be exactly {KEY_LEN} bytes, got {0}")]
    BadKeyLength(usize),
}

const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

const INV_SBOX: [u8; 256] = [
    0x52, 0x09, 0x6a, 0xd5, 0x30, 0x36, 0xa5, 0x38, 0xbf, 0x40, 0xa3, 0x9e, 0x81, 0xf3, 0xd7, 0xfb,
    0x7c, 0xe3, 0x39, 0x82, 0x9b, 0x2f, 0xff, 0x87, 0x34, 0x8e, 0x43, 0x44, 0xc4, 0xde, 0xe9, 0xcb,
    0x54, 0x7b, 0x94, 0x32, 0xa6, 0xc2, 0x23, 0x3d, 0xee, 0x4c, 0x95, 0x0b, 0x42, 0xfa, 0xc3, 0x4e,
    0x08, 0x2e, 0xa1, 0x66, 0x28, 0xd9, 0x24, 0xb2, 0x76, 0x5b, 0xa2, 0x49, 0x6d, 0x8b, 0xd1, 0x25,
    0x72, 0xf8, 0xf6, 0x64, 0x86, 0x68, 0x98, 0x16, 0xd4, 0xa4, 0x5c, 0xcc, 0x5d, 0x65, 0xb6, 0x92,
    0x6c, 0x70, 0x48, 0x50, 0xfd, 0xed, 0xb9, 0xda, 0x5e, 0x15, 0x46, 0x57, 0xa7, 0x8d, 0x9d, 0x84,
    0x90, 0xd8, 0xab, 0x00, 0x8c, 0xbc, 0xd3, 0x0a, 0xf7, 0xe4, 0x58, 0x05, 0xb8, 0xb3, 0x45, 0x06,
    0xd0, 0x2c, 0x1e, 0x8f, 0xca, 0x3f, 0x0f, 0x02, 0xc1, 0xaf, 0xbd, 0x03, 0x01, 0x13, 0x8a, 0x6b,
    0x3a, 0x91, 0x11, 0x41, 0x4f, 0x67, 0xdc, 0xea, 0x97, 0xf2, 0xcf, 0xce, 0xf0, 0xb4, 0xe6, 0x73,
    0x96, 0xac, 0x74, 0x22, 0xe7, 0xad, 0x35, 0x85, 0xe2, 0xf9, 0x37, 0xe8, 0x1c, 0x75, 0xdf, 0x6e,
    0x47, 0xf1, 0x1a, 0x71, 0x1d, 0x29, 0xc5, 0x89, 0x6f, 0xb7, 0x62, 0x0e, 0xaa, 0x18, 0xbe, 0x1b,
    0xfc, 0x56, 0x3e, 0x4b, 0xc6, 0xd2, 0x79, 0x20, 0x9a, 0xdb, 0xc0, 0xfe, 0x78, 0xcd, 0x5a, 0xf4,
    0x1f, 0xdd, 0xa8, 0x33, 0x88, 0x07, 0xc7, 0x31, 0xb1, 0x12, 0x10, 0x59, 0x27, 0x80, 0xec, 0x5f,
    0x60, 0x51, 0x7f, 0xa9, 0x19, 0xb5, 0x4a, 0x0d, 0x2d, 0xe5, 0x7a, 0x9f, 0x93, 0xc9, 0x9c, 0xef,
    0xa0, 0xe0, 0x3b, 0x4d, 0xae, 0x2a, 0xf5, 0xb0, 0xc8, 0xeb, 0xbb, 0x3c, 0x83, 0x53, 0x99, 0x61,
    0x17, 0x2b, 0x04, 0x7e, 0xba, 0x77, 0xd6, 0x26, 0xe1, 0x69, 0x14, 0x63, 0x55, 0x21, 0x0c, 0x7d,
];

// Rcon[i] = x^(i-1) in GF(2^8), left-aligned in a word.
const RCON: [u32; 10] = [
    0x0100_0000,
    0x0200_0000,
    0x0400_0000,
    0x0800_0000,
    0x1000_0000,
    0x2000_0000,
    0x4000_0000,
    0x8000_0000,
    0x1b00_0000,
    0x3600_0000,
];

/// Multiply by x in GF(2^8) with the AES reduction polynomial.
fn xtime(b: u8) -> u8 {
    if b & 0x80 == 0 {
        b << 1
    } else {
        (b << 1) ^ 0x1b
    }
}

fn gf_mul(b: u8, mut factor: u8) -> u8 {
    let mut acc = 0u8;
    let mut power = b;
    while factor != 0 {
        if factor & 1 != 0 {
            acc ^= power;
        }
        power = xtime(power);
        factor >>= 1;
    }
    acc
}

fn sub_word(w: u32) -> u32 {
    (u32::from(SBOX[(w >> 24) as usize]) << 24)
        | (u32::from(SBOX[(w >> 16 & 0xff) as usize]) << 16)
        | (u32::from(SBOX[(w >> 8 & 0xff) as usize]) << 8)
        | u32::from(SBOX[(w & 0xff) as usize])
}

fn rot_word(w: u32) -> u32 {
    w.rotate_left(8)
}

fn expand_key(key: &[u8; KEY_LEN]) -> [u32; ROUND_KEY_WORDS] {
    let mut w = [0u32; ROUND_KEY_WORDS];
    for i in 0..4 {
        w[i] = u32::from_be_bytes([key[4 * i], key[4 * i + 1], key[4 * i + 2], key[4 * i + 3]]);
    }
    for i in 4..ROUND_KEY_WORDS {
        let mut temp = w[i - 1];
        if i % 4 == 0 {
            temp = sub_word(rot_word(temp)) ^ RCON[i / 4 - 1];
        }
        w[i] = w[i - 4] ^ temp;
    }
    w
}

/// An AES-128 key with its expanded schedule. Wipes itself on drop.
#[derive(Clone)]
pub struct BlockKey {
    bytes: [u8; KEY_LEN],
    round_keys: [u32; ROUND_KEY_WORDS],
}

impl BlockKey {
    pub fn new(bytes: [u8; KEY_LEN]) -> Self {
        let round_keys = expand_key(&bytes);
        Self { bytes, round_keys }
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CipherError> {
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| CipherError::BadKeyLength(bytes.len()))?;
        Ok(Self::new(arr))
    }

    pub fn bytes(&self) -> &[u8; KEY_LEN] {
        &self.bytes
    }
}

impl Drop for BlockKey {
    fn drop(&mut self) {
        self.bytes.zeroize();
        self.round_keys.zeroize();
    }
}

impl std::fmt::Debug for BlockKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Key bytes stay out of logs.
        f.write_str("BlockKey(..)")
    }
}

impl PartialEq for BlockKey {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl Eq for BlockKey {}

// State layout: flat 16 bytes in input order; row r of column c is
// state[4*c + r], as in the standard.

fn add_round_key(state: &mut [u8; BLOCK_LEN], w: &[u32]) {
    for c in 0..4 {
        let k = w[c].to_be_bytes();
        for r in 0..4 {
            state[4 * c + r] ^= k[r];
        }
    }
}

fn sub_bytes(state: &mut [u8; BLOCK_LEN]) {
    for b in state.iter_mut() {
        *b = SBOX[*b as usize];
    }
}

fn inv_sub_bytes(state: &mut [u8; BLOCK_LEN]) {
    for b in state.iter_mut() {
        *b = INV_SBOX[*b as usize];
    }
}

fn shift_rows(state: &mut [u8; BLOCK_LEN]) {
    let s = *state;
    for r in 1..4 {
        for c in 0..4 {
            state[4 * c + r] = s[4 * ((c + r) % 4) + r];
        }
    }
}

fn inv_shift_rows(state: &mut [u8; BLOCK_LEN]) {
    let s = *state;
    for r in 1..4 {
        for c in 0..4 {
            state[4 * ((c + r) % 4) + r] = s[4 * c + r];
        }
    }
}

fn mix_columns(state: &mut [u8; BLOCK_LEN]) {
    for c in 0..4 {
        let col: [u8; 4] = state[4 * c..4 * c + 4].try_into().unwrap();
        state[4 * c] = gf_mul(col[0], 2) ^ gf_mul(col[1], 3) ^ col[2] ^ col[3];
        state[4 * c + 1] = col[0] ^ gf_mul(col[1], 2) ^ gf_mul(col[2], 3) ^ col[3];
        state[4 * c + 2] = col[0] ^ col[1] ^ gf_mul(col[2], 2) ^ gf_mul(col[3], 3);
        state[4 * c + 3] = gf_mul(col[0], 3) ^ col[1] ^ col[2] ^ gf_mul(col[3], 2);
    }
}

fn inv_mix_columns(state: &mut [u8; BLOCK_LEN]) {
    for c in 0..4 {
        let col: [u8; 4] = state[4 * c..4 * c + 4].try_into().unwrap();
        state[4 * c] = gf_mul(col[0], 0x0e)
            ^ gf_mul(col[1], 0x0b)
            ^ gf_mul(col[2], 0x0d)
            ^ gf_mul(col[3], 0x09);
        state[4 * c + 1] = gf_mul(col[0], 0x09)
            ^ gf_mul(col[1], 0x0e)
            ^ gf_mul(col[2], 0x0b)
            ^ gf_mul(col[3], 0x0d);
        state[4 * c + 2] = gf_mul(col[0], 0x0d)
            ^ gf_mul(col[1], 0x09)
            ^ gf_mul(col[2], 0x0e)
            ^ gf_mul(col[3], 0x0b);
        state[4 * c + 3] = gf_mul(col[0], 0x0b)
            ^ gf_mul(col[1], 0x0d)
            ^ gf_mul(col[2], 0x09)
            ^ gf_mul(col[3], 0x0e);
    }
}

/// Forward cipher on one 16-byte block.
pub fn block_encrypt(key: &BlockKey, block: &[u8]) -> Result<[u8; BLOCK_LEN], CipherError> {
    let mut state: [u8; BLOCK_LEN] = block
        .try_into()
        .map_err(|_| CipherError::BadBlockLength(block.len()))?;
    let w = &key.round_keys;
    add_round_key(&mut state, &w[0..4]);
    for round in 1..ROUNDS {
        sub_bytes(&mut state);
        shift_rows(&mut state);
        mix_columns(&mut state);
        add_round_key(&mut state, &w[4 * round..4 * round + 4]);
    }
    sub_bytes(&mut state);
    shift_rows(&mut state);
    add_round_key(&mut state, &w[4 * ROUNDS..]);
    Ok(state)
}

/// Inverse cipher on one 16-byte block.
pub fn block_decrypt(key: &BlockKey, block: &[u8]) -> Result<[u8; BLOCK_LEN], CipherError> {
    let mut state: [u8; BLOCK_LEN] = block
        .try_into()
        .map_err(|_| CipherError::BadBlockLength(block.len()))?;
    let w = &key.round_keys;
    add_round_key(&mut state, &w[4 * ROUNDS..]);
    for round in (1..ROUNDS).rev() {
        inv_shift_rows(&mut state);
        inv_sub_bytes(&mut state);
        add_round_key(&mut state, &w[4 * round..4 * round + 4]);
        inv_mix_columns(&mut state);
    }
    inv_shift_rows(&mut state);
    inv_sub_bytes(&mut state);
    add_round_key(&mut state, &w[0..4]);
    Ok(state)
}

/// A CTR-mode ciphertext with its initial counter block. Same length as the
/// plaintext; carries no authenticator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtrEnvelope {
    pub nonce: [u8; BLOCK_LEN],
    pub ciphertext: Vec<u8>,
}

/// Counter block for chunk index `i`: the nonce with its last four bytes
/// incremented big-endian by `i` (wrapping).
fn counter_block(nonce: &[u8; BLOCK_LEN], i: u32) -> [u8; BLOCK_LEN] {
    let mut block = *nonce;
    let low = u32::from_be_bytes(block[12..16].try_into().unwrap());
    block[12..16].copy_from_slice(&low.wrapping_add(i).to_be_bytes());
    block
}

fn ctr_xor(key: &BlockKey, nonce: &[u8; BLOCK_LEN], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    for (i, chunk) in data.chunks(BLOCK_LEN).enumerate() {
        let keystream =
            block_encrypt(key, &counter_block(nonce, i as u32)).expect("counter block is 16 bytes");
        out.extend(chunk.iter().zip(keystream.iter()).map(|(d, k)| d ^ k));
    }
    out
}

/// Encrypts `plaintext` in CTR mode. The caller guarantees the nonce is
/// unique per (key, message); the record layer derives it from epoch and
/// sequence counters, the handshake draws it from the DRBG.
pub fn seal(key: &BlockKey, nonce: [u8; BLOCK_LEN], plaintext: &[u8]) -> CtrEnvelope {
    CtrEnvelope {
        nonce,
        ciphertext: ctr_xor(key, &nonce, plaintext),
    }
}

/// Decrypts an envelope. Total: any byte string "opens", there is no
/// integrity check to fail.
pub fn open(key: &BlockKey, envelope: &CtrEnvelope) -> Vec<u8> {
    ctr_xor(key, &envelope.nonce, &envelope.ciphertext)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hex16(s: &str) -> [u8; 16] {
        hex::decode(s).unwrap().try_into().unwrap()
    }

    // FIPS-197 appendix C.1.
    const KAT_KEY: &str = "000102030405060708090a0b0c0d0e0f";
    const KAT_PT: &str = "00112233445566778899aabbccddeeff";
    const KAT_CT: &str = "69c4e0d86a7b0430d8cdb78070b4c55a";

    #[test]
    fn known_answer_forward() {
        let key = BlockKey::new(hex16(KAT_KEY));
        let ct = block_encrypt(&key, &hex16(KAT_PT)).unwrap();
        assert_eq!(ct, hex16(KAT_CT));
    }

    #[test]
    fn known_answer_inverse() {
        let key = BlockKey::new(hex16(KAT_KEY));
        let pt = block_decrypt(&key, &hex16(KAT_CT)).unwrap();
        assert_eq!(pt, hex16(KAT_PT));
    }

    // FIPS-197 appendix B.
    #[test]
    fn known_answer_appendix_b() {
        let key = BlockKey::new(hex16("2b7e151628aed2a6abf7158809cf4f3c"));
        let ct = block_encrypt(&key, &hex16("3243f6a8885a308d313198a2e0370734")).unwrap();
        assert_eq!(ct, hex16("3925841d02dc09fbdc118597196a0b32"));
    }

    #[test]
    fn wrong_block_length_rejected() {
        let key = BlockKey::new([0; 16]);
        assert_eq!(
            block_encrypt(&key, &[0u8; 15]),
            Err(CipherError::BadBlockLength(15))
        );
        assert_eq!(
            block_decrypt(&key, &[0u8; 17]),
            Err(CipherError::BadBlockLength(17))
        );
        assert!(matches!(
            BlockKey::from_slice(&[1u8; 5]),
            Err(CipherError::BadKeyLength(5))
        ));
    }

    #[test]
    fn all_zero_and_all_ff_round_trip() {
        let key = BlockKey::new(hex16(KAT_KEY));
        for block in [[0u8; 16], [0xffu8; 16]] {
            let ct = block_encrypt(&key, &block).unwrap();
            assert_eq!(block_decrypt(&key, &ct).unwrap(), block);
        }
    }

    #[test]
    fn distinct_blocks_stay_distinct() {
        let key = BlockKey::new(hex16(KAT_KEY));
        let a = block_encrypt(&key, &[1u8; 16]).unwrap();
        let b = block_encrypt(&key, &[2u8; 16]).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn empty_plaintext_seals_to_empty() {
        let key = BlockKey::new([7; 16]);
        let env = seal(&key, [0; 16], b"");
        assert!(env.ciphertext.is_empty());
        assert!(open(&key, &env).is_empty());
    }

    #[test]
    fn ctr_bit_flip_is_positional() {
        let key = BlockKey::new([9; 16]);
        let plaintext = vec![0x5au8; 80];
        let mut env = seal(&key, [3; 16], &plaintext);
        // Flip bit 2 of byte 37; exactly that plaintext bit must flip.
        env.ciphertext[37] ^= 1 << 2;
        let out = open(&key, &env);
        let mut expected = plaintext.clone();
        expected[37] ^= 1 << 2;
        assert_eq!(out, expected);
    }

    #[test]
    fn counter_increments_last_four_bytes_only() {
        let nonce = [0xffu8; 16];
        let next = counter_block(&nonce, 1);
        assert_eq!(&next[..12], &nonce[..12]);
        assert_eq!(&next[12..], &[0, 0, 0, 0]);
    }

    proptest! {
        #[test]
        fn seal_open_round_trip(data in proptest::collection::vec(any::<u8>(), 0..1024),
                                key in any::<[u8; 16]>(),
                                nonce in any::<[u8; 16]>()) {
            let key = BlockKey::new(key);
            let env = seal(&key, nonce, &data);
            prop_assert_eq!(env.ciphertext.len(), data.len());
            prop_assert_eq!(open(&key, &env), data);
        }

        #[test]
        fn keystream_is_deterministic(data in proptest::collection::vec(any::<u8>(), 1..256),
                                      key in any::<[u8; 16]>(),
                                      nonce in any::<[u8; 16]>()) {
            let key = BlockKey::new(key);
            prop_assert_eq!(seal(&key, nonce, &data), seal(&key, nonce, &data));
        }

        #[test]
        fn block_cipher_inverts(block in any::<[u8; 16]>(), key in any::<[u8; 16]>()) {
            let key = BlockKey::new(key);
            let ct = block_encrypt(&key, &block).unwrap();
            prop_assert_eq!(block_decrypt(&key, &ct).unwrap(), block);
        }
    }
}
