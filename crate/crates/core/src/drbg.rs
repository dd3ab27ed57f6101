// SPDX-License-Identifier: Apache-2.0

//! Deterministic random generator whose output is AES ciphertext.
//!
//! The stream is the AES-CTR keystream of an internal key derived from the
//! seed: block `i` of output is `AES(key, counter_i)` with a 128-bit
//! big-endian counter. Determinism under an injected seed is the contract
//! every reproducibility test leans on; production callers seed from the
//! platform's entropy source and get fresh streams.

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use crate::curve::{CurveParams, Scalar};
use crate::symcipher::{block_encrypt, BlockKey, BLOCK_LEN};

/// Blocks a single seed may emit before a reseed is required.
pub const DEFAULT_BLOCK_BUDGET: u64 = 1 << 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DrbgError {
    #[error("seed entropy must be at least {BLOCK_LEN} bytes, got {0}")]
    InsufficientEntropy(usize),
    #[error("block budget exhausted; reseed required")]
    ReseedRequired,
}

pub struct DrbgState {
    key: BlockKey,
    counter: u128,
    blocks_emitted: u64,
    block_budget: u64,
}

impl DrbgState {
    /// Seeds from at least 16 bytes of entropy. The key is the first block
    /// XOR-folded with every remaining block (the final partial block folds
    /// into the key's prefix); the counter starts at zero.
    pub fn seed(entropy: &[u8]) -> Result<Self, DrbgError> {
        Self::with_block_budget(entropy, DEFAULT_BLOCK_BUDGET)
    }

    /// Like [`Self::seed`] with an explicit block budget; tests use small
    /// budgets to drive the reseed path.
    pub fn with_block_budget(entropy: &[u8], block_budget: u64) -> Result<Self, DrbgError> {
        if entropy.len() < BLOCK_LEN {
            return Err(DrbgError::InsufficientEntropy(entropy.len()));
        }
        let mut key = [0u8; BLOCK_LEN];
        key.copy_from_slice(&entropy[..BLOCK_LEN]);
        for chunk in entropy[BLOCK_LEN..].chunks(BLOCK_LEN) {
            for (slot, byte) in key.iter_mut().zip(chunk) {
                *slot ^= byte;
            }
        }
        Ok(Self {
            key: BlockKey::new(key),
            counter: 0,
            blocks_emitted: 0,
            block_budget,
        })
    }

    /// Blocks emitted since seeding.
    pub fn blocks_emitted(&self) -> u64 {
        self.blocks_emitted
    }

    fn next_block(&mut self) -> Result<[u8; BLOCK_LEN], DrbgError> {
        if self.blocks_emitted >= self.block_budget {
            return Err(DrbgError::ReseedRequired);
        }
        let block = block_encrypt(&self.key, &self.counter.to_be_bytes())
            .expect("counter block is 16 bytes");
        self.counter += 1;
        self.blocks_emitted += 1;
        Ok(block)
    }

    /// Draws `len` bytes. Whole blocks are consumed; a trailing partial
    /// block's remainder is discarded, so two 16-byte draws are exactly the
    /// blocks for counters `c` and `c + 1`.
    pub fn next_bytes(&mut self, len: usize) -> Result<Vec<u8>, DrbgError> {
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let block = self.next_block()?;
            let take = (len - out.len()).min(BLOCK_LEN);
            out.extend_from_slice(&block[..take]);
        }
        Ok(out)
    }

    /// Rejection-samples a scalar uniform in `[1, n-1]`: draws of the
    /// order's byte width are retried until one lands in range, so there is
    /// no modular bias.
    pub fn gen_scalar(&mut self, params: &CurveParams) -> Result<Scalar, DrbgError> {
        let width = params.scalar_len();
        loop {
            let draw = self.next_bytes(width)?;
            let value = BigUint::from_bytes_be(&draw);
            if !value.is_zero() && value < *params.order() {
                return Ok(Scalar::from_biguint(&value, width));
            }
        }
    }
}

impl std::fmt::Debug for DrbgState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DrbgState")
            .field("blocks_emitted", &self.blocks_emitted)
            .field("block_budget", &self.block_budget)
            .finish_non_exhaustive()
    }
}

/// Convenience for deriving fixed-width seeds in tests and scenario code.
pub fn seed_from_u64(tag: u64) -> [u8; BLOCK_LEN] {
    let mut seed = [0u8; BLOCK_LEN];
    seed[8..].copy_from_slice(&tag.to_be_bytes());
    seed
}
