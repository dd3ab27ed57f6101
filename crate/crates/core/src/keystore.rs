// SPDX-License-Identifier: Apache-2.0

//! Long-term key lifecycle and the group directory of public keys.
//!
//! The long-term key `K` authenticates every handshake by encrypting the DH
//! shares; it is generated from the DRBG and moved between parties as a
//! small binary file. The file is plaintext at rest — distribution and
//! storage are assumed to happen over a secure channel, and the path should
//! be OS-protected. The directory is a line-oriented text file publishing
//! `id = 04<hex point>` entries for Protocol B, matching the trusted-LAN
//! publishing model: human-auditable, no certificates.
//!
//! No operation here ever serializes a private scalar or long-term key into
//! the directory file.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::clock::Timestamp;
use crate::curve::{CurveError, CurveParams, CurvePoint, Scalar};
use crate::drbg::{DrbgError, DrbgState};
use crate::sig::KeyPair;
use crate::symcipher::{BlockKey, KEY_LEN};

const LTK_MAGIC: &[u8; 4] = b"PFSK";
const LTK_VERSION: u8 = 0x01;
const IDENTITY_MAGIC: &[u8; 4] = b"PFID";
const IDENTITY_VERSION: u8 = 0x01;

#[derive(Debug, Error)]
pub enum KeystoreError {
    #[error("bad magic or unsupported version")]
    BadMagic,
    #[error("file has wrong length or a truncated field")]
    BadLength,
    #[error("io failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("id `{0}` already registered")]
    DuplicateId(String),
    #[error("unknown peer `{0}`")]
    UnknownPeer(String),
    #[error("malformed directory: {0}")]
    MalformedDirectory(String),
    #[error("directory is for curve `{expected}`, got `{found}`")]
    WrongCurve { expected: String, found: String },
    #[error("id `{0}` is empty or contains a reserved character")]
    BadId(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Rng(#[from] DrbgError),
}

/// The pre-shared 128-bit group secret. Never logged; the key bytes wipe
/// themselves when dropped.
pub struct LongTermKey {
    key: BlockKey,
    label: String,
    created_at: Timestamp,
}

impl LongTermKey {
    pub fn new(key: BlockKey, label: impl Into<String>, created_at: Timestamp) -> Self {
        Self {
            key,
            label: label.into(),
            created_at,
        }
    }

    pub fn key(&self) -> &BlockKey {
        &self.key
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn created_at(&self) -> Timestamp {
        self.created_at
    }
}

impl fmt::Debug for LongTermKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Label only; key bytes stay out of logs.
        f.debug_struct("LongTermKey")
            .field("label", &self.label)
            .field("created_at", &self.created_at)
            .finish_non_exhaustive()
    }
}

/// Draws 16 fresh bytes from the DRBG.
pub fn generate_ltk(
    rng: &mut DrbgState,
    label: impl Into<String>,
    now: Timestamp,
) -> Result<LongTermKey, DrbgError> {
    let bytes = rng.next_bytes(KEY_LEN)?;
    let key = BlockKey::from_slice(&bytes).expect("drbg returned 16 bytes");
    Ok(LongTermKey::new(key, label, now))
}

/// Writes `PFSK || 0x01 || key || label_len(u8) || label`.
pub fn export_ltk(key: &LongTermKey, path: impl AsRef<Path>) -> Result<(), KeystoreError> {
    let label = key.label.as_bytes();
    assert!(
        label.len() <= u8::MAX as usize,
        "label longer than 255 bytes"
    );
    let mut out = Vec::with_capacity(4 + 1 + KEY_LEN + 1 + label.len());
    out.extend_from_slice(LTK_MAGIC);
    out.push(LTK_VERSION);
    out.extend_from_slice(key.key.bytes());
    out.push(label.len() as u8);
    out.extend_from_slice(label);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

/// Reads a key file back; validates magic, version, and exact length.
pub fn import_ltk(path: impl AsRef<Path>) -> Result<LongTermKey, KeystoreError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 4 + 1 {
        return Err(KeystoreError::BadLength);
    }
    if &bytes[..4] != LTK_MAGIC || bytes[4] != LTK_VERSION {
        return Err(KeystoreError::BadMagic);
    }
    let rest = &bytes[5..];
    if rest.len() < KEY_LEN + 1 {
        return Err(KeystoreError::BadLength);
    }
    let key = BlockKey::from_slice(&rest[..KEY_LEN]).expect("sixteen bytes");
    let label_len = rest[KEY_LEN] as usize;
    let label_bytes = &rest[KEY_LEN + 1..];
    if label_bytes.len() != label_len {
        return Err(KeystoreError::BadLength);
    }
    let label = String::from_utf8(label_bytes.to_vec())
        .map_err(|_| KeystoreError::MalformedDirectory("label is not UTF-8".into()))?;
    // created_at is not part of the file format; unknown on import.
    Ok(LongTermKey::new(key, label, 0))
}

fn validate_id(id: &str) -> Result<(), KeystoreError> {
    if id.is_empty()
        || id.len() > u8::MAX as usize
        || id.contains(['=', '\n', '\r', '#'])
        || id.trim() != id
    {
        return Err(KeystoreError::BadId(id.to_string()));
    }
    Ok(())
}

/// Generates an identity key pair: `d` uniform in `[1, n-1]`, `Q = d G`.
pub fn gen_identity(
    rng: &mut DrbgState,
    params: &CurveParams,
    id: &str,
) -> Result<KeyPair, KeystoreError> {
    validate_id(id)?;
    let private = rng.gen_scalar(params)?;
    Ok(KeyPair::from_private(params, private, id)?)
}

/// Published map from party id to public point, bound to one curve by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupDirectory {
    curve_name: String,
    entries: BTreeMap<String, CurvePoint>,
}

impl GroupDirectory {
    pub fn new(curve_name: impl Into<String>) -> Self {
        Self {
            curve_name: curve_name.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn curve_name(&self) -> &str {
        &self.curve_name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &CurvePoint)> {
        self.entries.iter().map(|(id, point)| (id.as_str(), point))
    }

    /// Registers a public point; the point must live on `params`' curve and
    /// the id must be new.
    pub fn add(
        &mut self,
        params: &CurveParams,
        id: &str,
        point: CurvePoint,
    ) -> Result<(), KeystoreError> {
        validate_id(id)?;
        if params.name() != self.curve_name {
            return Err(KeystoreError::WrongCurve {
                expected: self.curve_name.clone(),
                found: params.name().to_string(),
            });
        }
        if point.is_infinity() || !params.is_on_curve(&point) {
            return Err(KeystoreError::Curve(CurveError::NotOnCurve));
        }
        if self.entries.contains_key(id) {
            return Err(KeystoreError::DuplicateId(id.to_string()));
        }
        self.entries.insert(id.to_string(), point);
        Ok(())
    }

    pub fn lookup(&self, id: &str) -> Result<&CurvePoint, KeystoreError> {
        self.entries
            .get(id)
            .ok_or_else(|| KeystoreError::UnknownPeer(id.to_string()))
    }

    pub fn remove(&mut self, id: &str) -> Result<(), KeystoreError> {
        self.entries
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| KeystoreError::UnknownPeer(id.to_string()))
    }

    /// Renders the line-oriented text form:
    ///
    /// ```text
    /// curve = <name>
    /// alice = 04<hex>
    /// ```
    pub fn to_text(&self, params: &CurveParams) -> String {
        let mut out = String::from("# group directory: public identity points\n");
        out.push_str(&format!("curve = {}\n", self.curve_name));
        for (id, point) in &self.entries {
            out.push_str(&format!(
                "{id} = {}\n",
                hex::encode(params.encode_point(point))
            ));
        }
        out
    }

    pub fn from_text(params: &CurveParams, text: &str) -> Result<Self, KeystoreError> {
        let mut directory: Option<Self> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                KeystoreError::MalformedDirectory(format!(
                    "line {}: expected `id = point`",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let Some(dir) = directory.as_mut() else {
                if key != "curve" {
                    return Err(KeystoreError::MalformedDirectory(
                        "first entry must be `curve = <name>`".into(),
                    ));
                }
                if value != params.name() {
                    return Err(KeystoreError::WrongCurve {
                        expected: value.to_string(),
                        found: params.name().to_string(),
                    });
                }
                directory = Some(Self::new(value));
                continue;
            };
            let bytes = hex::decode(value).map_err(|_| {
                KeystoreError::MalformedDirectory(format!("line {}: bad hex", lineno + 1))
            })?;
            let point = params.decode_point(&bytes)?;
            dir.add(params, key, point)?;
        }
        directory.ok_or_else(|| KeystoreError::MalformedDirectory("missing curve header".into()))
    }

    pub fn save(&self, params: &CurveParams, path: impl AsRef<Path>) -> Result<(), KeystoreError> {
        std::fs::write(path, self.to_text(params))?;
        Ok(())
    }

    pub fn load(params: &CurveParams, path: impl AsRef<Path>) -> Result<Self, KeystoreError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(params, &text)
    }
}

/// Writes a private identity file:
/// `PFID || 0x01 || curve_len(u8) || curve || owner_len(u8) || owner ||
/// scalar_len(u8) || scalar`. CLI plumbing — the directory never sees it.
pub fn export_identity(
    params: &CurveParams,
    keypair: &KeyPair,
    path: impl AsRef<Path>,
) -> Result<(), KeystoreError> {
    let scalar = keypair.private().value()?;
    let scalar_bytes = scalar.to_bytes_be();
    let curve = params.name().as_bytes();
    let owner = keypair.owner().as_bytes();
    assert!(curve.len() <= u8::MAX as usize && owner.len() <= u8::MAX as usize);
    assert!(scalar_bytes.len() <= u8::MAX as usize);

    let mut out = Vec::new();
    out.extend_from_slice(IDENTITY_MAGIC);
    out.push(IDENTITY_VERSION);
    out.push(curve.len() as u8);
    out.extend_from_slice(curve);
    out.push(owner.len() as u8);
    out.extend_from_slice(owner);
    out.push(scalar_bytes.len() as u8);
    out.extend_from_slice(&scalar_bytes);
    std::fs::write(path, out)?;
    Ok(())
}

pub fn import_identity(
    params: &CurveParams,
    path: impl AsRef<Path>,
) -> Result<KeyPair, KeystoreError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 5 {
        return Err(KeystoreError::BadLength);
    }
    if &bytes[..4] != IDENTITY_MAGIC || bytes[4] != IDENTITY_VERSION {
        return Err(KeystoreError::BadMagic);
    }
    let mut cursor = 5usize;
    let mut take = |len: usize| -> Result<&[u8], KeystoreError> {
        let slice = bytes
            .get(cursor..cursor + len)
            .ok_or(KeystoreError::BadLength)?;
        cursor += len;
        Ok(slice)
    };
    let curve_len = take(1)?[0] as usize;
    let curve = String::from_utf8(take(curve_len)?.to_vec())
        .map_err(|_| KeystoreError::MalformedDirectory("curve name is not UTF-8".into()))?;
    let owner_len = take(1)?[0] as usize;
    let owner = String::from_utf8(take(owner_len)?.to_vec())
        .map_err(|_| KeystoreError::MalformedDirectory("owner is not UTF-8".into()))?;
    let scalar_len = take(1)?[0] as usize;
    let scalar_bytes = take(scalar_len)?.to_vec();
    if cursor != bytes.len() {
        return Err(KeystoreError::BadLength);
    }
    if curve != params.name() {
        return Err(KeystoreError::WrongCurve {
            expected: curve,
            found: params.name().to_string(),
        });
    }
    let value = num_bigint::BigUint::from_bytes_be(&scalar_bytes);
    let private = Scalar::from_biguint(&value, params.scalar_len());
    Ok(KeyPair::from_private(params, private, owner)?)
}
