//! Signed, expiring EAI-status attestations issued by an off-chain registry operator.
//!
//! The signed message is the Keccak-256 digest of
//! `"EAI-ATTEST-V1" ‖ address ‖ status ‖ expires_at (u64 BE) ‖ nonce (u64 BE)`.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Address;
use crate::keccak256;

pub const DOMAIN_TAG: &[u8] = b"EAI-ATTEST-V1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttestationError {
    #[error("ttl_seconds must be positive")]
    ZeroTtl,
    #[error("expiry overflows u64 seconds")]
    ExpiryOverflow,
    #[error("invalid key material: {0}")]
    BadKey(String),
    #[error("unsupported signature scheme `{0}`")]
    UnsupportedScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ed25519,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Ed25519 => f.write_str("ed25519"),
        }
    }
}

/// Scheme-tagged signature bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSignature {
    pub scheme: Scheme,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub address: Address,
    pub is_eai: bool,
    pub expires_at: u64,
    pub nonce: u64,
    pub signature: TaggedSignature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyOutcome {
    Valid,
    Expired,
    BadSignature,
}

pub fn attestation_digest(address: &Address, is_eai: bool, expires_at: u64, nonce: u64) -> [u8; 32] {
    keccak256(&[DOMAIN_TAG, address.as_bytes(), &[u8::from(is_eai)], &expires_at.to_be_bytes(), &nonce.to_be_bytes()])
}

impl Attestation {
    pub fn digest(&self) -> [u8; 32] {
        attestation_digest(&self.address, self.is_eai, self.expires_at, self.nonce)
    }
}

/// The registry operator's signing key.
pub struct SignerIdentity {
    key: SigningKey,
}

impl SignerIdentity {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        SignerIdentity { key: SigningKey::from_bytes(&seed) }
    }

    /// Parses a 32-byte seed written as hex (optional `0x`, surrounding whitespace ignored).
    pub fn from_seed_hex(s: &str) -> Result<Self, AttestationError> {
        let t = s.trim();
        let t = t.strip_prefix("0x").unwrap_or(t);
        let mut seed = [0u8; 32];
        hex::decode_to_slice(t, &mut seed).map_err(|e| AttestationError::BadKey(e.to_string()))?;
        Ok(Self::from_seed(seed))
    }

    pub fn seed_hex(&self) -> String {
        hex::encode(self.key.to_bytes())
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.key.verifying_key())
    }

    pub fn fingerprint(&self) -> [u8; 8] {
        self.public_key().fingerprint()
    }

    pub fn sign(
        &self,
        address: Address,
        is_eai: bool,
        ttl_seconds: u64,
        nonce: u64,
        now: u64,
    ) -> Result<Attestation, AttestationError> {
        if ttl_seconds == 0 {
            return Err(AttestationError::ZeroTtl);
        }
        let expires_at = now.checked_add(ttl_seconds).ok_or(AttestationError::ExpiryOverflow)?;
        let digest = attestation_digest(&address, is_eai, expires_at, nonce);
        let sig = self.key.sign(&digest);
        Ok(Attestation {
            address,
            is_eai,
            expires_at,
            nonce,
            signature: TaggedSignature { scheme: Scheme::Ed25519, bytes: sig.to_bytes().to_vec() },
        })
    }
}

impl fmt::Debug for SignerIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignerIdentity").field("fingerprint", &hex::encode(self.fingerprint())).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublicKey(VerifyingKey);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Self, AttestationError> {
        VerifyingKey::from_bytes(bytes).map(PublicKey).map_err(|e| AttestationError::BadKey(e.to_string()))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    /// First 8 bytes of Keccak-256 over the public key.
    pub fn fingerprint(&self) -> [u8; 8] {
        let h = keccak256(&[self.0.as_bytes()]);
        h[..8].try_into().expect("8 bytes")
    }

    /// A bad signature is reported even when the attestation has also expired.
    pub fn verify(&self, att: &Attestation, now: u64) -> VerifyOutcome {
        let Scheme::Ed25519 = att.signature.scheme;
        let Ok(sig) = ed25519_dalek::Signature::from_slice(&att.signature.bytes) else {
            return VerifyOutcome::BadSignature;
        };
        if self.0.verify(&att.digest(), &sig).is_err() {
            return VerifyOutcome::BadSignature;
        }
        if now < att.expires_at {
            VerifyOutcome::Valid
        } else {
            VerifyOutcome::Expired
        }
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.to_bytes()))
    }
}

impl FromStr for PublicKey {
    type Err = AttestationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let t = t.strip_prefix("0x").unwrap_or(t);
        let mut b = [0u8; 32];
        hex::decode_to_slice(t, &mut b).map_err(|e| AttestationError::BadKey(e.to_string()))?;
        PublicKey::from_bytes(&b)
    }
}

pub fn verify_attestation(key: &PublicKey, att: &Attestation, now: u64) -> VerifyOutcome {
    key.verify(att, now)
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{}", hex::encode(bytes)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s.strip_prefix("0x").unwrap_or(&s)).map_err(serde::de::Error::custom)
    }
}
