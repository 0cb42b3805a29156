//! Claim requests and certified identity claims.
//!
//! Issuance seals the attributes and the request nonce to the relying party
//! first and signs the resulting envelope second. Verification runs in the
//! reverse order: signature over the envelope, then decryption, then the
//! nonce comparison.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::attr::{AttributeName, AttributeSet};
use crate::canonical::{self, b64};
use crate::cert::Certificate;
use crate::entropy::{RandomSource, RngFailure};
use crate::envelope::{self, Envelope, EnvelopeError};
use crate::keys::{KeyPair, PublicKey};
use crate::signature::{self, Signature, SigningError};
use crate::time::Timestamp;

pub const NONCE_LEN: usize = 16;
pub const MAX_PURPOSE_LEN: usize = 512;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Nonce(pub [u8; NONCE_LEN]);

impl Nonce {
    pub fn to_b64(&self) -> String {
        b64::encode(&self.0)
    }

    pub fn from_b64(text: &str) -> Option<Nonce> {
        let raw = b64::decode(text).ok()?;
        raw.try_into().ok().map(Nonce)
    }
}

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", self.to_b64())
    }
}

impl fmt::Display for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_b64())
    }
}

impl Serialize for Nonce {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        b64::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Nonce {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        b64::array::deserialize(d).map(Nonce)
    }
}

pub fn generate_nonce(rng: &mut dyn RandomSource) -> Result<Nonce, RngFailure> {
    let mut bytes = [0u8; NONCE_LEN];
    rng.fill(&mut bytes)?;
    Ok(Nonce(bytes))
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum RequestError {
    #[error("request description is empty")]
    EmptyDescription,
    #[error("attribute {0} requested more than once")]
    DuplicateAttribute(AttributeName),
    #[error("purpose exceeds {MAX_PURPOSE_LEN} bytes")]
    PurposeTooLong,
}

/// Description, nonce and relying-party certificate, plus an optional purpose
/// shown to the subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimRequest {
    pub description: Vec<AttributeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    pub nonce: Nonce,
    pub rp_certificate: Certificate,
}

impl ClaimRequest {
    pub fn validate(&self) -> Result<(), RequestError> {
        validate_description(&self.description)?;
        if self.purpose.as_ref().is_some_and(|p| p.len() > MAX_PURPOSE_LEN) {
            return Err(RequestError::PurposeTooLong);
        }
        Ok(())
    }

    pub fn to_canonical(&self) -> Vec<u8> {
        canonical::encode(self).expect("requests always encode")
    }
}

pub fn validate_description(description: &[AttributeName]) -> Result<(), RequestError> {
    if description.is_empty() {
        return Err(RequestError::EmptyDescription);
    }
    let mut seen = BTreeSet::new();
    for name in description {
        if !seen.insert(name) {
            return Err(RequestError::DuplicateAttribute(name.clone()));
        }
    }
    Ok(())
}

/// The plaintext inside a claim's envelope. `issued_at` is audit metadata;
/// freshness rests on the nonce alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimPayload {
    pub attributes: AttributeSet,
    pub nonce: Nonce,
    pub issued_at: Timestamp,
}

/// An authority-signed envelope plus the authority's certificate and any
/// intermediates needed to chain it to a trusted root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifiedClaim {
    pub envelope: Envelope,
    pub aa_signature: Signature,
    pub aa_certificate: Certificate,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aa_intermediates: Vec<Certificate>,
}

impl CertifiedClaim {
    pub fn to_canonical(&self) -> Vec<u8> {
        canonical::encode(self).expect("claims always encode")
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ClaimError {
    #[error("no attributes to certify")]
    EmptyAttributes,
    #[error("signing key does not match the authority certificate")]
    KeyMismatch,
    #[error("authority signature does not verify over the envelope")]
    BadSignature,
    #[error("nonce in claim does not match the expected nonce")]
    NonceMismatch,
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Signing(#[from] SigningError),
}

pub fn envelope_bytes(envelope: &Envelope) -> Vec<u8> {
    canonical::encode(envelope).expect("envelopes always encode")
}

#[allow(clippy::too_many_arguments)]
pub fn issue_cic(
    attributes: &AttributeSet,
    nonce: Nonce,
    rp_enc_pub: &PublicKey,
    aa_sign: &KeyPair,
    aa_cert: &Certificate,
    aa_intermediates: &[Certificate],
    issued_at: Timestamp,
    rng: &mut dyn RandomSource,
) -> Result<CertifiedClaim, ClaimError> {
    if attributes.is_empty() {
        return Err(ClaimError::EmptyAttributes);
    }
    if aa_cert.sig_public_key != aa_sign.public() {
        return Err(ClaimError::KeyMismatch);
    }
    let payload = ClaimPayload {
        attributes: attributes.clone(),
        nonce,
        issued_at,
    };
    let envelope = envelope::seal(&payload, rp_enc_pub, rng)?;
    let aa_signature = signature::sign(&envelope_bytes(&envelope), aa_sign)?;
    Ok(CertifiedClaim {
        envelope,
        aa_signature,
        aa_certificate: aa_cert.clone(),
        aa_intermediates: aa_intermediates.to_vec(),
    })
}

/// Trust in `claim.aa_certificate` must already have been established by the caller.
pub fn verify_cic(
    claim: &CertifiedClaim,
    expected_nonce: &Nonce,
    rp_enc: &KeyPair,
) -> Result<AttributeSet, ClaimError> {
    if !signature::verify_sig(
        &envelope_bytes(&claim.envelope),
        &claim.aa_signature,
        &claim.aa_certificate.sig_public_key,
    ) {
        return Err(ClaimError::BadSignature);
    }
    let payload = envelope::open(&claim.envelope, rp_enc)?;
    if payload.nonce != *expected_nonce {
        return Err(ClaimError::NonceMismatch);
    }
    Ok(payload.attributes)
}
