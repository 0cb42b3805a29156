//! Minimal certificates binding a common name to a signature key and an
//! encryption key.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::canonical::{self, CanonicalError};
use crate::keys::{KeyPair, PublicKey};
use crate::signature::{self, Signature, SigningError};
use crate::time::Timestamp;

/// Host-style name: lowercase ASCII letters, digits, `.` and `-`, at most 253 bytes,
/// no empty labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommonName(String);

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("invalid common name {0:?}")]
pub struct InvalidCommonName(pub String);

impl CommonName {
    pub fn new(name: impl Into<String>) -> Result<Self, InvalidCommonName> {
        let name = name.into();
        let ok = !name.is_empty()
            && name.len() <= 253
            && name
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'.' || b == b'-')
            && name.split('.').all(|label| !label.is_empty());
        if ok {
            Ok(CommonName(name))
        } else {
            Err(InvalidCommonName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CommonName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for CommonName {
    type Err = InvalidCommonName;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CommonName::new(s)
    }
}

impl Serialize for CommonName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for CommonName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        CommonName::new(String::deserialize(d)?).map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum CertError {
    #[error("not_before must precede not_after")]
    InvalidValidity,
    #[error("issuer key does not match issuer certificate")]
    IssuerKeyMismatch,
    #[error(transparent)]
    Signing(#[from] SigningError),
    #[error(transparent)]
    Encoding(#[from] CanonicalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CertificateFields")]
pub struct Certificate {
    pub subject_common_name: CommonName,
    pub sig_public_key: PublicKey,
    pub enc_public_key: PublicKey,
    pub issuer_common_name: CommonName,
    pub not_before: Timestamp,
    pub not_after: Timestamp,
    pub issuer_signature: Signature,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateFields {
    subject_common_name: CommonName,
    sig_public_key: PublicKey,
    enc_public_key: PublicKey,
    issuer_common_name: CommonName,
    not_before: Timestamp,
    not_after: Timestamp,
    issuer_signature: Signature,
}

impl TryFrom<CertificateFields> for Certificate {
    type Error = CertError;
    fn try_from(f: CertificateFields) -> Result<Self, Self::Error> {
        if f.not_before >= f.not_after {
            return Err(CertError::InvalidValidity);
        }
        Ok(Certificate {
            subject_common_name: f.subject_common_name,
            sig_public_key: f.sig_public_key,
            enc_public_key: f.enc_public_key,
            issuer_common_name: f.issuer_common_name,
            not_before: f.not_before,
            not_after: f.not_after,
            issuer_signature: f.issuer_signature,
        })
    }
}

/// The signed portion: every field except the issuer signature.
#[derive(Serialize)]
struct TbsCertificate<'a> {
    subject_common_name: &'a CommonName,
    sig_public_key: &'a PublicKey,
    enc_public_key: &'a PublicKey,
    issuer_common_name: &'a CommonName,
    not_before: Timestamp,
    not_after: Timestamp,
}

/// What a certificate will say about its subject.
#[derive(Debug, Clone)]
pub struct CertificateRequest {
    pub common_name: CommonName,
    pub sig_public_key: PublicKey,
    pub enc_public_key: PublicKey,
    pub not_before: Timestamp,
    pub not_after: Timestamp,
}

fn tbs_bytes(
    subject: &CommonName,
    sig: &PublicKey,
    enc: &PublicKey,
    issuer: &CommonName,
    not_before: Timestamp,
    not_after: Timestamp,
) -> Result<Vec<u8>, CanonicalError> {
    canonical::encode(&TbsCertificate {
        subject_common_name: subject,
        sig_public_key: sig,
        enc_public_key: enc,
        issuer_common_name: issuer,
        not_before,
        not_after,
    })
}

impl Certificate {
    /// Root certificate; `signer` must be the subject's own signature key pair.
    pub fn self_signed(
        req: CertificateRequest,
        signer: &KeyPair,
    ) -> Result<Certificate, CertError> {
        if req.sig_public_key != signer.public() {
            return Err(CertError::IssuerKeyMismatch);
        }
        let issuer = req.common_name.clone();
        Self::sign_fields(req, issuer, signer)
    }

    /// Certificate for `req` signed by the holder of `issuer_cert`.
    pub fn issue(
        req: CertificateRequest,
        issuer_cert: &Certificate,
        issuer_keys: &KeyPair,
    ) -> Result<Certificate, CertError> {
        if issuer_cert.sig_public_key != issuer_keys.public() {
            return Err(CertError::IssuerKeyMismatch);
        }
        Self::sign_fields(req, issuer_cert.subject_common_name.clone(), issuer_keys)
    }

    fn sign_fields(
        req: CertificateRequest,
        issuer: CommonName,
        signer: &KeyPair,
    ) -> Result<Certificate, CertError> {
        if req.not_before >= req.not_after {
            return Err(CertError::InvalidValidity);
        }
        let tbs = tbs_bytes(
            &req.common_name,
            &req.sig_public_key,
            &req.enc_public_key,
            &issuer,
            req.not_before,
            req.not_after,
        )?;
        let issuer_signature = signature::sign(&tbs, signer)?;
        Ok(Certificate {
            subject_common_name: req.common_name,
            sig_public_key: req.sig_public_key,
            enc_public_key: req.enc_public_key,
            issuer_common_name: issuer,
            not_before: req.not_before,
            not_after: req.not_after,
            issuer_signature,
        })
    }

    /// Canonical encoding of every field except `issuer_signature`.
    pub fn tbs_bytes(&self) -> Vec<u8> {
        tbs_bytes(
            &self.subject_common_name,
            &self.sig_public_key,
            &self.enc_public_key,
            &self.issuer_common_name,
            self.not_before,
            self.not_after,
        )
        .expect("certificate fields always encode")
    }

    pub fn is_self_signed(&self) -> bool {
        self.subject_common_name == self.issuer_common_name
    }

    pub fn verify_issued_by(&self, issuer_sig_key: &PublicKey) -> bool {
        signature::verify_sig(&self.tbs_bytes(), &self.issuer_signature, issuer_sig_key)
    }

    pub fn is_valid_at(&self, now: Timestamp) -> bool {
        self.not_before <= now && now <= self.not_after
    }
}
