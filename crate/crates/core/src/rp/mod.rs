//! Relying party: mints requests and runs the acceptance pipeline on claims
//! submitted against them.

mod registry;

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

pub use registry::{ConsumeOutcome, NonceRegistry, NonceReuse, NonceStatus, DEFAULT_TTL_SECONDS};

use crate::attr::{AttributeName, AttributeSet};
use crate::canonical;
use crate::cert::{Certificate, CommonName};
use crate::claim::{
    generate_nonce, verify_cic, CertifiedClaim, ClaimError, ClaimRequest, Nonce, RequestError,
};
use crate::entropy::{RandomSource, RngFailure};
use crate::keys::{KeyPair, KeyUsage};
use crate::time::Timestamp;
use crate::trust::{is_authoritative, validate_chain, SchemaError, SchemaRegistry, TrustStore};

/// HTTP header carrying the request nonce alongside a submitted claim, so
/// the relying party can find the recorded description before it decrypts.
pub const NONCE_HEADER: &str = "Cic-Request-Nonce";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    UntrustedAuthority,
    BadSignature,
    Undecryptable,
    NonceMismatch,
    NonceUnknown,
    NonceReplayed,
    Expired,
    /// The decrypted attribute names differ from the request description.
    DescriptionMismatch,
    /// The submission could not be parsed.
    Malformed,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = serde_json::to_value(self).expect("unit variant");
        f.write_str(v.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationResult {
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<AttributeSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

impl VerificationResult {
    pub fn accepted(attributes: AttributeSet) -> Self {
        VerificationResult {
            accepted: true,
            attributes: Some(attributes),
            failure: None,
        }
    }

    pub fn rejected(failure: Failure) -> Self {
        VerificationResult {
            accepted: false,
            attributes: None,
            failure: Some(failure),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CreateRequestError {
    #[error("unknown attribute {0}")]
    UnknownAttribute(AttributeName),
    #[error(transparent)]
    Invalid(#[from] RequestError),
    #[error(transparent)]
    Rng(#[from] RngFailure),
    #[error("random source produced a nonce that is still registered")]
    NonceReuse,
}

/// Records a fresh request in `registry`.
pub fn create_request(
    attrs: &[AttributeName],
    purpose: Option<String>,
    registry: &NonceRegistry,
    schema: &SchemaRegistry,
    rp_cert: &Certificate,
    now: Timestamp,
    rng: &mut dyn RandomSource,
) -> Result<ClaimRequest, CreateRequestError> {
    let request = ClaimRequest {
        description: attrs.to_vec(),
        purpose,
        nonce: Nonce([0; 16]),
        rp_certificate: rp_cert.clone(),
    };
    request.validate()?;
    schema.check_names(attrs).map_err(|e| match e {
        SchemaError::UnknownAttribute(n) => CreateRequestError::UnknownAttribute(n),
        other => unreachable!("check_names only reports unknown names: {other}"),
    })?;
    let nonce = generate_nonce(rng)?;
    registry
        .register(nonce, attrs.to_vec(), now)
        .map_err(|NonceReuse| CreateRequestError::NonceReuse)?;
    Ok(ClaimRequest { nonce, ..request })
}

/// Runs the acceptance pipeline for a claim submitted against `handle`.
///
/// Order: nonce lookup, trust in the issuing authority for the recorded
/// description, signature, decryption and nonce binding, description
/// match, then the single consuming step.
pub fn accept_claim(
    handle: &Nonce,
    claim: &CertifiedClaim,
    registry: &NonceRegistry,
    store: &TrustStore,
    schema: &SchemaRegistry,
    rp_enc: &KeyPair,
    now: Timestamp,
) -> VerificationResult {
    let description = match registry.status(handle, now) {
        NonceStatus::Pending { description } => description,
        NonceStatus::Consumed => return VerificationResult::rejected(Failure::NonceReplayed),
        NonceStatus::Expired => return VerificationResult::rejected(Failure::Expired),
        NonceStatus::Unknown => return VerificationResult::rejected(Failure::NonceUnknown),
    };

    let chain = validate_chain(&claim.aa_certificate, &claim.aa_intermediates, store, now);
    let trusted = is_authoritative(&claim.aa_certificate, &description, store, schema, &chain)
        .is_ok_and(|d| d.authoritative);
    if !trusted {
        return VerificationResult::rejected(Failure::UntrustedAuthority);
    }

    let attributes = match verify_cic(claim, handle, rp_enc) {
        Ok(a) => a,
        Err(ClaimError::BadSignature) => {
            return VerificationResult::rejected(Failure::BadSignature)
        }
        Err(ClaimError::NonceMismatch) => {
            return VerificationResult::rejected(Failure::NonceMismatch)
        }
        Err(_) => {
            return VerificationResult::rejected(Failure::Undecryptable)
        }
    };

    if !attributes.names().eq(sorted(&description)) {
        return VerificationResult::rejected(Failure::DescriptionMismatch);
    }

    match registry.consume(handle, now) {
        ConsumeOutcome::Consumed => VerificationResult::accepted(attributes),
        ConsumeOutcome::AlreadyConsumed => VerificationResult::rejected(Failure::NonceReplayed),
        ConsumeOutcome::Expired => VerificationResult::rejected(Failure::Expired),
        ConsumeOutcome::Unknown => VerificationResult::rejected(Failure::NonceUnknown),
    }
}

fn sorted(names: &[AttributeName]) -> Vec<&AttributeName> {
    let mut v: Vec<_> = names.iter().collect();
    v.sort();
    v
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RpSetupError {
    #[error("encryption key does not match the certificate")]
    KeyMismatch,
    #[error("key pair is not an encryption key")]
    WrongUsage,
}

/// A relying party with its keys, trust configuration and nonce registry.
#[derive(Debug)]
pub struct RelyingParty {
    certificate: Certificate,
    enc_keys: KeyPair,
    schema: SchemaRegistry,
    trust: RwLock<Arc<TrustStore>>,
    registry: NonceRegistry,
}

impl RelyingParty {
    pub fn new(
        certificate: Certificate,
        enc_keys: KeyPair,
        schema: SchemaRegistry,
        trust: TrustStore,
        ttl_seconds: i64,
    ) -> Result<Self, RpSetupError> {
        if enc_keys.usage() != KeyUsage::Encryption {
            return Err(RpSetupError::WrongUsage);
        }
        if enc_keys.public() != certificate.enc_public_key {
            return Err(RpSetupError::KeyMismatch);
        }
        Ok(RelyingParty {
            certificate,
            enc_keys,
            schema,
            trust: RwLock::new(Arc::new(trust)),
            registry: NonceRegistry::new(ttl_seconds),
        })
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn name(&self) -> &CommonName {
        &self.certificate.subject_common_name
    }

    pub fn schema(&self) -> &SchemaRegistry {
        &self.schema
    }

    pub fn registry(&self) -> &NonceRegistry {
        &self.registry
    }

    pub fn trust_store(&self) -> Arc<TrustStore> {
        self.trust.read().expect("trust lock poisoned").clone()
    }

    pub fn replace_trust_store(&self, store: TrustStore) {
        *self.trust.write().expect("trust lock poisoned") = Arc::new(store);
    }

    pub fn revoke(&self, name: &CommonName, at: Timestamp) {
        let mut guard = self.trust.write().expect("trust lock poisoned");
        *guard = Arc::new(guard.revoke(name, at));
    }

    pub fn create_request(
        &self,
        attrs: &[AttributeName],
        purpose: Option<String>,
        now: Timestamp,
        rng: &mut dyn RandomSource,
    ) -> Result<ClaimRequest, CreateRequestError> {
        create_request(
            attrs,
            purpose,
            &self.registry,
            &self.schema,
            &self.certificate,
            now,
            rng,
        )
    }

    pub fn accept_claim(
        &self,
        handle: &Nonce,
        claim: &CertifiedClaim,
        now: Timestamp,
    ) -> VerificationResult {
        accept_claim(
            handle,
            claim,
            &self.registry,
            &self.trust_store(),
            &self.schema,
            &self.enc_keys,
            now,
        )
    }

    /// Parses a canonical claim strictly, then runs [`accept_claim`].
    pub fn accept_submission(
        &self,
        handle: &Nonce,
        body: &[u8],
        now: Timestamp,
    ) -> VerificationResult {
        match canonical::decode::<CertifiedClaim>(body) {
            Ok(claim) => self.accept_claim(handle, &claim, now),
            Err(_) => VerificationResult::rejected(Failure::Malformed),
        }
    }

    pub fn evict_expired(&self, now: Timestamp) -> usize {
        self.registry.evict_expired(now)
    }
}
