//! Sign-then-encrypt: the authority signs the plaintext payload and seals
//! payload and signature together. Reachable only from the
//! `sign_then_encrypt_weakness` scenario.

use serde::{Deserialize, Serialize};

use crate::attr::AttributeSet;
use crate::canonical;
use crate::cert::Certificate;
use crate::claim::{ClaimPayload, Nonce};
use crate::entropy::RandomSource;
use crate::envelope::{open_bytes, seal_bytes, Envelope};
use crate::keys::{KeyPair, PublicKey};
use crate::rp::{ConsumeOutcome, Failure, NonceRegistry, NonceStatus, VerificationResult};
use crate::signature::{sign, verify_sig, Signature};
use crate::time::Timestamp;
use crate::trust::{is_authoritative, validate_chain, SchemaRegistry, TrustStore};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(super) struct SignedPayload {
    pub payload: ClaimPayload,
    pub aa_signature: Signature,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(super) struct WeakClaim {
    pub envelope: Envelope,
    pub aa_certificate: Certificate,
}

impl WeakClaim {
    pub fn to_canonical(&self) -> Vec<u8> {
        canonical::encode(self).expect("weak claims encode")
    }
}

pub(super) fn issue(
    attributes: &AttributeSet,
    nonce: Nonce,
    rp_enc_pub: &PublicKey,
    aa_sign: &KeyPair,
    aa_cert: &Certificate,
    issued_at: Timestamp,
    rng: &mut dyn RandomSource,
) -> WeakClaim {
    let payload = ClaimPayload {
        attributes: attributes.clone(),
        nonce,
        issued_at,
    };
    let aa_signature =
        sign(&canonical::encode(&payload).expect("payload encodes"), aa_sign).expect("signing key");
    let inner = canonical::encode(&SignedPayload {
        payload,
        aa_signature,
    })
    .expect("signed payload encodes");
    WeakClaim {
        envelope: seal_bytes(&inner, rp_enc_pub, rng).expect("seal"),
        aa_certificate: aa_cert.clone(),
    }
}

/// What a relying party that received the claim can do: open it and seal
/// the still-signed payload to someone else.
pub(super) fn reseal(
    claim: &WeakClaim,
    holder: &KeyPair,
    target: &PublicKey,
    rng: &mut dyn RandomSource,
) -> Option<WeakClaim> {
    let inner = open_bytes(&claim.envelope, holder).ok()?;
    Some(WeakClaim {
        envelope: seal_bytes(&inner, target, rng).ok()?,
        aa_certificate: claim.aa_certificate.clone(),
    })
}

/// The weakened relying-party pipeline; same stages as the standard one
/// with the signature checked after decryption.
pub(super) fn accept(
    handle: &Nonce,
    claim: &WeakClaim,
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
    let chain = validate_chain(&claim.aa_certificate, &[], store, now);
    if !is_authoritative(&claim.aa_certificate, &description, store, schema, &chain)
        .is_ok_and(|d| d.authoritative)
    {
        return VerificationResult::rejected(Failure::UntrustedAuthority);
    }
    let Ok(inner) = open_bytes(&claim.envelope, rp_enc) else {
        return VerificationResult::rejected(Failure::Undecryptable);
    };
    let Ok(signed) = canonical::decode::<SignedPayload>(&inner) else {
        return VerificationResult::rejected(Failure::Undecryptable);
    };
    let payload_bytes = canonical::encode(&signed.payload).expect("payload encodes");
    if !verify_sig(
        &payload_bytes,
        &signed.aa_signature,
        &claim.aa_certificate.sig_public_key,
    ) {
        return VerificationResult::rejected(Failure::BadSignature);
    }
    if signed.payload.nonce != *handle {
        return VerificationResult::rejected(Failure::NonceMismatch);
    }
    match registry.consume(handle, now) {
        ConsumeOutcome::Consumed => VerificationResult::accepted(signed.payload.attributes),
        ConsumeOutcome::AlreadyConsumed => VerificationResult::rejected(Failure::NonceReplayed),
        ConsumeOutcome::Expired => VerificationResult::rejected(Failure::Expired),
        ConsumeOutcome::Unknown => VerificationResult::rejected(Failure::NonceUnknown),
    }
}
