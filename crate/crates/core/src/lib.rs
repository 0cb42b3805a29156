//! Certified identity claims.
//!
//! A relying party asks a subject to prove some attributes. The subject's
//! wallet forwards the request to an attribute authority, which seals the
//! attributes together with the request nonce to the relying party's
//! encryption key and signs the ciphertext. The relying party checks that
//! the authority is trusted for those attributes, verifies the signature,
//! decrypts, and consumes the nonce exactly once.

pub mod aa;
pub mod attr;
pub mod canonical;
pub mod cert;
pub mod claim;
pub mod entropy;
pub mod envelope;
pub mod fsio;
pub mod harness;
pub mod keys;
pub mod party;
pub mod rp;
pub mod signature;
pub mod subject;
pub mod time;
pub mod trust;

pub use attr::{AttributeName, AttributeSet, AttributeValue, ValueType};
pub use cert::{Certificate, CertificateRequest, CommonName};
pub use claim::{
    generate_nonce, issue_cic, verify_cic, CertifiedClaim, ClaimError, ClaimPayload,
    ClaimRequest, Nonce,
};
pub use entropy::{RandomSource, RngFailure};
pub use envelope::{open, seal, Envelope, EnvelopeError};
pub use keys::{KeyPair, KeyUsage, PublicKey};
pub use party::Party;
pub use signature::{sign, verify_sig, Signature};
pub use time::{Clock, Timestamp};
pub use trust::{
    is_authoritative, validate_chain, AttributeSchema, SchemaRegistry, TrustStore,
};
