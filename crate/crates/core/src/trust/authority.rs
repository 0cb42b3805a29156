use serde::{Deserialize, Serialize};

use super::chain::{ChainFailure, ChainResult};
use super::schema::{SchemaError, SchemaRegistry};
use super::store::TrustStore;
use crate::attr::AttributeName;
use crate::cert::{Certificate, CommonName};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "via")]
pub enum Grant {
    Whitelist { attribute: AttributeName },
    Endorser { attribute: AttributeName, endorser: CommonName },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AuthorityReason {
    Granted { grants: Vec<Grant> },
    ChainInvalid { failure: Option<ChainFailure> },
    ChainMismatch,
    Revoked { common_name: CommonName },
    NotAuthorized { attribute: AttributeName },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorityDecision {
    pub authoritative: bool,
    pub reason: AuthorityReason,
}

impl AuthorityDecision {
    fn deny(reason: AuthorityReason) -> Self {
        AuthorityDecision {
            authoritative: false,
            reason,
        }
    }
}

/// Decides whether `aa_cert` may certify every attribute in `requested`.
///
/// `chain` must be the [`validate_chain`](super::validate_chain) result for
/// `aa_cert`. Per attribute, the whitelist is consulted first; failing that,
/// any certificate on the chain listed as an endorser for the attribute
/// grants authority.
pub fn is_authoritative(
    aa_cert: &Certificate,
    requested: &[AttributeName],
    store: &TrustStore,
    schema: &SchemaRegistry,
    chain: &ChainResult,
) -> Result<AuthorityDecision, SchemaError> {
    schema.check_names(requested)?;
    if !chain.valid {
        return Ok(AuthorityDecision::deny(AuthorityReason::ChainInvalid {
            failure: chain.failure_reason,
        }));
    }
    if chain.chain.first() != Some(aa_cert) {
        return Ok(AuthorityDecision::deny(AuthorityReason::ChainMismatch));
    }
    // revocation may postdate the chain result
    if let Some(revoked) = chain
        .chain
        .iter()
        .find(|c| store.is_revoked(&c.subject_common_name))
    {
        return Ok(AuthorityDecision::deny(AuthorityReason::Revoked {
            common_name: revoked.subject_common_name.clone(),
        }));
    }
    let mut grants = Vec::with_capacity(requested.len());
    for attribute in requested {
        if store.is_whitelisted(attribute, &aa_cert.subject_common_name) {
            grants.push(Grant::Whitelist {
                attribute: attribute.clone(),
            });
        } else if let Some(endorser) = chain
            .chain
            .iter()
            .find(|c| store.is_endorser(attribute, &c.subject_common_name))
        {
            grants.push(Grant::Endorser {
                attribute: attribute.clone(),
                endorser: endorser.subject_common_name.clone(),
            });
        } else {
            return Ok(AuthorityDecision::deny(AuthorityReason::NotAuthorized {
                attribute: attribute.clone(),
            }));
        }
    }
    Ok(AuthorityDecision {
        authoritative: true,
        reason: AuthorityReason::Granted { grants },
    })
}
