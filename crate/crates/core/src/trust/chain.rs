use serde::{Deserialize, Serialize};

use super::store::TrustStore;
use crate::cert::Certificate;
use crate::time::Timestamp;

/// Longest accepted path, leaf and root included.
pub const MAX_CHAIN_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainFailure {
    Expired,
    BadSignature,
    NoRoot,
    TooDeep,
    Revoked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainResult {
    pub valid: bool,
    /// Leaf first. On failure, the path explored up to the first failure.
    pub chain: Vec<Certificate>,
    pub failure_reason: Option<ChainFailure>,
}

/// Searches for an issuer path from `leaf` to one of the store's roots.
///
/// Issuers are matched by common name among the roots and `intermediates`;
/// when several candidates share a name each is tried in turn. Every member
/// of the accepted path is inside its validity window at `now`, carries a
/// signature that verifies under its parent's key, and is not revoked.
pub fn validate_chain(
    leaf: &Certificate,
    intermediates: &[Certificate],
    store: &TrustStore,
    now: Timestamp,
) -> ChainResult {
    let mut path = vec![leaf.clone()];
    let mut first_failure: Option<(ChainFailure, Vec<Certificate>)> = None;
    if extend(&mut path, intermediates, store, now, &mut first_failure) {
        ChainResult {
            valid: true,
            chain: path,
            failure_reason: None,
        }
    } else {
        let (reason, chain) = first_failure.unwrap_or((ChainFailure::NoRoot, path));
        ChainResult {
            valid: false,
            chain,
            failure_reason: Some(reason),
        }
    }
}

fn extend(
    path: &mut Vec<Certificate>,
    intermediates: &[Certificate],
    store: &TrustStore,
    now: Timestamp,
    first_failure: &mut Option<(ChainFailure, Vec<Certificate>)>,
) -> bool {
    let current = path.last().expect("path is never empty").clone();
    if store.is_revoked(&current.subject_common_name) {
        return record(first_failure, ChainFailure::Revoked, path);
    }
    if !current.is_valid_at(now) {
        return record(first_failure, ChainFailure::Expired, path);
    }
    if current.is_self_signed() {
        return if !store.is_root(&current) {
            record(first_failure, ChainFailure::NoRoot, path)
        } else if !current.verify_issued_by(&current.sig_public_key) {
            record(first_failure, ChainFailure::BadSignature, path)
        } else {
            true
        };
    }
    if path.len() >= MAX_CHAIN_LEN {
        return record(first_failure, ChainFailure::TooDeep, path);
    }
    let candidates: Vec<&Certificate> = store
        .roots()
        .iter()
        .chain(intermediates)
        .filter(|c| c.subject_common_name == current.issuer_common_name && !path.contains(c))
        .collect();
    if candidates.is_empty() {
        return record(first_failure, ChainFailure::NoRoot, path);
    }
    for issuer in candidates {
        if !current.verify_issued_by(&issuer.sig_public_key) {
            record(first_failure, ChainFailure::BadSignature, path);
            continue;
        }
        path.push(issuer.clone());
        if extend(path, intermediates, store, now, first_failure) {
            return true;
        }
        path.pop();
    }
    false
}

fn record(
    first_failure: &mut Option<(ChainFailure, Vec<Certificate>)>,
    reason: ChainFailure,
    path: &[Certificate],
) -> bool {
    first_failure.get_or_insert_with(|| (reason, path.to_vec()));
    false
}
