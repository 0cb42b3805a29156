use std::collections::{BTreeMap, BTreeSet};

use serde::{de, Deserialize, Deserializer, Serialize};

use crate::attr::AttributeName;
use crate::cert::{Certificate, CommonName};
use crate::time::Timestamp;

/// The relying party's (or wallet's) trust configuration: roots, which
/// authorities are whitelisted per attribute, which intermediaries endorse
/// authorities per attribute, and revoked names.
///
/// Updates return a new store; holders swap the whole value so readers
/// always see one consistent snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TrustStore {
    roots: Vec<Certificate>,
    whitelist: BTreeMap<AttributeName, BTreeSet<CommonName>>,
    endorsers: BTreeMap<AttributeName, BTreeSet<CommonName>>,
    revoked: BTreeMap<CommonName, Timestamp>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum TrustStoreError {
    #[error("root {0} is not self-signed")]
    RootNotSelfSigned(CommonName),
    #[error("root {0} has an invalid self-signature")]
    RootBadSignature(CommonName),
}

impl TrustStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_root(mut self, root: Certificate) -> Result<Self, TrustStoreError> {
        check_root(&root)?;
        if !self.roots.contains(&root) {
            self.roots.push(root);
        }
        Ok(self)
    }

    pub fn with_whitelisted(mut self, attribute: AttributeName, authority: CommonName) -> Self {
        self.whitelist.entry(attribute).or_default().insert(authority);
        self
    }

    pub fn with_endorser(mut self, attribute: AttributeName, endorser: CommonName) -> Self {
        self.endorsers.entry(attribute).or_default().insert(endorser);
        self
    }

    /// Returns a store in which `common_name` is revoked. Idempotent: the
    /// earliest revocation time is kept.
    pub fn revoke(&self, common_name: &CommonName, at: Timestamp) -> TrustStore {
        let mut next = self.clone();
        next.revoked
            .entry(common_name.clone())
            .and_modify(|t| *t = (*t).min(at))
            .or_insert(at);
        next
    }

    pub fn roots(&self) -> &[Certificate] {
        &self.roots
    }

    pub fn is_root(&self, cert: &Certificate) -> bool {
        self.roots.contains(cert)
    }

    pub fn is_revoked(&self, name: &CommonName) -> bool {
        self.revoked.contains_key(name)
    }

    pub fn revoked_at(&self, name: &CommonName) -> Option<Timestamp> {
        self.revoked.get(name).copied()
    }

    pub fn is_whitelisted(&self, attribute: &AttributeName, authority: &CommonName) -> bool {
        self.whitelist
            .get(attribute)
            .is_some_and(|set| set.contains(authority))
    }

    pub fn is_endorser(&self, attribute: &AttributeName, name: &CommonName) -> bool {
        self.endorsers
            .get(attribute)
            .is_some_and(|set| set.contains(name))
    }
}

/// Free-function form of [`TrustStore::revoke`].
pub fn revoke(common_name: &CommonName, store: &TrustStore, at: Timestamp) -> TrustStore {
    store.revoke(common_name, at)
}

fn check_root(root: &Certificate) -> Result<(), TrustStoreError> {
    if !root.is_self_signed() {
        return Err(TrustStoreError::RootNotSelfSigned(
            root.subject_common_name.clone(),
        ));
    }
    if !root.verify_issued_by(&root.sig_public_key) {
        return Err(TrustStoreError::RootBadSignature(
            root.subject_common_name.clone(),
        ));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrustStoreFile {
    roots: Vec<Certificate>,
    whitelist: BTreeMap<AttributeName, BTreeSet<CommonName>>,
    endorsers: BTreeMap<AttributeName, BTreeSet<CommonName>>,
    revoked: BTreeMap<CommonName, Timestamp>,
}

impl<'de> Deserialize<'de> for TrustStore {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = TrustStoreFile::deserialize(d)?;
        for root in &file.roots {
            check_root(root).map_err(de::Error::custom)?;
        }
        Ok(TrustStore {
            roots: file.roots,
            whitelist: file.whitelist,
            endorsers: file.endorsers,
            revoked: file.revoked,
        })
    }
}
