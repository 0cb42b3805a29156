use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attr::AttributeName;
use crate::cert::CommonName;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsentMode {
    #[default]
    Interactive,
    Auto,
}

/// How the wallet decides on requests and how often it lets a relying party
/// learn each attribute.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsentPolicy {
    #[serde(default)]
    pub mode: ConsentMode,
    /// Attributes released without asking, per relying party. Auto mode only.
    #[serde(default)]
    pub auto_allow: BTreeMap<CommonName, BTreeSet<AttributeName>>,
    /// Minimum seconds between grants of an attribute to a relying party.
    #[serde(default)]
    pub throttle: BTreeMap<CommonName, BTreeMap<AttributeName, u64>>,
    #[serde(default)]
    pub last_granted: BTreeMap<CommonName, BTreeMap<AttributeName, Timestamp>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{attribute} was granted to this relying party too recently; retry in {retry_after}s")]
pub struct ThrottleExceeded {
    pub attribute: AttributeName,
    pub retry_after: i64,
}

impl ConsentPolicy {
    pub fn interval(&self, rp: &CommonName, attribute: &AttributeName) -> u64 {
        self.throttle
            .get(rp)
            .and_then(|m| m.get(attribute))
            .copied()
            .unwrap_or(0)
    }

    pub fn check_throttle(
        &self,
        rp: &CommonName,
        attributes: &[AttributeName],
        now: Timestamp,
    ) -> Result<(), ThrottleExceeded> {
        for attribute in attributes {
            let interval = self.interval(rp, attribute) as i64;
            if interval == 0 {
                continue;
            }
            let Some(last) = self.last_granted.get(rp).and_then(|m| m.get(attribute)) else {
                continue;
            };
            let elapsed = now.seconds_since(*last);
            if elapsed < interval {
                return Err(ThrottleExceeded {
                    attribute: attribute.clone(),
                    retry_after: interval - elapsed,
                });
            }
        }
        Ok(())
    }

    pub fn record_grant(&mut self, rp: &CommonName, attributes: &[AttributeName], at: Timestamp) {
        let entry = self.last_granted.entry(rp.clone()).or_default();
        for attribute in attributes {
            entry.insert(attribute.clone(), at);
        }
    }

    pub fn auto_allows(&self, rp: &CommonName, attributes: &[AttributeName]) -> bool {
        self.mode == ConsentMode::Auto
            && self
                .auto_allow
                .get(rp)
                .is_some_and(|set| attributes.iter().all(|a| set.contains(a)))
    }
}

/// Where the wallet obtains each attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AaEntry {
    /// Opaque locator understood by the transport, e.g. a base URL.
    pub endpoint: String,
    /// Credential presented to the authority.
    pub credential: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AaDirectory {
    pub entries: BTreeMap<AttributeName, AaEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DirectoryError {
    #[error("no authority configured for {0}")]
    NoAuthorityConfigured(AttributeName),
    #[error("requested attributes span more than one authority")]
    MultipleAuthorities,
}

impl AaDirectory {
    pub fn with(mut self, attribute: AttributeName, endpoint: &str, credential: &str) -> Self {
        self.entries.insert(
            attribute,
            AaEntry {
                endpoint: endpoint.to_string(),
                credential: credential.to_string(),
            },
        );
        self
    }

    /// The single authority serving every attribute in `attributes`.
    pub fn resolve(&self, attributes: &[AttributeName]) -> Result<&AaEntry, DirectoryError> {
        let mut found: Option<&AaEntry> = None;
        for attribute in attributes {
            let entry = self
                .entries
                .get(attribute)
                .ok_or_else(|| DirectoryError::NoAuthorityConfigured(attribute.clone()))?;
            match found {
                Some(prev) if prev != entry => return Err(DirectoryError::MultipleAuthorities),
                _ => found = Some(entry),
            }
        }
        found.ok_or(DirectoryError::MultipleAuthorities)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::names;

    const T: Timestamp = Timestamp::from_unix(1_767_225_600);

    fn lender() -> CommonName {
        CommonName::new("lender.example").unwrap()
    }

    #[test]
    fn throttle_window() {
        let mut p = ConsentPolicy::default();
        let score = AttributeName::new("credit_score").unwrap();
        p.throttle
            .entry(lender())
            .or_default()
            .insert(score.clone(), 60);
        let attrs = vec![score.clone()];
        assert!(p.check_throttle(&lender(), &attrs, T).is_ok());
        p.record_grant(&lender(), &attrs, T);
        assert_eq!(
            p.check_throttle(&lender(), &attrs, T.plus_seconds(10)),
            Err(ThrottleExceeded {
                attribute: score,
                retry_after: 50
            })
        );
        assert!(p.check_throttle(&lender(), &attrs, T.plus_seconds(60)).is_ok());
        // other relying parties are unaffected
        let shop = CommonName::new("shop.example").unwrap();
        assert!(p.check_throttle(&shop, &attrs, T.plus_seconds(10)).is_ok());
    }

    #[test]
    fn interactive_never_auto_allows() {
        let mut p = ConsentPolicy::default();
        p.auto_allow
            .insert(lender(), names(["name"]).unwrap().into_iter().collect());
        assert!(!p.auto_allows(&lender(), &names(["name"]).unwrap()));
        p.mode = ConsentMode::Auto;
        assert!(p.auto_allows(&lender(), &names(["name"]).unwrap()));
        assert!(!p.auto_allows(&lender(), &names(["name", "ssn"]).unwrap()));
    }

    #[test]
    fn directory_resolution() {
        let d = AaDirectory::default()
            .with(AttributeName::new("name").unwrap(), "http://aa", "t")
            .with(AttributeName::new("credit_score").unwrap(), "http://aa", "t")
            .with(AttributeName::new("bank_balance").unwrap(), "http://other", "u");
        assert_eq!(
            d.resolve(&names(["name", "credit_score"]).unwrap())
                .unwrap()
                .endpoint,
            "http://aa"
        );
        assert_eq!(
            d.resolve(&names(["name", "bank_balance"]).unwrap()),
            Err(DirectoryError::MultipleAuthorities)
        );
        assert_eq!(
            d.resolve(&names(["ssn"]).unwrap()),
            Err(DirectoryError::NoAuthorityConfigured(
                AttributeName::new("ssn").unwrap()
            ))
        );
    }
}
