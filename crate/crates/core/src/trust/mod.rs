//! Trust decisions: which attribute authorities a relying party accepts for
//! which attributes.

mod authority;
mod chain;
mod schema;
mod store;

pub use authority::{is_authoritative, AuthorityDecision, AuthorityReason, Grant};
pub use chain::{validate_chain, ChainFailure, ChainResult, MAX_CHAIN_LEN};
pub use schema::{AttributeSchema, SchemaError, SchemaRegistry};
pub use store::{revoke, TrustStore, TrustStoreError};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::{names, AttributeName, ValueType};
    use crate::canonical;
    use crate::cert::CommonName;
    use crate::entropy::SeededRandom;
    use crate::party::Party;
    use crate::time::Timestamp;

    const T0: Timestamp = Timestamp::from_unix(1_700_000_000);
    const T_END: Timestamp = Timestamp::from_unix(1_900_000_000);
    const NOW: Timestamp = Timestamp::from_unix(1_767_225_600);

    fn cn(s: &str) -> CommonName {
        CommonName::new(s).unwrap()
    }

    fn attr(s: &str) -> AttributeName {
        AttributeName::new(s).unwrap()
    }

    struct Pki {
        root: Party,
        aba: Party,
        bank: Party,
        smallbank: Party,
        rng: SeededRandom,
    }

    fn pki() -> Pki {
        let mut rng = SeededRandom::new(99);
        let root = Party::root(cn("root.example"), &mut rng, T0, T_END).unwrap();
        let aba = Party::issued_by(cn("aba.org"), &root, &mut rng, T0, T_END).unwrap();
        let bank =
            Party::issued_by(cn("bankofamerica.com"), &root, &mut rng, T0, T_END).unwrap();
        let smallbank =
            Party::issued_by(cn("smallbank.example"), &aba, &mut rng, T0, T_END).unwrap();
        Pki {
            root,
            aba,
            bank,
            smallbank,
            rng,
        }
    }

    fn schema() -> SchemaRegistry {
        SchemaRegistry::new([
            AttributeSchema::new("name", ValueType::Text, "Name"),
            AttributeSchema::new("credit_score", ValueType::Integer, "Credit score"),
            AttributeSchema::new("bank_balance", ValueType::Integer, "Bank balance"),
        ])
        .unwrap()
    }

    fn store(p: &Pki) -> TrustStore {
        TrustStore::new()
            .with_root(p.root.cert.clone())
            .unwrap()
            .with_whitelisted(attr("bank_balance"), cn("bankofamerica.com"))
            .with_whitelisted(attr("credit_score"), cn("bankofamerica.com"))
            .with_endorser(attr("bank_balance"), cn("aba.org"))
    }

    #[test]
    fn direct_child_of_root() {
        let p = pki();
        let r = validate_chain(&p.bank.cert, &[], &store(&p), NOW);
        assert!(r.valid);
        assert_eq!(r.chain.len(), 2);
        assert_eq!(r.failure_reason, None);
    }

    #[test]
    fn expired_leaf() {
        let mut p = pki();
        let old = Party::issued_by(
            cn("old.example"),
            &p.root,
            &mut p.rng,
            T0,
            Timestamp::from_unix(1_750_000_000),
        )
        .unwrap();
        let r = validate_chain(&old.cert, &[], &store(&p), NOW);
        assert!(!r.valid);
        assert_eq!(r.failure_reason, Some(ChainFailure::Expired));
    }

    #[test]
    fn three_cert_chain_and_revoked_intermediate() {
        let p = pki();
        let s = store(&p);
        let ok = validate_chain(&p.smallbank.cert, std::slice::from_ref(&p.aba.cert), &s, NOW);
        assert!(ok.valid);
        assert_eq!(ok.chain.len(), 3);
        let names: Vec<_> = ok.chain.iter().map(|c| c.subject_common_name.as_str()).collect();
        assert_eq!(names, ["smallbank.example", "aba.org", "root.example"]);

        let revoked = s.revoke(&cn("aba.org"), NOW);
        let r = validate_chain(&p.smallbank.cert, std::slice::from_ref(&p.aba.cert), &revoked, NOW);
        assert!(!r.valid);
        assert_eq!(r.failure_reason, Some(ChainFailure::Revoked));
    }

    #[test]
    fn missing_intermediate_and_unknown_root() {
        let mut p = pki();
        let r = validate_chain(&p.smallbank.cert, &[], &store(&p), NOW);
        assert_eq!(r.failure_reason, Some(ChainFailure::NoRoot));
        let rogue = Party::root(cn("rogue.example"), &mut p.rng, T0, T_END).unwrap();
        let r = validate_chain(&rogue.cert, &[], &store(&p), NOW);
        assert_eq!(r.failure_reason, Some(ChainFailure::NoRoot));
    }

    #[test]
    fn impostor_intermediate_with_same_name() {
        let mut p = pki();
        let fake_root = Party::root(cn("root.example"), &mut p.rng, T0, T_END).unwrap();
        let fake_aba =
            Party::issued_by(cn("aba.org"), &fake_root, &mut p.rng, T0, T_END).unwrap();
        let r = validate_chain(&p.smallbank.cert, std::slice::from_ref(&fake_aba.cert), &store(&p), NOW);
        assert_eq!(r.failure_reason, Some(ChainFailure::BadSignature));
        // the genuine one is still found when both are offered
        let r = validate_chain(
            &p.smallbank.cert,
            &[fake_aba.cert, p.aba.cert.clone()],
            &store(&p),
            NOW,
        );
        assert!(r.valid);
    }

    #[test]
    fn depth_limit() {
        let mut p = pki();
        let i1 = Party::issued_by(cn("i1.example"), &p.root, &mut p.rng, T0, T_END).unwrap();
        let i2 = Party::issued_by(cn("i2.example"), &i1, &mut p.rng, T0, T_END).unwrap();
        let i3 = Party::issued_by(cn("i3.example"), &i2, &mut p.rng, T0, T_END).unwrap();
        let leaf = Party::issued_by(cn("leaf.example"), &i3, &mut p.rng, T0, T_END).unwrap();
        let inter = [i1.cert.clone(), i2.cert.clone(), i3.cert.clone()];
        let r = validate_chain(&leaf.cert, &inter, &store(&p), NOW);
        assert_eq!(r.failure_reason, Some(ChainFailure::TooDeep));
        let r = validate_chain(&i3.cert, &inter, &store(&p), NOW);
        assert!(r.valid);
        assert_eq!(r.chain.len(), MAX_CHAIN_LEN);
    }

    #[test]
    fn root_alone_is_a_valid_chain() {
        let p = pki();
        let r = validate_chain(&p.root.cert, &[], &store(&p), NOW);
        assert!(r.valid);
        assert_eq!(r.chain.len(), 1);
    }

    #[test]
    fn whitelisted_authority() {
        let p = pki();
        let s = store(&p);
        let chain = validate_chain(&p.bank.cert, &[], &s, NOW);
        let d = is_authoritative(
            &p.bank.cert,
            &names(["bank_balance"]).unwrap(),
            &s,
            &schema(),
            &chain,
        )
        .unwrap();
        assert!(d.authoritative);
        assert!(matches!(d.reason, AuthorityReason::Granted { ref grants }
            if matches!(grants[0], Grant::Whitelist { .. })));
    }

    #[test]
    fn empty_policy_denies() {
        let p = pki();
        let s = TrustStore::new().with_root(p.root.cert.clone()).unwrap();
        let chain = validate_chain(&p.bank.cert, &[], &s, NOW);
        for req in [vec!["name"], vec!["bank_balance", "credit_score"]] {
            let d = is_authoritative(&p.bank.cert, &names(req).unwrap(), &s, &schema(), &chain)
                .unwrap();
            assert!(!d.authoritative);
        }
    }

    #[test]
    fn endorsed_through_intermediate() {
        let p = pki();
        let s = store(&p);
        let chain = validate_chain(&p.smallbank.cert, std::slice::from_ref(&p.aba.cert), &s, NOW);
        let d = is_authoritative(
            &p.smallbank.cert,
            &names(["bank_balance"]).unwrap(),
            &s,
            &schema(),
            &chain,
        )
        .unwrap();
        assert!(d.authoritative);
        assert_eq!(
            d.reason,
            AuthorityReason::Granted {
                grants: vec![Grant::Endorser {
                    attribute: attr("bank_balance"),
                    endorser: cn("aba.org"),
                }]
            }
        );
        // endorsement is per attribute
        let d = is_authoritative(
            &p.smallbank.cert,
            &names(["credit_score"]).unwrap(),
            &s,
            &schema(),
            &chain,
        )
        .unwrap();
        assert!(!d.authoritative);
    }

    #[test]
    fn unknown_attribute_is_an_error() {
        let p = pki();
        let s = store(&p);
        let chain = validate_chain(&p.bank.cert, &[], &s, NOW);
        assert!(matches!(
            is_authoritative(&p.bank.cert, &names(["ssn"]).unwrap(), &s, &schema(), &chain),
            Err(SchemaError::UnknownAttribute(_))
        ));
    }

    #[test]
    fn revocation_after_chain_check_still_denies() {
        let p = pki();
        let s = store(&p);
        let chain = validate_chain(&p.bank.cert, &[], &s, NOW);
        let revoked = revoke(&cn("bankofamerica.com"), &s, NOW);
        let req = names(["bank_balance"]).unwrap();
        let d = is_authoritative(&p.bank.cert, &req, &revoked, &schema(), &chain).unwrap();
        assert!(!d.authoritative);
        let fresh = validate_chain(&p.bank.cert, &[], &revoked, NOW);
        assert_eq!(fresh.failure_reason, Some(ChainFailure::Revoked));
    }

    #[test]
    fn revoke_unknown_name_changes_nothing_else() {
        let p = pki();
        let s = store(&p);
        let r = s.revoke(&cn("nobody.example"), NOW);
        assert!(r.is_revoked(&cn("nobody.example")));
        assert!(validate_chain(&p.bank.cert, &[], &r, NOW).valid);
        // idempotent, keeps the earliest time
        let again = r.revoke(&cn("nobody.example"), NOW.plus_seconds(10));
        assert_eq!(again, r);
    }

    #[test]
    fn chain_soundness_links_verify() {
        let p = pki();
        let r = validate_chain(&p.smallbank.cert, std::slice::from_ref(&p.aba.cert), &store(&p), NOW);
        for pair in r.chain.windows(2) {
            assert!(crate::signature::verify_sig(
                &pair[0].tbs_bytes(),
                &pair[0].issuer_signature,
                &pair[1].sig_public_key
            ));
        }
    }

    #[test]
    fn store_file_round_trip_rejects_bad_roots() {
        let p = pki();
        let s = store(&p).revoke(&cn("evil.example"), NOW);
        let bytes = canonical::encode(&s).unwrap();
        let back: TrustStore = canonical::decode(&bytes).unwrap();
        assert_eq!(back, s);

        let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        v["roots"] = serde_json::to_value(vec![p.bank.cert.clone()]).unwrap();
        assert!(serde_json::from_value::<TrustStore>(v).is_err());
    }
}
