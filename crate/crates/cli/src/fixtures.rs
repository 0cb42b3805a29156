//! A ready-to-run local deployment: one root, one authority, one relying
//! party and one wallet, keyed from a seed.

use std::path::Path;

use anyhow::{Context, Result};

use cic_core::aa::{AttributeStore, SubjectRecord};
use cic_core::entropy::SeededRandom;
use cic_core::harness::{fixture_schema, john_record, mallory_record, rp_trust, JOHN, MALLORY};
use cic_core::subject::AaDirectory;
use cic_core::{canonical, fsio, CommonName, Party, RandomSource, Timestamp, TrustStore};

use crate::config::{AaConfig, RpConfig, SubjectConfig};

const DAY: i64 = 86_400;

/// Wallet-side credential for the John fixture, as written to `subject.toml`.
pub fn token(rng: &mut SeededRandom, subject: &str) -> Result<String> {
    let bytes: [u8; 16] = rng.array()?;
    Ok(format!("{subject}.{}", canonical::b64::encode(&bytes)))
}

fn toml_file<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, toml::to_string(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn write(dir: &Path, seed: u64, [aa_port, rp_port, subject_port]: [u16; 3]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut rng = SeededRandom::labelled(seed, "fixtures");
    let now = Timestamp::now();
    let (from, until) = (now.plus_seconds(-DAY), now.plus_seconds(2 * 365 * DAY));
    let cn = |s: &str| CommonName::new(s).expect("fixture name");

    let root = Party::root(cn("trust-root.example"), &mut rng, from, until)?;
    let aa = Party::issued_by(cn("bankofamerica.com"), &root, &mut rng, from, until)?;
    let rp = Party::issued_by(cn("lender.example"), &root, &mut rng, from, until)?;
    let john_token = token(&mut rng, JOHN)?;
    let mallory_token = token(&mut rng, MALLORY)?;

    let f = |name: &str| dir.join(name);
    fsio::store(&f("root.cert.json"), &root.cert)?;
    fsio::store(&f("aa.sig.json"), &aa.sig)?;
    fsio::store(&f("aa.cert.json"), &aa.cert)?;
    fsio::store(&f("rp.enc.json"), &rp.enc)?;
    fsio::store(&f("rp.cert.json"), &rp.cert)?;
    fsio::store(&f("schema.json"), &fixture_schema())?;
    fsio::store(&f("rp-trust.json"), &rp_trust(&root))?;
    fsio::store(
        &f("wallet-trust.json"),
        &TrustStore::new().with_root(root.cert.clone())?,
    )?;
    AttributeStore::save_to(
        &f("records.json"),
        &[
            SubjectRecord::new(JOHN, john_record()).with_token(&john_token),
            SubjectRecord::new(MALLORY, mallory_record()).with_token(&mallory_token),
        ],
    )?;

    let local = |port: u16| std::net::SocketAddr::from(([127, 0, 0, 1], port));
    toml_file(
        &f("aa.toml"),
        &AaConfig {
            listen: local(aa_port),
            signing_key: "aa.sig.json".into(),
            certificate: "aa.cert.json".into(),
            intermediates: vec![],
            schema: "schema.json".into(),
            records: "records.json".into(),
        },
    )?;
    toml_file(
        &f("rp.toml"),
        &RpConfig {
            listen: local(rp_port),
            encryption_key: "rp.enc.json".into(),
            certificate: "rp.cert.json".into(),
            schema: "schema.json".into(),
            trust_store: "rp-trust.json".into(),
            ttl_seconds: cic_core::rp::DEFAULT_TTL_SECONDS,
        },
    )?;
    let aa_url = format!("http://127.0.0.1:{aa_port}");
    let mut directory = AaDirectory::default();
    for schema in fixture_schema().records() {
        directory = directory.with(schema.name.clone(), &aa_url, &john_token);
    }
    toml_file(
        &f("subject.toml"),
        &SubjectConfig {
            listen: local(subject_port),
            schema: "schema.json".into(),
            trust_store: "wallet-trust.json".into(),
            state: Some("wallet-state.json".into()),
            directory,
            policy: Default::default(),
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Loaded;

    #[test]
    fn fixtures_load_back_into_services() {
        let dir = tempfile_dir();
        write(&dir, 5, [1, 2, 3]).unwrap();
        crate::serve::aa::build(&dir.join("aa.toml")).unwrap();
        let rp = crate::serve::rp::build(&dir.join("rp.toml"), None).unwrap();
        assert_eq!(rp.name().as_str(), "lender.example");
        let (_, cfg) = crate::serve::subject::build(&dir.join("subject.toml")).unwrap();
        assert_eq!(cfg.directory.entries.len(), 7);
        let l = Loaded::<SubjectConfig>::read(&dir.join("subject.toml")).unwrap();
        assert!(l.trust(&l.config.trust_store).unwrap().roots().len() == 1);
    }

    #[test]
    fn same_seed_same_keys() {
        let (a, b) = (tempfile_dir(), tempfile_dir());
        write(&a, 9, [1, 2, 3]).unwrap();
        write(&b, 9, [1, 2, 3]).unwrap();
        for f in ["aa.sig.json", "rp.enc.json", "records.json"] {
            assert_eq!(
                std::fs::read(a.join(f)).unwrap(),
                std::fs::read(b.join(f)).unwrap()
            );
        }
    }

    fn tempfile_dir() -> std::path::PathBuf {
        tempfile::tempdir().unwrap().keep()
    }
}
