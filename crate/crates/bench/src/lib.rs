//! Fixtures shared by the benchmarks.

use cic_core::entropy::SeededRandom;
use cic_core::{AttributeSet, AttributeValue, CommonName, Party, Timestamp, TrustStore};

pub use cic_core::{CertifiedClaim, Nonce};

pub const NOW: Timestamp = Timestamp::from_unix(1_800_000_000);
const FROM: Timestamp = Timestamp::from_unix(1_700_000_000);
const UNTIL: Timestamp = Timestamp::from_unix(1_900_000_000);

/// A root, an endorsing intermediate, an authority under it and a relying party.
pub struct Bench {
    pub rng: SeededRandom,
    pub root: Party,
    pub mid: Party,
    pub aa: Party,
    pub rp: Party,
    pub trust: TrustStore,
    pub attributes: AttributeSet,
}

impl Bench {
    pub fn new(seed: u64) -> Bench {
        let mut rng = SeededRandom::labelled(seed, "bench");
        let cn = |s: &str| CommonName::new(s).expect("name");
        let root = Party::root(cn("root.example"), &mut rng, FROM, UNTIL).expect("root");
        let mid = Party::issued_by(cn("mid.example"), &root, &mut rng, FROM, UNTIL).expect("mid");
        let aa = Party::issued_by(cn("aa.example"), &mid, &mut rng, FROM, UNTIL).expect("aa");
        let rp = Party::issued_by(cn("rp.example"), &root, &mut rng, FROM, UNTIL).expect("rp");
        let trust = TrustStore::new()
            .with_root(root.cert.clone())
            .expect("root")
            .with_endorser("name".parse().expect("name"), cn("mid.example"))
            .with_endorser("credit_score".parse().expect("name"), cn("mid.example"));
        let attributes = AttributeSet::new()
            .with("name", AttributeValue::text("John Davis").expect("text"))
            .with("credit_score", 589);
        Bench {
            rng,
            root,
            mid,
            aa,
            rp,
            trust,
            attributes,
        }
    }
}
