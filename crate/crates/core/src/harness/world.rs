use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::channel::{Message, Recorder, SimChannel};
use crate::aa::{AttributeAuthority, AttributeStore, ErrorBody, SubjectRecord};
use crate::attr::{AttributeName, AttributeSet, AttributeValue, ValueType};
use crate::canonical;
use crate::cert::CommonName;
use crate::claim::{CertifiedClaim, ClaimRequest, Nonce};
use crate::entropy::{RandomSource, SeededRandom};
use crate::party::Party;
use crate::rp::{CreateRequestError, RelyingParty, VerificationResult};
use crate::subject::{
    AaDirectory, AaEntry, AuthorityTransport, ConsentPolicy, Decision, TransportFailure, Wallet,
    WalletError,
};
use crate::time::{parse_date, Clock, ManualClock, Timestamp};
use crate::trust::{AttributeSchema, SchemaRegistry, TrustStore};

/// 2026-01-01T00:00:00Z
pub const WORLD_START: Timestamp = Timestamp::from_unix(1_767_225_600);
const CERT_FROM: Timestamp = Timestamp::from_unix(1_735_689_600); // 2025-01-01
const CERT_UNTIL: Timestamp = Timestamp::from_unix(1_830_297_600); // 2028-01-01

pub const JOHN: &str = "s-1001";
pub const MALLORY: &str = "s-6666";
pub const JOHN_SSN: &str = "078-05-1120";

fn cn(s: &str) -> CommonName {
    CommonName::new(s).expect("fixture name")
}

fn attr(s: &str) -> AttributeName {
    AttributeName::new(s).expect("fixture attribute")
}

pub fn fixture_schema() -> SchemaRegistry {
    SchemaRegistry::new([
        AttributeSchema::new("name", ValueType::Text, "Name"),
        AttributeSchema::new("credit_score", ValueType::Integer, "Credit score"),
        AttributeSchema::new("ssn", ValueType::Text, "Social security number"),
        AttributeSchema::new("date_of_birth", ValueType::Date, "Date of birth"),
        AttributeSchema::new("bank_balance", ValueType::Integer, "Bank balance"),
        AttributeSchema::new("shipping_address", ValueType::Text, "Shipping address"),
        AttributeSchema::new("account_active", ValueType::Boolean, "Account active"),
    ])
    .expect("fixture schema")
}

fn text(s: &str) -> AttributeValue {
    AttributeValue::text(s).expect("fixture text")
}

pub fn john_record() -> AttributeSet {
    AttributeSet::new()
        .with("name", text("John Davis"))
        .with("credit_score", 589)
        .with("ssn", text(JOHN_SSN))
        .with("date_of_birth", parse_date("1984-03-17").expect("date"))
        .with("shipping_address", text("12 Elm Street, Springfield"))
        .with("account_active", true)
}

pub fn mallory_record() -> AttributeSet {
    AttributeSet::new()
        .with("name", text("Mallory Reed"))
        .with("credit_score", 802)
        .with("shipping_address", text("99 Dock Road, Port Town"))
        .with("account_active", true)
}

/// The relying parties in the fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rp {
    /// `lender.example`, the honest relying party X.
    Lender,
    /// `shady-lender.example`, a malicious relying party.
    Shady,
    /// `shop.example`, an online shop.
    Shop,
}

impl Rp {
    pub const ALL: [Rp; 3] = [Rp::Lender, Rp::Shady, Rp::Shop];

    pub fn common_name(self) -> &'static str {
        match self {
            Rp::Lender => "lender.example",
            Rp::Shady => "shady-lender.example",
            Rp::Shop => "shop.example",
        }
    }

    pub fn actor(self) -> String {
        format!("rp:{}", self.common_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Who {
    John,
    Mallory,
}

impl Who {
    pub fn subject_id(self) -> &'static str {
        match self {
            Who::John => JOHN,
            Who::Mallory => MALLORY,
        }
    }

    pub fn actor(self) -> String {
        format!("subject:{}", self.subject_id())
    }
}

pub fn aa_actor(name: &str) -> String {
    format!("aa:{name}")
}

/// Routes wallet issue calls to in-process authorities and logs them.
pub struct SimTransport {
    subject: String,
    authorities: Arc<BTreeMap<String, Arc<AttributeAuthority>>>,
    clock: Arc<ManualClock>,
    recorder: Recorder,
    rng: Mutex<SeededRandom>,
}

impl AuthorityTransport for SimTransport {
    fn issue(&self, entry: &AaEntry, body: &[u8]) -> Result<Vec<u8>, TransportFailure> {
        let aa = self
            .authorities
            .get(&entry.endpoint)
            .ok_or_else(|| TransportFailure::Unreachable(entry.endpoint.clone()))?;
        let aa_name = aa_actor(aa.certificate().subject_common_name.as_str());
        let mut chan = SimChannel::new(&self.subject, &aa_name, true, &self.recorder);
        chan.send(&self.subject, Message::new("issue_request", body.to_vec()));
        let mut rng = self.rng.lock().expect("rng poisoned");
        match aa.handle_issue_body(body, &entry.credential, self.clock.now(), &mut *rng) {
            Ok(claim) => {
                let bytes = claim.to_canonical();
                chan.send(&aa_name, Message::new("issue_response", bytes.clone()));
                Ok(bytes)
            }
            Err(e) => {
                let err = canonical::encode(&ErrorBody::from(&e)).expect("error body");
                chan.send(&aa_name, Message::new("issue_error", err));
                Err(TransportFailure::Rejected {
                    status: e.http_status(),
                    error: e.code().to_string(),
                })
            }
        }
    }
}

/// Outcome of taking a request through a wallet.
#[derive(Debug)]
#[allow(clippy::large_enum_variant)]
pub enum WalletOutcome {
    Claim(CertifiedClaim),
    /// The simulated human denied the request.
    Denied { reason: String },
    Failed(WalletError),
}

/// Everything a scenario needs, built deterministically from a seed.
pub struct World {
    pub seed: u64,
    pub clock: Arc<ManualClock>,
    pub recorder: Recorder,
    pub schema: SchemaRegistry,
    pub root: Party,
    pub aba: Party,
    pub bank: Party,
    pub smallbank: Party,
    pub rogue: Party,
    rps: BTreeMap<Rp, (Party, RelyingParty)>,
    pub authorities: Arc<BTreeMap<String, Arc<AttributeAuthority>>>,
    pub john_token: String,
    pub mallory_token: String,
    wallets: BTreeMap<&'static str, (Wallet, SimTransport)>,
    rngs: BTreeMap<String, SeededRandom>,
}

pub fn sim_endpoint(name: &str) -> String {
    format!("sim://{name}")
}

/// Trust configuration every fixture relying party starts with.
pub fn rp_trust(root: &Party) -> TrustStore {
    let mut t = TrustStore::new()
        .with_root(root.cert.clone())
        .expect("fixture root");
    for a in [
        "name",
        "credit_score",
        "date_of_birth",
        "shipping_address",
        "account_active",
    ] {
        t = t.with_whitelisted(attr(a), cn("bankofamerica.com"));
    }
    t.with_endorser(attr("bank_balance"), cn("aba.org"))
}

impl World {
    pub fn new(seed: u64) -> World {
        let clock = Arc::new(ManualClock::new(WORLD_START));
        let recorder = Recorder::new(clock.clone());
        let schema = fixture_schema();
        let mut keys = SeededRandom::labelled(seed, "keys");
        let k = &mut keys;
        let root = Party::root(cn("trust-root.example"), k, CERT_FROM, CERT_UNTIL).expect("root");
        let aba = Party::issued_by(cn("aba.org"), &root, k, CERT_FROM, CERT_UNTIL).expect("aba");
        let bank = Party::issued_by(cn("bankofamerica.com"), &root, k, CERT_FROM, CERT_UNTIL)
            .expect("bank");
        let smallbank = Party::issued_by(cn("smallbank.example"), &aba, k, CERT_FROM, CERT_UNTIL)
            .expect("smallbank");
        let rogue = Party::root(cn("totally-legit-bank.example"), k, CERT_FROM, CERT_UNTIL)
            .expect("rogue");

        let mut rps = BTreeMap::new();
        for rp in Rp::ALL {
            let party = Party::issued_by(cn(rp.common_name()), &root, k, CERT_FROM, CERT_UNTIL)
                .expect("rp");
            let service = RelyingParty::new(
                party.cert.clone(),
                party.enc.clone(),
                schema.clone(),
                rp_trust(&root),
                crate::rp::DEFAULT_TTL_SECONDS,
            )
            .expect("rp keys");
            rps.insert(rp, (party, service));
        }

        let mut tokens = SeededRandom::labelled(seed, "tokens");
        let token = |rng: &mut SeededRandom, who: &str| {
            let bytes: [u8; 16] = rng.array().expect("seeded");
            format!("{who}.{}", canonical::b64::encode(&bytes))
        };
        let john_token = token(&mut tokens, JOHN);
        let mallory_token = token(&mut tokens, MALLORY);

        let bank_store = AttributeStore::in_memory(
            schema.clone(),
            [
                SubjectRecord::new(JOHN, john_record()).with_token(&john_token),
                SubjectRecord::new(MALLORY, mallory_record()).with_token(&mallory_token),
            ],
        )
        .expect("bank store");
        let small_store = AttributeStore::in_memory(
            schema.clone(),
            [SubjectRecord::new(
                JOHN,
                AttributeSet::new()
                    .with("bank_balance", 15_200)
                    .with("credit_score", 640),
            )
            .with_token(&john_token)],
        )
        .expect("smallbank store");
        let rogue_store = AttributeStore::in_memory(
            schema.clone(),
            [SubjectRecord::new(MALLORY, john_record()).with_token(&mallory_token)],
        )
        .expect("rogue store");

        let mut authorities = BTreeMap::new();
        for (party, store, inter) in [
            (&bank, bank_store, vec![]),
            (&smallbank, small_store, vec![aba.cert.clone()]),
            (&rogue, rogue_store, vec![]),
        ] {
            let aa = AttributeAuthority::new(
                party.sig.clone(),
                party.cert.clone(),
                inter,
                Arc::new(store),
            )
            .expect("aa keys");
            authorities.insert(sim_endpoint(party.name().as_str()), Arc::new(aa));
        }
        let authorities = Arc::new(authorities);

        let wallet_trust = TrustStore::new()
            .with_root(root.cert.clone())
            .expect("fixture root");
        let mut wallets = BTreeMap::new();
        for (who, tok) in [(Who::John, &john_token), (Who::Mallory, &mallory_token)] {
            let mut dir = AaDirectory::default();
            for a in [
                "name",
                "credit_score",
                "date_of_birth",
                "shipping_address",
                "account_active",
            ] {
                dir = dir.with(attr(a), &sim_endpoint("bankofamerica.com"), tok);
            }
            dir = dir.with(
                attr("bank_balance"),
                &sim_endpoint("smallbank.example"),
                tok,
            );
            let wallet = Wallet::new(
                wallet_trust.clone(),
                schema.clone(),
                dir,
                ConsentPolicy::default(),
            );
            let transport = SimTransport {
                subject: who.actor(),
                authorities: authorities.clone(),
                clock: clock.clone(),
                recorder: recorder.clone(),
                rng: Mutex::new(SeededRandom::labelled(
                    seed,
                    &format!("aa-for-{}", who.subject_id()),
                )),
            };
            wallets.insert(who.subject_id(), (wallet, transport));
        }

        World {
            seed,
            clock,
            recorder,
            schema,
            root,
            aba,
            bank,
            smallbank,
            rogue,
            rps,
            authorities,
            john_token,
            mallory_token,
            wallets,
            rngs: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// A seeded stream private to `label`.
    pub fn rng(&mut self, label: &str) -> &mut SeededRandom {
        let seed = self.seed;
        self.rngs
            .entry(label.to_string())
            .or_insert_with(|| SeededRandom::labelled(seed, label))
    }

    pub fn rp(&self, rp: Rp) -> &RelyingParty {
        &self.rps[&rp].1
    }

    pub fn rp_party(&self, rp: Rp) -> &Party {
        &self.rps[&rp].0
    }

    /// Every relying-party encryption key in the world.
    pub fn rp_parties(&self) -> impl Iterator<Item = (Rp, &Party)> {
        self.rps.iter().map(|(r, (p, _))| (*r, p))
    }

    pub fn wallet(&self, who: Who) -> &Wallet {
        &self.wallets[who.subject_id()].0
    }

    pub fn transport(&self, who: Who) -> &SimTransport {
        &self.wallets[who.subject_id()].1
    }

    pub fn authority(&self, name: &str) -> &Arc<AttributeAuthority> {
        &self.authorities[&sim_endpoint(name)]
    }

    pub fn channel(&self, a: &str, b: &str, secure: bool) -> SimChannel {
        SimChannel::new(a, b, secure, &self.recorder)
    }

    /// Mints a request at `rp` using that party's own seeded stream.
    pub fn request(&mut self, rp: Rp, attrs: &[&str], purpose: Option<&str>) -> ClaimRequest {
        let label = format!("nonce:{}", rp.common_name());
        let now = self.now();
        self.rng(&label);
        let mut rng = self.rngs.remove(&label).expect("just created");
        let out = self.request_with(rp, attrs, purpose, now, &mut rng);
        self.rngs.insert(label, rng);
        out.expect("fixture request")
    }

    pub fn request_with(
        &self,
        rp: Rp,
        attrs: &[&str],
        purpose: Option<&str>,
        now: Timestamp,
        rng: &mut dyn RandomSource,
    ) -> Result<ClaimRequest, CreateRequestError> {
        let names: Vec<AttributeName> = attrs.iter().map(|a| attr(a)).collect();
        self.rp(rp)
            .create_request(&names, purpose.map(str::to_string), now, rng)
    }

    /// Sends a request over `chan` from `from`; returns what the other side
    /// receives, decoded.
    pub fn deliver_request(
        &self,
        chan: &mut SimChannel,
        from: &str,
        request: &ClaimRequest,
    ) -> Option<ClaimRequest> {
        let msg = chan.send(from, Message::new("claim_request", request.to_canonical()))?;
        canonical::decode(&msg.body).ok()
    }

    /// Intake, a human who approves unless the wallet shows a warning, and
    /// relay to the authority.
    pub fn consent_and_relay(
        &self,
        who: Who,
        request: ClaimRequest,
        peer: &CommonName,
    ) -> WalletOutcome {
        let wallet = self.wallet(who);
        let now = self.now();
        let pending = match wallet.on_request(request, Some(peer.clone()), None, now) {
            Ok(p) => p,
            Err(e) => return WalletOutcome::Failed(e),
        };
        if !pending.rp_chain_valid || pending.peer_mismatch {
            if let Err(e) = wallet.decide(&pending.id, Decision::Deny, now) {
                return WalletOutcome::Failed(e);
            }
            return WalletOutcome::Denied {
                reason: pending.human_text,
            };
        }
        if let Err(e) = wallet.decide(&pending.id, Decision::Approve, now) {
            return WalletOutcome::Failed(e);
        }
        match wallet.relay(&pending.id, self.transport(who), now) {
            Ok(claim) => WalletOutcome::Claim(claim),
            Err(e) => WalletOutcome::Failed(e),
        }
    }

    /// Submits claim bytes to `rp` over `chan` and sends the verdict back.
    pub fn submit(
        &self,
        chan: &mut SimChannel,
        from: &str,
        rp: Rp,
        handle: Nonce,
        claim_bytes: Vec<u8>,
    ) -> Option<VerificationResult> {
        let msg = chan.send(
            from,
            Message::new("claim_submission", claim_bytes).with_handle(handle),
        )?;
        let handle = msg.handle?;
        let result = self.rp(rp).accept_submission(&handle, &msg.body, self.now());
        chan.send(
            &rp.actor(),
            Message::new(
                "verification_result",
                canonical::encode(&result).expect("result encodes"),
            ),
        );
        Some(result)
    }

    /// The whole honest exchange between `who` and `rp` over a secure
    /// channel.
    pub fn honest_flow(
        &mut self,
        rp: Rp,
        who: Who,
        attrs: &[&str],
        purpose: Option<&str>,
    ) -> HonestFlow {
        let request = self.request(rp, attrs, purpose);
        self.run_flow(rp, who, request)
    }

    /// As [`World::honest_flow`] for a request minted elsewhere.
    pub fn run_flow(&self, rp: Rp, who: Who, request: ClaimRequest) -> HonestFlow {
        let mut chan = self.channel(&rp.actor(), &who.actor(), true);
        let delivered = self
            .deliver_request(&mut chan, &rp.actor(), &request)
            .expect("secure channel delivers");
        let peer = cn(rp.common_name());
        match self.consent_and_relay(who, delivered, &peer) {
            WalletOutcome::Claim(claim) => {
                let result = self
                    .submit(
                        &mut chan,
                        &who.actor(),
                        rp,
                        request.nonce,
                        claim.to_canonical(),
                    )
                    .expect("secure channel delivers");
                HonestFlow {
                    request,
                    claim: Some(claim),
                    result: Some(result),
                    note: String::new(),
                }
            }
            WalletOutcome::Denied { reason } => HonestFlow {
                request,
                claim: None,
                result: None,
                note: format!("denied: {reason}"),
            },
            WalletOutcome::Failed(e) => HonestFlow {
                request,
                claim: None,
                result: None,
                note: format!("wallet error: {e}"),
            },
        }
    }
}

#[derive(Debug)]
pub struct HonestFlow {
    pub request: ClaimRequest,
    pub claim: Option<CertifiedClaim>,
    pub result: Option<VerificationResult>,
    pub note: String,
}

impl HonestFlow {
    pub fn accepted(&self) -> bool {
        self.result.as_ref().is_some_and(|r| r.accepted)
    }

    pub fn describe(&self) -> String {
        match &self.result {
            Some(r) if r.accepted => format!(
                "accepted {}",
                canonical::encode_string(r.attributes.as_ref().expect("accepted"))
                    .expect("attributes encode")
            ),
            Some(r) => format!(
                "rejected: {}",
                r.failure.map(|f| f.to_string()).unwrap_or_default()
            ),
            None => self.note.clone(),
        }
    }
}
