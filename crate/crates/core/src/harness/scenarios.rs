use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::channel::{Action, Interceptor, Message};
use super::weakened::{self, WeakClaim};
use super::world::{sim_endpoint, HonestFlow, Rp, WalletOutcome, Who, World};
use super::{Expectation, PhaseReport, ScenarioSpec};
use crate::aa::IssueBody;
use crate::attr::{AttributeName, AttributeSet, AttributeValue};
use crate::canonical;
use crate::cert::CommonName;
use crate::claim::{issue_cic, CertifiedClaim, ClaimRequest};
use crate::entropy::{FixedRandom, RandomSource, SeededRandom};
use crate::envelope::{open, seal};
use crate::rp::{VerificationResult, DEFAULT_TTL_SECONDS};
use crate::subject::{AaEntry, AuthorityTransport, Decision};

use Expectation::{AttackBlocked, AttackSucceeds, FlowCompletes};

pub(super) static CATALOG: &[ScenarioSpec] = &[
    ScenarioSpec {
        name: "happy_path",
        threat: "none: request, consent, certification and verification by honest parties",
        expectation: FlowCompletes,
        headline: "honest",
        run: happy_path,
    },
    ScenarioSpec {
        name: "replay",
        threat: "a subject resubmits a claim it has already used",
        expectation: AttackBlocked,
        headline: "replay",
        run: replay,
    },
    ScenarioSpec {
        name: "cross_rp_relay",
        threat: "a malicious relying party pairs another relying party's nonce with its own \
                 certificate and forwards the resulting claim to that party",
        expectation: AttackBlocked,
        headline: "relay_to_x",
        run: cross_rp_relay,
    },
    ScenarioSpec {
        name: "sign_then_encrypt_weakness",
        threat: "when the authority signs before encrypting, the recipient can re-seal the \
                 signed payload to a third relying party",
        expectation: AttackSucceeds,
        headline: "attack_weakened",
        run: sign_then_encrypt_weakness,
    },
    ScenarioSpec {
        name: "substituted_certificate",
        threat: "a malicious relying party passes another relying party's request to the \
                 subject unchanged, certificate included",
        expectation: AttackBlocked,
        headline: "attack",
        run: substituted_certificate,
    },
    ScenarioSpec {
        name: "tamper",
        threat: "single-bit corruption of claims in transit",
        expectation: AttackBlocked,
        headline: "tamper",
        run: tamper,
    },
    ScenarioSpec {
        name: "fixed_nonce",
        threat: "a relying party whose random source repeats nonces lets an old claim satisfy \
                 a new request",
        expectation: AttackSucceeds,
        headline: "broken_rng_replay",
        run: fixed_nonce,
    },
    ScenarioSpec {
        name: "untrusted_aa",
        threat: "an authority that is neither whitelisted nor endorsed for the attributes \
                 certifies them",
        expectation: AttackBlocked,
        headline: "self_signed_aa",
        run: untrusted_aa,
    },
    ScenarioSpec {
        name: "stolen_aa_key_then_revocation",
        threat: "an attacker holding a trusted authority's signing key forges claims until \
                 relying parties revoke that authority",
        expectation: AttackBlocked,
        headline: "after_revocation",
        run: stolen_aa_key_then_revocation,
    },
    ScenarioSpec {
        name: "insecure_channel_injection",
        threat: "an on-path attacker swaps the subject's claim for one certifying the \
                 attacker's own shipping address",
        expectation: AttackSucceeds,
        headline: "insecure_channel",
        run: insecure_channel_injection,
    },
];

const LOAN: &[&str] = &["name", "credit_score"];
const LOAN_PURPOSE: Option<&str> = Some("loan application");

fn cn(s: &str) -> CommonName {
    CommonName::new(s).expect("fixture name")
}

fn expected_loan_attrs() -> AttributeSet {
    AttributeSet::new()
        .with("name", AttributeValue::text("John Davis").expect("text"))
        .with("credit_score", 589)
}

fn attack_outcome(result: Option<&VerificationResult>) -> Expectation {
    if result.is_some_and(|r| r.accepted) {
        AttackSucceeds
    } else {
        AttackBlocked
    }
}

fn describe(result: Option<&VerificationResult>) -> String {
    match result {
        Some(r) if r.accepted => format!(
            "accepted {}",
            canonical::encode_string(r.attributes.as_ref().expect("accepted")).expect("encodes")
        ),
        Some(r) => format!(
            "rejected: {}",
            r.failure.map(|f| f.to_string()).unwrap_or_default()
        ),
        None => "nothing delivered".to_string(),
    }
}

/// Honest flows complete only if the relying party accepted exactly
/// `expected`, when given.
fn baseline(name: &str, flow: &HonestFlow, expected: Option<&AttributeSet>) -> PhaseReport {
    let ok = flow.accepted()
        && expected.map_or(true, |e| flow.result.as_ref().and_then(|r| r.attributes.as_ref()) == Some(e));
    PhaseReport::new(
        name,
        FlowCompletes,
        if ok { FlowCompletes } else { AttackBlocked },
        flow.describe(),
    )
}

fn loan_baseline(w: &mut World) -> PhaseReport {
    let flow = w.honest_flow(Rp::Lender, Who::John, LOAN, LOAN_PURPOSE);
    baseline("honest", &flow, Some(&expected_loan_attrs()))
}

/// `request` with its certificate swapped for `rp`'s.
fn rebadge(w: &World, request: &ClaimRequest, rp: Rp) -> ClaimRequest {
    ClaimRequest {
        rp_certificate: w.rp_party(rp).cert.clone(),
        ..request.clone()
    }
}

fn happy_path(w: &mut World) -> Vec<PhaseReport> {
    vec![loan_baseline(w)]
}

fn replay(w: &mut World) -> Vec<PhaseReport> {
    let flow = w.honest_flow(Rp::Lender, Who::John, LOAN, LOAN_PURPOSE);
    let mut phases = vec![baseline("honest", &flow, Some(&expected_loan_attrs()))];
    let Some(claim) = flow.claim.clone() else {
        return phases;
    };
    let john = Who::John.actor();
    let mut chan = w.channel(&Rp::Lender.actor(), &john, true);

    let again = w.submit(
        &mut chan,
        &john,
        Rp::Lender,
        flow.request.nonce,
        claim.to_canonical(),
    );
    phases.push(PhaseReport::new(
        "replay",
        AttackBlocked,
        attack_outcome(again.as_ref()),
        describe(again.as_ref()),
    ));

    let fresh = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    w.deliver_request(&mut chan, &Rp::Lender.actor(), &fresh);
    let reused = w.submit(&mut chan, &john, Rp::Lender, fresh.nonce, claim.to_canonical());
    phases.push(PhaseReport::new(
        "replay_against_new_request",
        AttackBlocked,
        attack_outcome(reused.as_ref()),
        describe(reused.as_ref()),
    ));
    phases
}

fn cross_rp_relay(w: &mut World) -> Vec<PhaseReport> {
    let mut phases = vec![loan_baseline(w)];
    let shady = Rp::Shady.actor();
    let john = Who::John.actor();

    // the shady party obtains a request from X as an ordinary client would
    let from_x = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    let forged = rebadge(w, &from_x, Rp::Shady);
    let mut to_subject = w.channel(&shady, &john, true);
    let delivered = w
        .deliver_request(&mut to_subject, &shady, &forged)
        .expect("secure channel delivers");
    let claim = match w.consent_and_relay(Who::John, delivered, &cn(Rp::Shady.common_name())) {
        WalletOutcome::Claim(c) => c,
        other => {
            phases.push(PhaseReport::new(
                "relay_to_x",
                AttackBlocked,
                AttackBlocked,
                format!("subject never produced a claim: {other:?}"),
            ));
            return phases;
        }
    };
    let mut to_x = w.channel(&shady, &Rp::Lender.actor(), true);
    let result = w.submit(
        &mut to_x,
        &shady,
        Rp::Lender,
        from_x.nonce,
        claim.to_canonical(),
    );
    let x_opens = open(&claim.envelope, &w.rp_party(Rp::Lender).enc).is_ok();
    phases.push(PhaseReport::new(
        "relay_to_x",
        AttackBlocked,
        if x_opens {
            AttackSucceeds
        } else {
            attack_outcome(result.as_ref())
        },
        format!(
            "{}; X's key {} the envelope",
            describe(result.as_ref()),
            if x_opens { "opens" } else { "does not open" }
        ),
    ));
    phases
}

/// Intake and consent as usual, then issuance by the weakened authority.
fn weak_obtain(w: &mut World, who: Who, request: ClaimRequest, peer: Rp) -> Option<WeakClaim> {
    let wallet = w.wallet(who);
    let now = w.now();
    let pending = wallet
        .on_request(request, Some(cn(peer.common_name())), None, now)
        .ok()?;
    if !pending.rp_chain_valid || pending.peer_mismatch {
        wallet.decide(&pending.id, Decision::Deny, now).ok()?;
        return None;
    }
    wallet.decide(&pending.id, Decision::Approve, now).ok()?;

    let aa = w.authority("bankofamerica.com").clone();
    let token = match who {
        Who::John => w.john_token.clone(),
        Who::Mallory => w.mallory_token.clone(),
    };
    let subject = who.actor();
    let aa_name = super::aa_actor("bankofamerica.com");
    let mut chan = w.channel(&subject, &aa_name, true);
    chan.send(
        &subject,
        Message::new(
            "issue_request",
            IssueBody::wrap(&pending.request.to_canonical()),
        ),
    );
    let sid = aa.authenticate_subject(&token).ok()?;
    let attrs = aa.store().snapshot()[&sid]
        .attributes
        .select(&pending.request.description)
        .ok()?;
    let bank = w.bank.clone();
    let claim = weakened::issue(
        &attrs,
        pending.request.nonce,
        &pending.request.rp_certificate.enc_public_key,
        &bank.sig,
        &bank.cert,
        now,
        w.rng("weak-aa"),
    );
    chan.send(&aa_name, Message::new("issue_response", claim.to_canonical()));
    Some(claim)
}

fn weak_submit(w: &World, from: &str, rp: Rp, request: &ClaimRequest, claim: &WeakClaim) -> VerificationResult {
    let mut chan = w.channel(from, &rp.actor(), true);
    chan.send(
        from,
        Message::new("claim_submission", claim.to_canonical()).with_handle(request.nonce),
    );
    let svc = w.rp(rp);
    let result = weakened::accept(
        &request.nonce,
        claim,
        svc.registry(),
        &svc.trust_store(),
        svc.schema(),
        &w.rp_party(rp).enc,
        w.now(),
    );
    chan.send(
        &rp.actor(),
        Message::new("verification_result", canonical::encode(&result).expect("encodes")),
    );
    result
}

fn sign_then_encrypt_weakness(w: &mut World) -> Vec<PhaseReport> {
    let mut phases = vec![loan_baseline(w)];
    let john = Who::John.actor();
    let shady = Rp::Shady.actor();

    // honest flow under the weakened scheme
    let req = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    let mut chan = w.channel(&Rp::Lender.actor(), &john, true);
    let delivered = w
        .deliver_request(&mut chan, &Rp::Lender.actor(), &req)
        .expect("secure channel delivers");
    let result = weak_obtain(w, Who::John, delivered, Rp::Lender)
        .map(|c| weak_submit(w, &john, Rp::Lender, &req, &c));
    let ok = result
        .as_ref()
        .is_some_and(|r| r.accepted && r.attributes.as_ref() == Some(&expected_loan_attrs()));
    phases.push(PhaseReport::new(
        "honest_weakened",
        FlowCompletes,
        if ok { FlowCompletes } else { AttackBlocked },
        describe(result.as_ref()),
    ));

    // weakened: the shady party re-seals the signed payload to X
    let from_x = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    let forged = rebadge(w, &from_x, Rp::Shady);
    let mut to_subject = w.channel(&shady, &john, true);
    let delivered = w
        .deliver_request(&mut to_subject, &shady, &forged)
        .expect("secure channel delivers");
    let shady_enc = w.rp_party(Rp::Shady).enc.clone();
    let x_pub = w.rp_party(Rp::Lender).enc.public();
    let result = weak_obtain(w, Who::John, delivered, Rp::Shady).and_then(|claim| {
        let resealed = weakened::reseal(&claim, &shady_enc, &x_pub, w.rng("attacker"))?;
        Some(weak_submit(w, &shady, Rp::Lender, &from_x, &resealed))
    });
    phases.push(PhaseReport::new(
        "attack_weakened",
        AttackSucceeds,
        attack_outcome(result.as_ref()),
        describe(result.as_ref()),
    ));

    // standard: the same move breaks the authority's signature
    let from_x = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    let forged = rebadge(w, &from_x, Rp::Shady);
    let delivered = w
        .deliver_request(&mut to_subject, &shady, &forged)
        .expect("secure channel delivers");
    let result = match w.consent_and_relay(Who::John, delivered, &cn(Rp::Shady.common_name())) {
        WalletOutcome::Claim(claim) => {
            let payload = open(&claim.envelope, &shady_enc).ok();
            let resealed = payload.and_then(|p| seal(&p, &x_pub, w.rng("attacker")).ok());
            resealed.and_then(|envelope| {
                let moved = CertifiedClaim { envelope, ..claim };
                let mut to_x = w.channel(&shady, &Rp::Lender.actor(), true);
                w.submit(&mut to_x, &shady, Rp::Lender, from_x.nonce, moved.to_canonical())
            })
        }
        _ => None,
    };
    phases.push(PhaseReport::new(
        "attack_standard",
        AttackBlocked,
        attack_outcome(result.as_ref()),
        describe(result.as_ref()),
    ));
    phases
}

fn substituted_certificate(w: &mut World) -> Vec<PhaseReport> {
    let mut phases = vec![loan_baseline(w)];
    let shady = Rp::Shady.actor();
    let john = Who::John.actor();

    let from_x = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    let mut to_subject = w.channel(&shady, &john, true);
    let delivered = w
        .deliver_request(&mut to_subject, &shady, &from_x)
        .expect("secure channel delivers");
    let (observed, detail) =
        match w.consent_and_relay(Who::John, delivered, &cn(Rp::Shady.common_name())) {
            WalletOutcome::Claim(claim) => {
                let mut to_x = w.channel(&shady, &Rp::Lender.actor(), true);
                let r = w.submit(&mut to_x, &shady, Rp::Lender, from_x.nonce, claim.to_canonical());
                (attack_outcome(r.as_ref()), describe(r.as_ref()))
            }
            WalletOutcome::Denied { reason } => (AttackBlocked, format!("wallet flagged: {reason}")),
            WalletOutcome::Failed(e) => (AttackBlocked, format!("wallet error: {e}")),
        };
    phases.push(PhaseReport::new("attack", AttackBlocked, observed, detail));
    phases
}

pub(crate) const TAMPER_FLIPS: usize = 100;

fn tamper(w: &mut World) -> Vec<PhaseReport> {
    let mut phases = vec![loan_baseline(w)];
    let john = Who::John.actor();
    let lender = Rp::Lender.actor();

    let req = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    let mut secure = w.channel(&lender, &john, true);
    let delivered = w
        .deliver_request(&mut secure, &lender, &req)
        .expect("secure channel delivers");
    let WalletOutcome::Claim(claim) =
        w.consent_and_relay(Who::John, delivered, &cn(Rp::Lender.common_name()))
    else {
        phases.push(PhaseReport::new(
            "tamper",
            AttackBlocked,
            AttackSucceeds,
            "no claim to tamper with".into(),
        ));
        return phases;
    };
    let bytes = claim.to_canonical();

    let mut flipper = SeededRandom::labelled(w.seed, "tamper");
    let mut wire = w.channel(&lender, &john, false);
    wire.set_interceptor(Interceptor::on_path(move |_, m: &Message| {
        if m.label != "claim_submission" {
            return Action::Forward;
        }
        let mut body = m.body.clone();
        let r = u64::from_le_bytes(flipper.array().expect("seeded"));
        let bit = (r % (body.len() as u64 * 8)) as usize;
        body[bit / 8] ^= 1 << (bit % 8);
        Action::Replace(Message { body, ..m.clone() })
    }))
    .expect("insecure channel accepts an interceptor");

    let mut accepted = 0usize;
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..TAMPER_FLIPS {
        match w.submit(&mut wire, &john, Rp::Lender, req.nonce, bytes.clone()) {
            Some(r) if r.accepted => accepted += 1,
            Some(r) => {
                *failures
                    .entry(r.failure.map(|f| f.to_string()).unwrap_or_default())
                    .or_default() += 1
            }
            None => *failures.entry("dropped".into()).or_default() += 1,
        }
    }
    phases.push(PhaseReport::new(
        "tamper",
        AttackBlocked,
        if accepted == 0 {
            AttackBlocked
        } else {
            AttackSucceeds
        },
        format!(
            "{TAMPER_FLIPS} single-bit flips, {accepted} accepted; rejections {}",
            canonical::encode_string(&failures).expect("encodes")
        ),
    ));

    // the untouched claim still works: rejections did not consume the nonce
    let r = w.submit(&mut secure, &john, Rp::Lender, req.nonce, bytes);
    let ok = r
        .as_ref()
        .is_some_and(|r| r.accepted && r.attributes.as_ref() == Some(&expected_loan_attrs()));
    phases.push(PhaseReport::new(
        "untampered_delivery",
        FlowCompletes,
        if ok { FlowCompletes } else { AttackBlocked },
        describe(r.as_ref()),
    ));
    phases
}

fn fixed_nonce(w: &mut World) -> Vec<PhaseReport> {
    let mut phases = Vec::new();
    let mut broken = FixedRandom::new([0x5a]);
    run_nonce_phases(w, &mut broken, "broken_rng", AttackSucceeds, &mut phases);
    let mut secure = SeededRandom::labelled(w.seed, "secure-nonce");
    run_nonce_phases(w, &mut secure, "secure_rng", AttackBlocked, &mut phases);
    phases
}

/// An honest exchange, then, after the first nonce has aged out of the
/// registry, a fresh request answered with the old claim.
fn run_nonce_phases(
    w: &mut World,
    rng: &mut dyn RandomSource,
    prefix: &str,
    replay_expectation: Expectation,
    phases: &mut Vec<PhaseReport>,
) {
    let john = Who::John.actor();
    let lender = Rp::Lender.actor();
    let now = w.now();
    let first = w
        .request_with(Rp::Lender, LOAN, LOAN_PURPOSE, now, rng)
        .expect("first request");
    let flow = w.run_flow(Rp::Lender, Who::John, first);
    phases.push(baseline(
        &format!("{prefix}_honest"),
        &flow,
        Some(&expected_loan_attrs()),
    ));
    let Some(old_claim) = flow.claim else {
        return;
    };

    w.clock.advance(DEFAULT_TTL_SECONDS + 1);
    let evicted = w.rp(Rp::Lender).evict_expired(w.now());
    let now = w.now();
    let (observed, detail) = match w.request_with(Rp::Lender, LOAN, LOAN_PURPOSE, now, rng) {
        Ok(second) => {
            let mut chan = w.channel(&lender, &john, true);
            w.deliver_request(&mut chan, &lender, &second);
            let r = w.submit(&mut chan, &john, Rp::Lender, second.nonce, old_claim.to_canonical());
            (
                attack_outcome(r.as_ref()),
                format!(
                    "{evicted} evicted; new nonce {} the old one; old claim {}",
                    if second.nonce == flow.request.nonce {
                        "repeats"
                    } else {
                        "differs from"
                    },
                    describe(r.as_ref())
                ),
            )
        }
        Err(e) => (AttackBlocked, format!("second request refused: {e}")),
    };
    phases.push(PhaseReport::new(
        &format!("{prefix}_replay"),
        replay_expectation,
        observed,
        detail,
    ));
}

/// Sends `request` straight to the authority at `endpoint` with `token`.
fn direct_issue(
    w: &World,
    who: Who,
    endpoint: &str,
    token: &str,
    request: &ClaimRequest,
) -> Result<Vec<u8>, String> {
    w.transport(who)
        .issue(
            &AaEntry {
                endpoint: endpoint.to_string(),
                credential: token.to_string(),
            },
            &IssueBody::wrap(&request.to_canonical()),
        )
        .map_err(|e| e.to_string())
}

fn untrusted_aa(w: &mut World) -> Vec<PhaseReport> {
    let mut phases = vec![loan_baseline(w)];
    let lender = Rp::Lender.actor();

    // Mallory runs her own authority, which vouches for John's data
    let mallory = Who::Mallory.actor();
    let req = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    let mut chan = w.channel(&lender, &mallory, true);
    w.deliver_request(&mut chan, &lender, &req);
    let token = w.mallory_token.clone();
    let rogue = sim_endpoint("totally-legit-bank.example");
    let (observed, detail) = match direct_issue(w, Who::Mallory, &rogue, &token, &req) {
        Ok(bytes) => {
            let r = w.submit(&mut chan, &mallory, Rp::Lender, req.nonce, bytes);
            (attack_outcome(r.as_ref()), describe(r.as_ref()))
        }
        Err(e) => (AttackBlocked, format!("no claim: {e}")),
    };
    phases.push(PhaseReport::new("self_signed_aa", AttackBlocked, observed, detail));

    // a properly chained authority endorsed for a different attribute
    let john = Who::John.actor();
    let req = w.request(Rp::Lender, &["credit_score"], LOAN_PURPOSE);
    let mut chan = w.channel(&lender, &john, true);
    w.deliver_request(&mut chan, &lender, &req);
    let token = w.john_token.clone();
    let small = sim_endpoint("smallbank.example");
    let (observed, detail) = match direct_issue(w, Who::John, &small, &token, &req) {
        Ok(bytes) => {
            let r = w.submit(&mut chan, &john, Rp::Lender, req.nonce, bytes);
            (attack_outcome(r.as_ref()), describe(r.as_ref()))
        }
        Err(e) => (AttackBlocked, format!("no claim: {e}")),
    };
    phases.push(PhaseReport::new(
        "unendorsed_attribute",
        AttackBlocked,
        observed,
        detail,
    ));

    // the same authority for the attribute it is endorsed for
    let flow = w.honest_flow(Rp::Lender, Who::John, &["bank_balance"], LOAN_PURPOSE);
    let expected = AttributeSet::new().with("bank_balance", 15_200);
    phases.push(baseline("endorsed_aa", &flow, Some(&expected)));
    phases
}

/// Forges a claim for `request` with the stolen bank key and submits it.
fn forge_and_submit(w: &mut World, request: &ClaimRequest) -> Option<VerificationResult> {
    let mallory = Who::Mallory.actor();
    let lender = Rp::Lender.actor();
    let mut chan = w.channel(&lender, &mallory, true);
    w.deliver_request(&mut chan, &lender, request);
    let forged_attrs = AttributeSet::new()
        .with("name", AttributeValue::text("John Davis").expect("text"))
        .with("credit_score", 850);
    let bank = w.bank.clone();
    let now = w.now();
    let claim = issue_cic(
        &forged_attrs,
        request.nonce,
        &request.rp_certificate.enc_public_key,
        &bank.sig,
        &bank.cert,
        &[],
        now,
        w.rng("attacker"),
    )
    .ok()?;
    w.submit(&mut chan, &mallory, Rp::Lender, request.nonce, claim.to_canonical())
}

fn stolen_aa_key_then_revocation(w: &mut World) -> Vec<PhaseReport> {
    let mut phases = vec![loan_baseline(w)];

    let req = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    let r = forge_and_submit(w, &req);
    phases.push(PhaseReport::new(
        "before_revocation",
        AttackSucceeds,
        attack_outcome(r.as_ref()),
        describe(r.as_ref()),
    ));

    w.clock.advance(60);
    let bank = cn("bankofamerica.com");
    let mut admin = w.channel("operator", &Rp::Lender.actor(), true);
    admin.send(
        "operator",
        Message::new(
            "revoke",
            canonical::encode(&serde_json::json!({
                "common_name": bank,
                "at": w.now(),
            }))
            .expect("encodes"),
        ),
    );
    w.rp(Rp::Lender).revoke(&bank, w.now());

    let req = w.request(Rp::Lender, LOAN, LOAN_PURPOSE);
    let r = forge_and_submit(w, &req);
    phases.push(PhaseReport::new(
        "after_revocation",
        AttackBlocked,
        attack_outcome(r.as_ref()),
        describe(r.as_ref()),
    ));
    phases
}

fn shipping_address(r: &VerificationResult) -> Option<&AttributeValue> {
    r.attributes
        .as_ref()?
        .get(&AttributeName::new("shipping_address").expect("name"))
}

fn insecure_channel_injection(w: &mut World) -> Vec<PhaseReport> {
    const ORDER: &[&str] = &["shipping_address"];
    const PURPOSE: Option<&str> = Some("delivery of order 1182");
    let john_addr = super::john_record()
        .get_str("shipping_address")
        .cloned()
        .expect("fixture");
    let mallory_addr = super::mallory_record()
        .get_str("shipping_address")
        .cloned()
        .expect("fixture");

    let flow = w.honest_flow(Rp::Shop, Who::John, ORDER, PURPOSE);
    let expected = AttributeSet::new().with("shipping_address", john_addr.clone());
    let mut phases = vec![baseline("honest", &flow, Some(&expected))];

    for (phase, secure, expectation) in [
        ("insecure_channel", false, AttackSucceeds),
        ("secure_channel", true, AttackBlocked),
    ] {
        let shop = Rp::Shop.actor();
        let john = Who::John.actor();
        let captured: Arc<Mutex<Option<ClaimRequest>>> = Arc::default();
        let swap: Arc<Mutex<Option<Vec<u8>>>> = Arc::default();
        let mut chan = w.channel(&shop, &john, secure);
        let (cap, sw) = (captured.clone(), swap.clone());
        let hooked = chan.set_interceptor(Interceptor::on_path(move |_, m: &Message| {
            match m.label.as_str() {
                "claim_request" => {
                    *cap.lock().expect("tap") = canonical::decode(&m.body).ok();
                    Action::Forward
                }
                "claim_submission" => match sw.lock().expect("tap").take() {
                    Some(body) => Action::Replace(Message {
                        body,
                        ..m.clone()
                    }),
                    None => Action::Forward,
                },
                _ => Action::Forward,
            }
        }));

        let req = w.request(Rp::Shop, ORDER, PURPOSE);
        let delivered = w
            .deliver_request(&mut chan, &shop, &req)
            .expect("interceptor forwards requests");

        // the attacker answers the captured request through her own wallet
        let stolen = captured.lock().expect("tap").clone();
        if let Some(stolen) = stolen {
            if let WalletOutcome::Claim(c) =
                w.consent_and_relay(Who::Mallory, stolen, &cn(Rp::Shop.common_name()))
            {
                *swap.lock().expect("tap") = Some(c.to_canonical());
            }
        }

        let result = match w.consent_and_relay(Who::John, delivered, &cn(Rp::Shop.common_name())) {
            WalletOutcome::Claim(c) => {
                w.submit(&mut chan, &john, Rp::Shop, req.nonce, c.to_canonical())
            }
            _ => None,
        };
        let delivered_to = result.as_ref().and_then(shipping_address);
        let observed = if delivered_to == Some(&mallory_addr) {
            AttackSucceeds
        } else {
            AttackBlocked
        };
        let mut detail = describe(result.as_ref());
        if let Err(e) = hooked {
            detail = format!("{e}; {detail}");
        }
        if observed == AttackBlocked && delivered_to != Some(&john_addr) {
            detail.push_str("; subject's own address was not delivered either");
        }
        phases.push(PhaseReport::new(phase, expectation, observed, detail));
    }
    phases
}
