//! Subject wallet: queues incoming requests for consent, enforces throttling,
//! and relays approved requests to the subject's attribute authority.
//!
//! The wallet never holds attribute plaintext. Claims pass through it sealed
//! to the relying party.

mod policy;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use policy::{
    AaDirectory, AaEntry, ConsentMode, ConsentPolicy, DirectoryError, ThrottleExceeded,
};

use crate::aa::IssueBody;
use crate::attr::AttributeName;
use crate::canonical;
use crate::cert::CommonName;
use crate::claim::{CertifiedClaim, ClaimRequest};
use crate::fsio::{self, FileError};
use crate::rp::{Failure, VerificationResult};
use crate::time::Timestamp;
use crate::trust::{validate_chain, ChainFailure, SchemaRegistry, TrustStore};

/// Longest purpose text shown to the user, in characters.
pub const PURPOSE_DISPLAY_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Pending,
    Approved,
    Denied,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Deny,
}

/// What the relying party said about a claim the wallet delivered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendingRequest {
    pub id: String,
    pub request: ClaimRequest,
    pub received_at: Timestamp,
    pub rp_chain_valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rp_chain_failure: Option<ChainFailure>,
    /// Authenticated identity of the party that delivered the request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<CommonName>,
    pub peer_mismatch: bool,
    pub human_text: String,
    pub state: RequestState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery: Option<Delivery>,
}

impl PendingRequest {
    pub fn rp_name(&self) -> &CommonName {
        &self.request.rp_certificate.subject_common_name
    }
}

/// The projection served to the consent UI. Carries no keys, claims or
/// attribute values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingRequestView {
    pub id: String,
    pub rp_common_name: CommonName,
    pub attributes: Vec<AttributeName>,
    pub attribute_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    pub received_at: Timestamp,
    pub rp_chain_valid: bool,
    pub peer_mismatch: bool,
    pub human_text: String,
    pub state: RequestState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery: Option<Delivery>,
}

#[derive(Debug, thiserror::Error)]
pub enum WalletError {
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("no request with id {0}")]
    NotFound(String),
    #[error("request {id} is {state:?}")]
    InvalidState { id: String, state: RequestState },
    #[error(transparent)]
    ThrottleExceeded(#[from] ThrottleExceeded),
    #[error(transparent)]
    Directory(#[from] DirectoryError),
    #[error("authority refused ({status}): {error}")]
    AaError { status: u16, error: String },
    #[error("transport error: {0}")]
    TransportError(String),
    #[error(transparent)]
    Persist(#[from] FileError),
}

impl WalletError {
    pub fn code(&self) -> &'static str {
        match self {
            WalletError::MalformedRequest(_) => "malformed_request",
            WalletError::NotFound(_) => "not_found",
            WalletError::InvalidState { .. } => "invalid_state",
            WalletError::ThrottleExceeded(_) => "throttle_exceeded",
            WalletError::Directory(DirectoryError::NoAuthorityConfigured(_)) => {
                "no_authority_configured"
            }
            WalletError::Directory(DirectoryError::MultipleAuthorities) => "multiple_authorities",
            WalletError::AaError { .. } => "aa_error",
            WalletError::TransportError(_) => "transport_error",
            WalletError::Persist(_) => "persist_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportFailure {
    #[error("authority answered {status}: {error}")]
    Rejected { status: u16, error: String },
    #[error("{0}")]
    Unreachable(String),
}

/// Carries an issue call to an attribute authority and returns the raw
/// response body.
pub trait AuthorityTransport: Send + Sync {
    fn issue(&self, entry: &AaEntry, body: &[u8]) -> Result<Vec<u8>, TransportFailure>;
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WalletFile {
    next_id: u64,
    requests: Vec<PendingRequest>,
    last_granted: BTreeMap<CommonName, BTreeMap<AttributeName, Timestamp>>,
}

#[derive(Debug, Default)]
struct State {
    next_id: u64,
    requests: BTreeMap<String, PendingRequest>,
    policy: ConsentPolicy,
    /// Requests currently being relayed.
    busy: BTreeSet<String>,
    /// Throttled (rp, attribute) pairs reserved by an in-flight relay.
    reserved: BTreeSet<(CommonName, AttributeName)>,
}

#[derive(Debug)]
pub struct Wallet {
    trust: TrustStore,
    schema: SchemaRegistry,
    directory: AaDirectory,
    path: Option<PathBuf>,
    state: Mutex<State>,
}

impl Wallet {
    pub fn new(
        trust: TrustStore,
        schema: SchemaRegistry,
        directory: AaDirectory,
        policy: ConsentPolicy,
    ) -> Self {
        Wallet {
            trust,
            schema,
            directory,
            path: None,
            state: Mutex::new(State {
                policy,
                ..State::default()
            }),
        }
    }

    /// Persists the queue to `path`, restoring it first if the file exists.
    pub fn with_persistence(mut self, path: &Path) -> Result<Self, WalletError> {
        if path.exists() {
            let file: WalletFile = fsio::load(path)?;
            let state = self.state.get_mut().expect("wallet lock poisoned");
            state.next_id = file.next_id;
            state.requests = file
                .requests
                .into_iter()
                .map(|r| (r.id.clone(), r))
                .collect();
            for (rp, grants) in file.last_granted {
                state
                    .policy
                    .last_granted
                    .entry(rp)
                    .or_default()
                    .extend(grants);
            }
        }
        self.path = Some(path.to_path_buf());
        Ok(self)
    }

    pub fn schema(&self) -> &SchemaRegistry {
        &self.schema
    }

    pub fn directory(&self) -> &AaDirectory {
        &self.directory
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().expect("wallet lock poisoned")
    }

    fn persist(&self, state: &State) -> Result<(), WalletError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let file = WalletFile {
            next_id: state.next_id,
            requests: state.requests.values().cloned().collect(),
            last_granted: state.policy.last_granted.clone(),
        };
        fsio::store(path, &file)?;
        Ok(())
    }

    /// Intake. `peer` is the authenticated identity of whoever delivered the
    /// request; a mismatch with the embedded certificate is flagged.
    pub fn on_request(
        &self,
        request: ClaimRequest,
        peer: Option<CommonName>,
        reply_to: Option<String>,
        now: Timestamp,
    ) -> Result<PendingRequest, WalletError> {
        request
            .validate()
            .map_err(|e| WalletError::MalformedRequest(e.to_string()))?;
        self.schema
            .check_names(&request.description)
            .map_err(|e| WalletError::MalformedRequest(e.to_string()))?;
        let chain = validate_chain(&request.rp_certificate, &[], &self.trust, now);
        let rp = &request.rp_certificate.subject_common_name;
        let peer_mismatch = peer.as_ref().is_some_and(|p| p != rp);
        let human_text = render(
            &self.schema,
            &request,
            chain.failure_reason,
            peer.as_ref().filter(|_| peer_mismatch),
        );

        let mut state = self.lock();
        state.next_id += 1;
        let pending = PendingRequest {
            id: format!("req-{:06}", state.next_id),
            request,
            received_at: now,
            rp_chain_valid: chain.valid,
            rp_chain_failure: chain.failure_reason,
            peer,
            peer_mismatch,
            human_text,
            state: RequestState::Pending,
            reply_to,
            error: None,
            delivery: None,
        };
        state.requests.insert(pending.id.clone(), pending.clone());
        self.persist(&state)?;
        Ok(pending)
    }

    pub fn get(&self, id: &str) -> Option<PendingRequest> {
        self.lock().requests.get(id).cloned()
    }

    pub fn view(&self, id: &str) -> Option<PendingRequestView> {
        self.get(id).map(|r| self.project(&r))
    }

    /// Pending requests, newest first.
    pub fn pending(&self) -> Vec<PendingRequestView> {
        self.list(|s| s == RequestState::Pending)
    }

    /// Decided requests, newest first.
    pub fn history(&self) -> Vec<PendingRequestView> {
        self.list(|s| s != RequestState::Pending)
    }

    fn list(&self, keep: impl Fn(RequestState) -> bool) -> Vec<PendingRequestView> {
        let state = self.lock();
        let mut out: Vec<_> = state
            .requests
            .values()
            .filter(|r| keep(r.state))
            .map(|r| self.project(r))
            .collect();
        out.sort_by(|a, b| b.received_at.cmp(&a.received_at).then(b.id.cmp(&a.id)));
        out
    }

    fn project(&self, r: &PendingRequest) -> PendingRequestView {
        PendingRequestView {
            id: r.id.clone(),
            rp_common_name: r.rp_name().clone(),
            attributes: r.request.description.clone(),
            attribute_labels: r
                .request
                .description
                .iter()
                .map(|n| self.schema.label(n).to_string())
                .collect(),
            purpose: r.request.purpose.as_deref().map(sanitize_purpose),
            received_at: r.received_at,
            rp_chain_valid: r.rp_chain_valid,
            peer_mismatch: r.peer_mismatch,
            human_text: r.human_text.clone(),
            state: r.state,
            error: r.error.clone(),
            delivery: r.delivery.clone(),
        }
    }

    /// Records a human decision. Approval is refused while any requested
    /// attribute is throttled for this relying party; the request then stays
    /// pending.
    pub fn decide(
        &self,
        id: &str,
        decision: Decision,
        now: Timestamp,
    ) -> Result<PendingRequest, WalletError> {
        let mut state = self.lock();
        let State {
            requests, policy, ..
        } = &mut *state;
        let req = requests
            .get_mut(id)
            .ok_or_else(|| WalletError::NotFound(id.to_string()))?;
        if req.state != RequestState::Pending {
            return Err(WalletError::InvalidState {
                id: id.to_string(),
                state: req.state,
            });
        }
        match decision {
            Decision::Deny => req.state = RequestState::Denied,
            Decision::Approve => {
                let rp = req.rp_name().clone();
                policy.check_throttle(&rp, &req.request.description, now)?;
                req.state = RequestState::Approved;
            }
        }
        let out = req.clone();
        self.persist(&state)?;
        Ok(out)
    }

    /// Lets the policy decide a pending request. Interactive mode leaves it
    /// untouched. Auto mode denies requests with an invalid relying-party
    /// chain or a peer mismatch, approves requests fully covered by
    /// `auto_allow`, and leaves the rest for a human.
    pub fn apply_policy(&self, id: &str, now: Timestamp) -> Result<PendingRequest, WalletError> {
        let (mode, allowed, req) = {
            let state = self.lock();
            let req = state
                .requests
                .get(id)
                .ok_or_else(|| WalletError::NotFound(id.to_string()))?
                .clone();
            let allowed = state
                .policy
                .auto_allows(req.rp_name(), &req.request.description);
            (state.policy.mode, allowed, req)
        };
        if mode != ConsentMode::Auto || req.state != RequestState::Pending {
            return Ok(req);
        }
        if !req.rp_chain_valid || req.peer_mismatch {
            return self.decide(id, Decision::Deny, now);
        }
        if allowed {
            return self.decide(id, Decision::Approve, now);
        }
        Ok(req)
    }

    /// Forwards an approved request to its authority and returns the sealed
    /// claim. The request bytes are passed on exactly as received.
    pub fn relay(
        &self,
        id: &str,
        transport: &dyn AuthorityTransport,
        now: Timestamp,
    ) -> Result<CertifiedClaim, WalletError> {
        let (entry, body, rp, attrs, reserved) = {
            let mut state = self.lock();
            let req = state
                .requests
                .get(id)
                .ok_or_else(|| WalletError::NotFound(id.to_string()))?
                .clone();
            if req.state != RequestState::Approved || state.busy.contains(id) {
                return Err(WalletError::InvalidState {
                    id: id.to_string(),
                    state: req.state,
                });
            }
            let rp = req.rp_name().clone();
            let attrs = req.request.description.clone();
            let prepared = self
                .directory
                .resolve(&attrs)
                .map_err(WalletError::from)
                .and_then(|entry| {
                    state.policy.check_throttle(&rp, &attrs, now)?;
                    let throttled: Vec<_> = attrs
                        .iter()
                        .filter(|a| state.policy.interval(&rp, a) > 0)
                        .map(|a| (rp.clone(), a.clone()))
                        .collect();
                    if let Some((_, a)) = throttled.iter().find(|k| state.reserved.contains(k)) {
                        return Err(ThrottleExceeded {
                            attribute: a.clone(),
                            retry_after: state.policy.interval(&rp, a) as i64,
                        }
                        .into());
                    }
                    Ok((entry.clone(), throttled))
                });
            match prepared {
                Ok((entry, throttled)) => {
                    state.busy.insert(id.to_string());
                    state.reserved.extend(throttled.iter().cloned());
                    let body = IssueBody::wrap(&req.request.to_canonical());
                    (entry, body, rp, attrs, throttled)
                }
                Err(e) => {
                    fail(&mut state, id, &e);
                    self.persist(&state)?;
                    return Err(e);
                }
            }
        };

        let outcome = transport
            .issue(&entry, &body)
            .map_err(|f| match f {
                TransportFailure::Rejected { status, error } => {
                    WalletError::AaError { status, error }
                }
                TransportFailure::Unreachable(m) => WalletError::TransportError(m),
            })
            .and_then(|bytes| {
                canonical::decode::<CertifiedClaim>(&bytes)
                    .map_err(|e| WalletError::TransportError(format!("bad claim: {e}")))
            });

        let mut state = self.lock();
        state.busy.remove(id);
        for k in &reserved {
            state.reserved.remove(k);
        }
        match outcome {
            Ok(claim) => {
                state.policy.record_grant(&rp, &attrs, now);
                if let Some(r) = state.requests.get_mut(id) {
                    r.state = RequestState::Completed;
                }
                self.persist(&state)?;
                Ok(claim)
            }
            Err(e) => {
                fail(&mut state, id, &e);
                self.persist(&state)?;
                Err(e)
            }
        }
    }

    /// Stores the relying party's verdict on a delivered claim. Any returned
    /// attributes are dropped.
    pub fn record_delivery(
        &self,
        id: &str,
        result: &VerificationResult,
    ) -> Result<(), WalletError> {
        let mut state = self.lock();
        let req = state
            .requests
            .get_mut(id)
            .ok_or_else(|| WalletError::NotFound(id.to_string()))?;
        req.delivery = Some(Delivery {
            accepted: result.accepted,
            failure: result.failure,
        });
        self.persist(&state)
    }

    pub fn policy(&self) -> ConsentPolicy {
        self.lock().policy.clone()
    }
}

fn fail(state: &mut State, id: &str, e: &WalletError) {
    if let Some(r) = state.requests.get_mut(id) {
        r.state = RequestState::Failed;
        r.error = Some(e.to_string());
    }
}

/// Strips control characters and caps the length of relying-party text.
pub fn sanitize_purpose(purpose: &str) -> String {
    let clean: String = purpose
        .chars()
        .map(|c| if c.is_control() { ' ' } else { c })
        .collect();
    if clean.chars().count() > PURPOSE_DISPLAY_LIMIT {
        let mut cut: String = clean.chars().take(PURPOSE_DISPLAY_LIMIT).collect();
        cut.push('…');
        cut
    } else {
        clean
    }
}

fn render(
    schema: &SchemaRegistry,
    request: &ClaimRequest,
    chain_failure: Option<ChainFailure>,
    mismatched_peer: Option<&CommonName>,
) -> String {
    let rp = &request.rp_certificate.subject_common_name;
    let labels: Vec<&str> = request
        .description
        .iter()
        .map(|n| schema.label(n))
        .collect();
    let mut text = format!("{rp} asks for: {}.", labels.join(", "));
    if let Some(p) = &request.purpose {
        text.push_str(&format!(
            " Stated purpose (supplied by {rp}): \"{}\".",
            sanitize_purpose(p)
        ));
    }
    if let Some(f) = chain_failure {
        let f = serde_json::to_value(f).expect("unit variant");
        text.push_str(&format!(
            " WARNING: the certificate of {rp} could not be verified ({}).",
            f.as_str().unwrap_or("invalid")
        ));
    }
    if let Some(peer) = mismatched_peer {
        text.push_str(&format!(
            " WARNING: this request names {rp} but was delivered by {peer}."
        ));
    }
    text
}
