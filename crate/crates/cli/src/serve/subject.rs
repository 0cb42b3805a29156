use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use anyhow::Result;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;

use cic_core::subject::{
    ConsentMode, Decision, PendingRequestView, RequestState, Wallet, WalletError,
};
use cic_core::{canonical, ClaimRequest, CommonName, Timestamp};

use crate::config::{Loaded, SubjectConfig};
use crate::http::{
    canonical_response, deliver, error_response, header_str, HttpTransport, PEER_HEADER,
    REPLY_TO_HEADER,
};

#[derive(Clone)]
pub struct AppState {
    wallet: Arc<Wallet>,
    transport: Arc<HttpTransport>,
    /// Claims awaiting pickup by the subject's agent, by request id.
    outbox: Arc<Mutex<HashMap<String, Vec<u8>>>>,
}

pub fn build(path: &Path) -> Result<(AppState, SubjectConfig)> {
    let l = Loaded::<SubjectConfig>::read(path)?;
    let c = &l.config;
    let mut wallet = Wallet::new(
        l.trust(&c.trust_store)?,
        l.schema(&c.schema)?,
        c.directory.clone(),
        c.policy.clone(),
    );
    if let Some(state) = &c.state {
        wallet = wallet.with_persistence(&l.path(state))?;
    }
    let state = AppState {
        wallet: Arc::new(wallet),
        transport: Arc::new(HttpTransport),
        outbox: Arc::default(),
    };
    Ok((state, l.config))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/pending", get(pending))
        .route("/v1/pending/{id}", get(one))
        .route("/v1/pending/{id}/approve", post(approve))
        .route("/v1/pending/{id}/deny", post(deny))
        .route("/v1/history", get(history))
        .route("/v1/requests", post(intake))
        .route("/v1/outbox/{id}", get(outbox))
        .route("/healthz", get(super::healthz))
        .with_state(state)
}

pub async fn run(path: &Path) -> Result<()> {
    let (state, config) = build(path)?;
    super::listen(config.listen, "subject", router(state)).await
}

fn status_of(e: &WalletError) -> StatusCode {
    match e {
        WalletError::MalformedRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
        WalletError::NotFound(_) => StatusCode::NOT_FOUND,
        WalletError::InvalidState { .. } => StatusCode::CONFLICT,
        WalletError::ThrottleExceeded(_) => StatusCode::TOO_MANY_REQUESTS,
        WalletError::Directory(_) => StatusCode::UNPROCESSABLE_ENTITY,
        WalletError::AaError { .. } | WalletError::TransportError(_) => StatusCode::BAD_GATEWAY,
        WalletError::Persist(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn wallet_error(e: &WalletError) -> Response {
    error_response(status_of(e), e.code(), &e.to_string())
}

async fn pending(State(s): State<AppState>) -> Response {
    canonical_response(StatusCode::OK, &s.wallet.pending())
}

async fn history(State(s): State<AppState>) -> Response {
    canonical_response(StatusCode::OK, &s.wallet.history())
}

async fn one(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match s.wallet.view(&id) {
        Some(v) => canonical_response(StatusCode::OK, &v),
        None => wallet_error(&WalletError::NotFound(id)),
    }
}

/// Relays an approved request, keeps the claim for pickup and, when the
/// request named a reply address, submits it there.
fn complete(s: &AppState, id: &str) -> Result<PendingRequestView, WalletError> {
    let now = Timestamp::now();
    let claim = s.wallet.relay(id, &*s.transport, now)?;
    let bytes = claim.to_canonical();
    s.outbox
        .lock()
        .expect("outbox poisoned")
        .insert(id.to_string(), bytes.clone());
    let req = s
        .wallet
        .get(id)
        .ok_or_else(|| WalletError::NotFound(id.to_string()))?;
    if let Some(url) = &req.reply_to {
        match deliver(url, &req.request.nonce, bytes) {
            Ok(result) => s.wallet.record_delivery(id, &result)?,
            Err(e) => tracing::warn!(id, error = %e, "delivery failed"),
        }
    }
    s.wallet
        .view(id)
        .ok_or_else(|| WalletError::NotFound(id.to_string()))
}

async fn run_blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, WalletError> + Send + 'static,
) -> Result<T, WalletError> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(WalletError::TransportError(e.to_string())))
}

async fn approve(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    let result = run_blocking(move || {
        s.wallet.decide(&id, Decision::Approve, Timestamp::now())?;
        complete(&s, &id)
    })
    .await;
    match result {
        Ok(v) => canonical_response(StatusCode::OK, &v),
        Err(e) => wallet_error(&e),
    }
}

async fn deny(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match s.wallet.decide(&id, Decision::Deny, Timestamp::now()) {
        Ok(_) => one(State(s), UrlPath(id)).await,
        Err(e) => wallet_error(&e),
    }
}

async fn intake(State(s): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    let request: ClaimRequest = match canonical::decode(&body) {
        Ok(r) => r,
        Err(e) => return wallet_error(&WalletError::MalformedRequest(e.to_string())),
    };
    let peer = match header_str(&headers, PEER_HEADER).map(CommonName::new) {
        None => None,
        Some(Ok(cn)) => Some(cn),
        Some(Err(e)) => {
            return error_response(StatusCode::BAD_REQUEST, "bad_peer", &e.to_string())
        }
    };
    let reply_to = header_str(&headers, REPLY_TO_HEADER).map(str::to_string);
    let now = Timestamp::now();
    let pending = match s.wallet.on_request(request, peer, reply_to, now) {
        Ok(p) => p,
        Err(e) => return wallet_error(&e),
    };
    let id = pending.id.clone();
    if s.wallet.policy().mode == ConsentMode::Auto {
        match s.wallet.apply_policy(&id, now) {
            Ok(p) if p.state == RequestState::Approved => {
                let s2 = s.clone();
                let id2 = id.clone();
                tokio::task::spawn_blocking(move || {
                    if let Err(e) = complete(&s2, &id2) {
                        tracing::warn!(id = id2, error = %e, "automatic release failed");
                    }
                });
            }
            Ok(_) => {}
            Err(e) => tracing::warn!(id, error = %e, "policy evaluation failed"),
        }
    }
    match s.wallet.view(&id) {
        Some(v) => canonical_response(StatusCode::CREATED, &v),
        None => wallet_error(&WalletError::NotFound(id)),
    }
}

/// Agent-side pickup of a finished claim. Claims are sealed to the relying
/// party, so nothing readable leaves here.
async fn outbox(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match s.outbox.lock().expect("outbox poisoned").get(&id) {
        Some(bytes) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            bytes.clone(),
        )
            .into_response(),
        None => wallet_error(&WalletError::NotFound(id)),
    }
}
