use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Result;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use cic_core::entropy::OsRandom;
use cic_core::rp::{
    CreateRequestError, Failure, RelyingParty, VerificationResult, NONCE_HEADER,
};
use cic_core::{canonical, AttributeName, KeyUsage, Nonce, Timestamp};

use crate::config::{Loaded, RpConfig};
use crate::http::{canonical_response, error_response, header_str};

/// Body of `POST /v1/claims/request`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestBody {
    pub attributes: Vec<AttributeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
}

pub fn build(path: &Path, ttl_override: Option<i64>) -> Result<RelyingParty> {
    let l = Loaded::<RpConfig>::read(path)?;
    let c = &l.config;
    Ok(RelyingParty::new(
        l.cert(&c.certificate)?,
        l.key(&c.encryption_key, KeyUsage::Encryption)?,
        l.schema(&c.schema)?,
        l.trust(&c.trust_store)?,
        ttl_override.unwrap_or(c.ttl_seconds),
    )?)
}

pub fn router(rp: Arc<RelyingParty>) -> Router {
    Router::new()
        .route("/v1/claims/request", post(create))
        .route("/v1/claims/submit", post(submit))
        .route("/healthz", get(super::healthz))
        .with_state(rp)
}

pub async fn run(path: &Path, ttl_override: Option<i64>) -> Result<()> {
    let l = Loaded::<RpConfig>::read(path)?;
    let ttl = ttl_override.unwrap_or(l.config.ttl_seconds);
    let rp = Arc::new(build(path, ttl_override)?);
    let sweeper = rp.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs((ttl / 2).max(1) as u64));
        loop {
            tick.tick().await;
            let n = sweeper.evict_expired(Timestamp::now());
            if n > 0 {
                tracing::debug!(evicted = n, "nonce sweep");
            }
        }
    });
    super::listen(l.config.listen, "rp", router(rp)).await
}

async fn create(State(rp): State<Arc<RelyingParty>>, body: Bytes) -> Response {
    let req: RequestBody = match canonical::decode(&body) {
        Ok(r) => r,
        Err(e) => {
            return error_response(StatusCode::UNPROCESSABLE_ENTITY, "malformed", &e.to_string())
        }
    };
    match rp.create_request(&req.attributes, req.purpose, Timestamp::now(), &mut OsRandom) {
        Ok(request) => canonical_response(StatusCode::OK, &request),
        Err(e) => {
            let (status, code) = match &e {
                CreateRequestError::UnknownAttribute(_) => {
                    (StatusCode::UNPROCESSABLE_ENTITY, "unknown_attribute")
                }
                CreateRequestError::Invalid(_) => {
                    (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request")
                }
                CreateRequestError::Rng(_) => (StatusCode::SERVICE_UNAVAILABLE, "rng_failure"),
                CreateRequestError::NonceReuse => (StatusCode::SERVICE_UNAVAILABLE, "nonce_reuse"),
            };
            error_response(status, code, &e.to_string())
        }
    }
}

async fn submit(State(rp): State<Arc<RelyingParty>>, headers: HeaderMap, body: Bytes) -> Response {
    let Some(nonce) = header_str(&headers, NONCE_HEADER).and_then(Nonce::from_b64) else {
        return canonical_response(
            StatusCode::BAD_REQUEST,
            &VerificationResult::rejected(Failure::Malformed),
        );
    };
    let result = rp.accept_submission(&nonce, &body, Timestamp::now());
    match (&result.failure, result.accepted) {
        (_, true) => tracing::info!(rp = %rp.name(), "claim accepted"),
        (Some(f), _) => tracing::info!(rp = %rp.name(), failure = %f, "claim rejected"),
        _ => {}
    }
    canonical_response(StatusCode::OK, &result)
}
