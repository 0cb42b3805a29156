use std::path::Path;
use std::sync::Arc;

use anyhow::Result;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;

use cic_core::aa::{AttributeAuthority, AttributeStore, ErrorBody};
use cic_core::entropy::OsRandom;
use cic_core::{KeyUsage, Timestamp};

use crate::config::{AaConfig, Loaded};
use crate::http::{bearer, canonical_response};

pub fn build(path: &Path) -> Result<AttributeAuthority> {
    let l = Loaded::<AaConfig>::read(path)?;
    let c = &l.config;
    let schema = l.schema(&c.schema)?;
    let store = AttributeStore::open(&l.path(&c.records), schema)?;
    let intermediates = c
        .intermediates
        .iter()
        .map(|p| l.cert(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(AttributeAuthority::new(
        l.key(&c.signing_key, KeyUsage::Signature)?,
        l.cert(&c.certificate)?,
        intermediates,
        Arc::new(store),
    )?)
}

pub fn router(aa: Arc<AttributeAuthority>) -> Router {
    Router::new()
        .route("/v1/issue", post(issue))
        .route("/healthz", get(super::healthz))
        .with_state(aa)
}

pub async fn run(path: &Path) -> Result<()> {
    let listen = Loaded::<AaConfig>::read(path)?.config.listen;
    let aa = Arc::new(build(path)?);
    super::listen(listen, "aa", router(aa)).await
}

async fn issue(
    State(aa): State<Arc<AttributeAuthority>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let credential = bearer(&headers).unwrap_or("");
    match aa.handle_issue_body(&body, credential, Timestamp::now(), &mut OsRandom) {
        Ok(claim) => canonical_response(StatusCode::OK, &claim),
        Err(e) => {
            tracing::info!(error = e.code(), "issue refused");
            let status =
                StatusCode::from_u16(e.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            canonical_response(status, &ErrorBody::from(&e))
        }
    }
}
