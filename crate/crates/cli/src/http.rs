use std::time::Duration;

use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::Serialize;

use cic_core::aa::ErrorBody;
use cic_core::rp::{VerificationResult, NONCE_HEADER};
use cic_core::subject::{AaEntry, AuthorityTransport, TransportFailure};
use cic_core::{canonical, Nonce};

/// Authenticated identity of whoever hands a request to the wallet.
pub const PEER_HEADER: &str = "Cic-Peer";
/// Where the wallet should submit the resulting claim.
pub const REPLY_TO_HEADER: &str = "Cic-Reply-To";

const TIMEOUT: Duration = Duration::from_secs(10);

/// Canonical JSON with the given status.
pub fn canonical_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match canonical::encode(body) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", &e.to_string()),
    }
}

pub fn error_response(status: StatusCode, error: &str, detail: &str) -> Response {
    canonical_response(
        status,
        &ErrorBody {
            error: error.to_string(),
            detail: detail.to_string(),
        },
    )
}

pub fn header_str<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

pub fn bearer(headers: &HeaderMap) -> Option<&str> {
    header_str(headers, header::AUTHORIZATION.as_str())?.strip_prefix("Bearer ")
}

fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(TIMEOUT)
        .build()
        .expect("http client")
}

/// Issue calls over HTTP; `endpoint` is the authority's base URL. Each call
/// builds its own blocking client, so the transport may be created and
/// dropped inside an async runtime.
pub struct HttpTransport;

impl AuthorityTransport for HttpTransport {
    fn issue(&self, entry: &AaEntry, body: &[u8]) -> Result<Vec<u8>, TransportFailure> {
        let url = format!("{}/v1/issue", entry.endpoint.trim_end_matches('/'));
        let resp = client()
            .post(&url)
            .bearer_auth(&entry.credential)
            .header(header::CONTENT_TYPE, "application/json")
            .body(body.to_vec())
            .send()
            .map_err(|e| TransportFailure::Unreachable(format!("{url}: {e}")))?;
        let status = resp.status();
        let bytes = resp
            .bytes()
            .map_err(|e| TransportFailure::Unreachable(format!("{url}: {e}")))?;
        if status.is_success() {
            return Ok(bytes.to_vec());
        }
        let error = canonical::decode::<ErrorBody>(&bytes)
            .map(|b| b.error)
            .unwrap_or_else(|_| "unreadable_error".to_string());
        Err(TransportFailure::Rejected {
            status: status.as_u16(),
            error,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DeliveryError {
    #[error("{0}")]
    Http(#[from] reqwest::Error),
    #[error("relying party answered {0} with no verification result")]
    NoResult(u16),
}

/// Submits claim bytes to a relying party's submit URL.
pub fn deliver(
    url: &str,
    nonce: &Nonce,
    claim: Vec<u8>,
) -> Result<VerificationResult, DeliveryError> {
    let resp = client()
        .post(url)
        .header(NONCE_HEADER, nonce.to_b64())
        .header(header::CONTENT_TYPE, "application/json")
        .body(claim)
        .send()?;
    let status = resp.status().as_u16();
    let bytes = resp.bytes()?;
    canonical::decode(&bytes).map_err(|_| DeliveryError::NoResult(status))
}
