//! Attribute authority: authenticates subjects and issues claims over the
//! attributes it holds for them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attr::{AttributeName, AttributeSet};
use crate::canonical::{self, b64};
use crate::cert::Certificate;
use crate::claim::{issue_cic, CertifiedClaim, ClaimError, ClaimRequest};
use crate::entropy::RandomSource;
use crate::fsio::{self, FileError};
use crate::keys::{KeyPair, KeyUsage};
use crate::time::Timestamp;
use crate::trust::{SchemaError, SchemaRegistry};

/// SHA-256 of a bearer token. Only hashes are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenHash(#[serde(with = "b64::array")] pub [u8; 32]);

impl TokenHash {
    pub fn of(token: &str) -> TokenHash {
        TokenHash(Sha256::digest(token.as_bytes()).into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub attributes: AttributeSet,
    pub auth_tokens: BTreeSet<TokenHash>,
}

impl SubjectRecord {
    pub fn new(subject_id: impl Into<String>, attributes: AttributeSet) -> Self {
        SubjectRecord {
            subject_id: subject_id.into(),
            attributes,
            auth_tokens: BTreeSet::new(),
        }
    }

    pub fn with_token(mut self, token: &str) -> Self {
        self.auth_tokens.insert(TokenHash::of(token));
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("duplicate subject id {0:?}")]
    DuplicateSubject(String),
    #[error("empty subject id")]
    EmptySubjectId,
    #[error("subject {subject}: {source}")]
    Schema {
        subject: String,
        #[source]
        source: SchemaError,
    },
    #[error(transparent)]
    File(#[from] FileError),
}

pub type Records = BTreeMap<String, SubjectRecord>;

/// Subject records, optionally backed by a file.
///
/// Readers take an `Arc` snapshot; provisioning goes through a single writer
/// that persists the new state before publishing it.
#[derive(Debug)]
pub struct AttributeStore {
    path: Option<PathBuf>,
    schema: SchemaRegistry,
    current: RwLock<Arc<Records>>,
    writer: Mutex<()>,
}

impl AttributeStore {
    pub fn in_memory(
        schema: SchemaRegistry,
        records: impl IntoIterator<Item = SubjectRecord>,
    ) -> Result<Self, StoreError> {
        let records = index(&schema, records)?;
        Ok(AttributeStore {
            path: None,
            schema,
            current: RwLock::new(Arc::new(records)),
            writer: Mutex::new(()),
        })
    }

    /// The file holds a canonical list of records.
    pub fn open(path: &Path, schema: SchemaRegistry) -> Result<Self, StoreError> {
        let list: Vec<SubjectRecord> = fsio::load(path)?;
        let records = index(&schema, list)?;
        Ok(AttributeStore {
            path: Some(path.to_path_buf()),
            schema,
            current: RwLock::new(Arc::new(records)),
            writer: Mutex::new(()),
        })
    }

    pub fn save_to(path: &Path, records: &[SubjectRecord]) -> Result<(), StoreError> {
        let mut sorted = records.to_vec();
        sorted.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        fsio::store(path, &sorted)?;
        Ok(())
    }

    pub fn snapshot(&self) -> Arc<Records> {
        self.current.read().expect("store lock poisoned").clone()
    }

    pub fn schema(&self) -> &SchemaRegistry {
        &self.schema
    }

    /// Inserts or replaces a record.
    pub fn provision(&self, record: SubjectRecord) -> Result<(), StoreError> {
        check_record(&self.schema, &record)?;
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let mut next = (*self.snapshot()).clone();
        next.insert(record.subject_id.clone(), record);
        if let Some(path) = &self.path {
            let list: Vec<&SubjectRecord> = next.values().collect();
            fsio::store(path, &list)?;
        }
        *self.current.write().expect("store lock poisoned") = Arc::new(next);
        Ok(())
    }
}

fn check_record(schema: &SchemaRegistry, record: &SubjectRecord) -> Result<(), StoreError> {
    if record.subject_id.is_empty() {
        return Err(StoreError::EmptySubjectId);
    }
    schema
        .check_set(&record.attributes)
        .map_err(|source| StoreError::Schema {
            subject: record.subject_id.clone(),
            source,
        })
}

fn index(
    schema: &SchemaRegistry,
    records: impl IntoIterator<Item = SubjectRecord>,
) -> Result<Records, StoreError> {
    let mut out = Records::new();
    for record in records {
        check_record(schema, &record)?;
        if out.contains_key(&record.subject_id) {
            return Err(StoreError::DuplicateSubject(record.subject_id));
        }
        out.insert(record.subject_id.clone(), record);
    }
    Ok(out)
}

/// Maps a presented credential to a subject id.
pub trait Authenticator: Send + Sync {
    fn authenticate(&self, credential: &str, records: &Records) -> Option<String>;
}

/// Looks the token's hash up among the records' `auth_tokens`.
#[derive(Debug, Default, Clone, Copy)]
pub struct BearerTokenAuthenticator;

impl Authenticator for BearerTokenAuthenticator {
    fn authenticate(&self, credential: &str, records: &Records) -> Option<String> {
        let hash = TokenHash::of(credential);
        records
            .values()
            .find(|r| r.auth_tokens.contains(&hash))
            .map(|r| r.subject_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IssueError {
    #[error("authentication failed")]
    AuthenticationFailed,
    #[error("unknown attribute {0}")]
    UnknownAttribute(AttributeName),
    #[error("subject has no value for {0}")]
    AttributeUnavailable(AttributeName),
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("issuance failed: {0}")]
    Internal(String),
}

impl IssueError {
    pub fn code(&self) -> &'static str {
        match self {
            IssueError::AuthenticationFailed => "authentication_failed",
            IssueError::UnknownAttribute(_) => "unknown_attribute",
            IssueError::AttributeUnavailable(_) => "attribute_unavailable",
            IssueError::MalformedRequest(_) => "malformed_request",
            IssueError::Internal(_) => "internal",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            IssueError::AuthenticationFailed => 401,
            IssueError::AttributeUnavailable(_) => 404,
            IssueError::UnknownAttribute(_) | IssueError::MalformedRequest(_) => 422,
            IssueError::Internal(_) => 500,
        }
    }
}

/// Error body returned by the issue endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

impl From<&IssueError> for ErrorBody {
    fn from(e: &IssueError) -> Self {
        ErrorBody {
            error: e.code().to_string(),
            detail: e.to_string(),
        }
    }
}

/// The body of an issue call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssueBody {
    pub request: ClaimRequest,
}

impl IssueBody {
    /// Wraps already-canonical request bytes without re-encoding them.
    pub fn wrap(request_bytes: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(request_bytes.len() + 12);
        out.extend_from_slice(b"{\"request\":");
        out.extend_from_slice(request_bytes);
        out.push(b'}');
        out
    }
}

pub struct AttributeAuthority {
    sig_keys: KeyPair,
    certificate: Certificate,
    intermediates: Vec<Certificate>,
    store: Arc<AttributeStore>,
    authenticator: Box<dyn Authenticator>,
}

impl std::fmt::Debug for AttributeAuthority {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AttributeAuthority")
            .field("certificate", &self.certificate.subject_common_name)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuthoritySetupError {
    #[error("signing key does not match the certificate")]
    KeyMismatch,
    #[error("key pair is not a signature key")]
    WrongUsage,
}

impl AttributeAuthority {
    pub fn new(
        sig_keys: KeyPair,
        certificate: Certificate,
        intermediates: Vec<Certificate>,
        store: Arc<AttributeStore>,
    ) -> Result<Self, AuthoritySetupError> {
        if sig_keys.usage() != KeyUsage::Signature {
            return Err(AuthoritySetupError::WrongUsage);
        }
        if sig_keys.public() != certificate.sig_public_key {
            return Err(AuthoritySetupError::KeyMismatch);
        }
        Ok(AttributeAuthority {
            sig_keys,
            certificate,
            intermediates,
            store,
            authenticator: Box::new(BearerTokenAuthenticator),
        })
    }

    pub fn with_authenticator(mut self, authenticator: Box<dyn Authenticator>) -> Self {
        self.authenticator = authenticator;
        self
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn store(&self) -> &Arc<AttributeStore> {
        &self.store
    }

    pub fn authenticate_subject(&self, credential: &str) -> Result<String, IssueError> {
        self.authenticator
            .authenticate(credential, &self.store.snapshot())
            .ok_or(IssueError::AuthenticationFailed)
    }

    /// Authenticates, then parses an [`IssueBody`] and issues.
    pub fn handle_issue_body(
        &self,
        body: &[u8],
        credential: &str,
        now: Timestamp,
        rng: &mut dyn RandomSource,
    ) -> Result<CertifiedClaim, IssueError> {
        let subject = self.authenticate_subject(credential)?;
        let parsed: IssueBody = canonical::decode(body)
            .map_err(|e| IssueError::MalformedRequest(e.to_string()))?;
        self.issue_for(&subject, &parsed.request, now, rng)
    }

    pub fn handle_issue(
        &self,
        request: &ClaimRequest,
        credential: &str,
        now: Timestamp,
        rng: &mut dyn RandomSource,
    ) -> Result<CertifiedClaim, IssueError> {
        let subject = self.authenticate_subject(credential)?;
        self.issue_for(&subject, request, now, rng)
    }

    fn issue_for(
        &self,
        subject: &str,
        request: &ClaimRequest,
        now: Timestamp,
        rng: &mut dyn RandomSource,
    ) -> Result<CertifiedClaim, IssueError> {
        request
            .validate()
            .map_err(|e| IssueError::MalformedRequest(e.to_string()))?;
        self.store
            .schema()
            .check_names(&request.description)
            .map_err(|e| match e {
                SchemaError::UnknownAttribute(name) => IssueError::UnknownAttribute(name),
                other => IssueError::MalformedRequest(other.to_string()),
            })?;
        let records = self.store.snapshot();
        let record = records
            .get(subject)
            .ok_or(IssueError::AuthenticationFailed)?;
        let selected = record
            .attributes
            .select(&request.description)
            .map_err(IssueError::AttributeUnavailable)?;
        issue_cic(
            &selected,
            request.nonce,
            &request.rp_certificate.enc_public_key,
            &self.sig_keys,
            &self.certificate,
            &self.intermediates,
            now,
            rng,
        )
        .map_err(|e: ClaimError| IssueError::Internal(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::{AttributeValue, ValueType};
    use crate::cert::CommonName;
    use crate::claim::{generate_nonce, verify_cic, Nonce};
    use crate::entropy::SeededRandom;
    use crate::party::Party;
    use crate::trust::AttributeSchema;

    const T0: Timestamp = Timestamp::from_unix(1_700_000_000);
    const T_END: Timestamp = Timestamp::from_unix(1_900_000_000);
    const NOW: Timestamp = Timestamp::from_unix(1_767_225_600);

    fn schema() -> SchemaRegistry {
        SchemaRegistry::new([
            AttributeSchema::new("name", ValueType::Text, "Name"),
            AttributeSchema::new("credit_score", ValueType::Integer, "Credit score"),
            AttributeSchema::new("ssn", ValueType::Text, "Social security number"),
            AttributeSchema::new("bank_balance", ValueType::Integer, "Bank balance"),
        ])
        .unwrap()
    }

    fn john() -> SubjectRecord {
        SubjectRecord::new(
            "s-1001",
            AttributeSet::new()
                .with("name", AttributeValue::text("John Davis").unwrap())
                .with("credit_score", 589)
                .with("ssn", AttributeValue::text("078-05-1120").unwrap()),
        )
        .with_token("tok-john")
    }

    struct Fixture {
        aa: AttributeAuthority,
        rp: Party,
        rng: SeededRandom,
    }

    fn fixture() -> Fixture {
        let mut rng = SeededRandom::new(5);
        let root =
            Party::root(CommonName::new("root.example").unwrap(), &mut rng, T0, T_END).unwrap();
        let aa = Party::issued_by(
            CommonName::new("bankofamerica.com").unwrap(),
            &root,
            &mut rng,
            T0,
            T_END,
        )
        .unwrap();
        let rp = Party::issued_by(
            CommonName::new("lender.example").unwrap(),
            &root,
            &mut rng,
            T0,
            T_END,
        )
        .unwrap();
        let store = Arc::new(AttributeStore::in_memory(schema(), [john()]).unwrap());
        let aa = AttributeAuthority::new(aa.sig, aa.cert, vec![], store).unwrap();
        Fixture { aa, rp, rng }
    }

    fn request(f: &mut Fixture, attrs: &[&str]) -> ClaimRequest {
        ClaimRequest {
            description: attrs.iter().map(|a| AttributeName::new(*a).unwrap()).collect(),
            purpose: Some("loan application".into()),
            nonce: generate_nonce(&mut f.rng).unwrap(),
            rp_certificate: f.rp.cert.clone(),
        }
    }

    #[test]
    fn authenticates_provisioned_token_only() {
        let f = fixture();
        assert_eq!(f.aa.authenticate_subject("tok-john").unwrap(), "s-1001");
        assert_eq!(
            f.aa.authenticate_subject("tok-other"),
            Err(IssueError::AuthenticationFailed)
        );
    }

    #[test]
    fn issues_exactly_the_requested_attributes() {
        let mut f = fixture();
        let req = request(&mut f, &["name", "credit_score"]);
        let claim = f.aa.handle_issue(&req, "tok-john", NOW, &mut f.rng).unwrap();
        let got = verify_cic(&claim, &req.nonce, &f.rp.enc).unwrap();
        assert_eq!(
            canonical::encode(&got).unwrap(),
            br#"{"credit_score":589,"name":"John Davis"}"#
        );
        assert!(!got.contains(&AttributeName::new("ssn").unwrap()));
    }

    #[test]
    fn authentication_precedes_everything() {
        let mut f = fixture();
        let mut req = request(&mut f, &["name"]);
        req.description.push(AttributeName::new("name").unwrap());
        assert_eq!(
            f.aa.handle_issue(&req, "nope", NOW, &mut f.rng),
            Err(IssueError::AuthenticationFailed)
        );
        assert!(matches!(
            f.aa.handle_issue(&req, "tok-john", NOW, &mut f.rng),
            Err(IssueError::MalformedRequest(_))
        ));
        assert_eq!(
            f.aa.handle_issue_body(b"garbage", "nope", NOW, &mut f.rng),
            Err(IssueError::AuthenticationFailed)
        );
    }

    #[test]
    fn missing_attribute_is_all_or_nothing() {
        let mut f = fixture();
        // authenticates fine, fails downstream
        assert!(f.aa.authenticate_subject("tok-john").is_ok());
        let req = request(&mut f, &["name", "bank_balance"]);
        assert_eq!(
            f.aa.handle_issue(&req, "tok-john", NOW, &mut f.rng),
            Err(IssueError::AttributeUnavailable(
                AttributeName::new("bank_balance").unwrap()
            ))
        );
    }

    #[test]
    fn unknown_attribute() {
        let mut f = fixture();
        let req = request(&mut f, &["shoe_size"]);
        assert_eq!(
            f.aa.handle_issue(&req, "tok-john", NOW, &mut f.rng),
            Err(IssueError::UnknownAttribute(
                AttributeName::new("shoe_size").unwrap()
            ))
        );
    }

    #[test]
    fn body_round_trip_uses_request_bytes_verbatim() {
        let mut f = fixture();
        let req = request(&mut f, &["credit_score"]);
        let body = IssueBody::wrap(&req.to_canonical());
        assert_eq!(
            body,
            canonical::encode(&IssueBody {
                request: req.clone()
            })
            .unwrap()
        );
        let claim = f
            .aa
            .handle_issue_body(&body, "tok-john", NOW, &mut f.rng)
            .unwrap();
        assert!(verify_cic(&claim, &req.nonce, &f.rp.enc).is_ok());
        assert!(matches!(
            f.aa.handle_issue_body(b"{\"request\":1}", "tok-john", NOW, &mut f.rng),
            Err(IssueError::MalformedRequest(_))
        ));
    }

    #[test]
    fn claim_is_bound_to_the_request_nonce() {
        let mut f = fixture();
        let req = request(&mut f, &["name"]);
        let claim = f.aa.handle_issue(&req, "tok-john", NOW, &mut f.rng).unwrap();
        assert!(matches!(
            verify_cic(&claim, &Nonce([0; 16]), &f.rp.enc),
            Err(ClaimError::NonceMismatch)
        ));
    }

    #[test]
    fn custom_authenticator() {
        struct Everyone;
        impl Authenticator for Everyone {
            fn authenticate(&self, _: &str, _: &Records) -> Option<String> {
                Some("s-1001".into())
            }
        }
        let mut f = fixture();
        let aa = AttributeAuthority::new(
            f.aa.sig_keys.clone(),
            f.aa.certificate.clone(),
            vec![],
            f.aa.store.clone(),
        )
        .unwrap()
        .with_authenticator(Box::new(Everyone));
        let req = request(&mut f, &["name"]);
        assert!(aa.handle_issue(&req, "anything", NOW, &mut f.rng).is_ok());
    }

    #[test]
    fn setup_rejects_mismatched_keys() {
        let mut f = fixture();
        let other = KeyPair::generate(KeyUsage::Signature, &mut f.rng).unwrap();
        assert_eq!(
            AttributeAuthority::new(other, f.aa.certificate.clone(), vec![], f.aa.store.clone())
                .unwrap_err(),
            AuthoritySetupError::KeyMismatch
        );
        let enc = f.rp.enc.clone();
        assert_eq!(
            AttributeAuthority::new(enc, f.aa.certificate.clone(), vec![], f.aa.store.clone())
                .unwrap_err(),
            AuthoritySetupError::WrongUsage
        );
    }

    #[test]
    fn store_validates_and_persists() {
        let bad = SubjectRecord::new("s-1", AttributeSet::new().with("credit_score", true));
        assert!(matches!(
            AttributeStore::in_memory(schema(), [bad]),
            Err(StoreError::Schema { .. })
        ));
        assert!(matches!(
            AttributeStore::in_memory(schema(), [john(), john()]),
            Err(StoreError::DuplicateSubject(_))
        ));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("subjects.json");
        AttributeStore::save_to(&path, &[john()]).unwrap();
        let store = AttributeStore::open(&path, schema()).unwrap();
        let before = store.snapshot();
        store
            .provision(SubjectRecord::new(
                "s-2002",
                AttributeSet::new().with("bank_balance", 1200),
            ))
            .unwrap();
        assert_eq!(before.len(), 1);
        assert_eq!(store.snapshot().len(), 2);
        let reopened = AttributeStore::open(&path, schema()).unwrap();
        assert_eq!(*reopened.snapshot(), *store.snapshot());
    }
}
