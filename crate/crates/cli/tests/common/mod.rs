//! Three real service processes on localhost, driven over HTTP.
#![allow(dead_code)]

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use serde_json::Value;

use cic_core::rp::{VerificationResult, NONCE_HEADER};
use cic_core::{canonical, ClaimRequest};

pub fn cic() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cic"))
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

pub struct Services {
    pub dir: tempfile::TempDir,
    pub aa: String,
    pub rp: String,
    pub wallet: String,
    children: Vec<Child>,
    client: Client,
}

impl Drop for Services {
    fn drop(&mut self) {
        for c in &mut self.children {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

fn spawn(role: &str, config: &Path) -> Child {
    cic()
        .args(["serve", role, "--config"])
        .arg(config)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .expect("spawn service")
}

impl Services {
    pub fn start(seed: u64) -> Services {
        let dir = tempfile::tempdir().unwrap();
        let ports = [free_port(), free_port(), free_port()];
        let status = cic()
            .args(["fixtures", "--seed", &seed.to_string(), "--out"])
            .arg(dir.path())
            .arg("--ports")
            .arg(format!("{},{},{}", ports[0], ports[1], ports[2]))
            .stdout(Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        let conf = |n: &str| -> PathBuf { dir.path().join(n) };
        let children = vec![
            spawn("aa", &conf("aa.toml")),
            spawn("rp", &conf("rp.toml")),
            spawn("subject", &conf("subject.toml")),
        ];
        let url = |p: u16| format!("http://127.0.0.1:{p}");
        let s = Services {
            aa: url(ports[0]),
            rp: url(ports[1]),
            wallet: url(ports[2]),
            dir,
            children,
            client: Client::builder()
                .timeout(Duration::from_secs(20))
                .build()
                .unwrap(),
        };
        for base in [&s.aa, &s.rp, &s.wallet] {
            s.wait_healthy(base);
        }
        s
    }

    fn wait_healthy(&self, base: &str) {
        let deadline = Instant::now() + Duration::from_secs(20);
        loop {
            if let Ok(r) = self.client.get(format!("{base}/healthz")).send() {
                if r.status().is_success() {
                    return;
                }
            }
            assert!(Instant::now() < deadline, "{base} never became healthy");
            std::thread::sleep(Duration::from_millis(50));
        }
    }

    /// Asks the relying party for a request; returns its exact bytes.
    pub fn new_request(&self, attributes: &[&str], purpose: &str) -> (Vec<u8>, ClaimRequest) {
        let body = canonical::encode(&serde_json::json!({
            "attributes": attributes,
            "purpose": purpose,
        }))
        .unwrap();
        let r = self
            .client
            .post(format!("{}/v1/claims/request", self.rp))
            .body(body)
            .send()
            .unwrap();
        assert_eq!(r.status(), 200);
        let bytes = r.bytes().unwrap().to_vec();
        let req = canonical::decode(&bytes).unwrap();
        (bytes, req)
    }

    /// Hands request bytes to the wallet as the relying party's agent would.
    pub fn intake(&self, bytes: &[u8], peer: &str, reply_to: Option<&str>) -> (u16, Value) {
        let mut b = self
            .client
            .post(format!("{}/v1/requests", self.wallet))
            .header("Cic-Peer", peer)
            .body(bytes.to_vec());
        if let Some(url) = reply_to {
            b = b.header("Cic-Reply-To", url);
        }
        json(b.send().unwrap())
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        json(self.client.get(format!("{}{path}", self.wallet)).send().unwrap())
    }

    pub fn post(&self, path: &str) -> (u16, Value) {
        json(self.client.post(format!("{}{path}", self.wallet)).send().unwrap())
    }

    pub fn outbox(&self, id: &str) -> Option<Vec<u8>> {
        let r = self
            .client
            .get(format!("{}/v1/outbox/{id}", self.wallet))
            .send()
            .unwrap();
        r.status()
            .is_success()
            .then(|| r.bytes().unwrap().to_vec())
    }

    pub fn submit(&self, req: &ClaimRequest, claim: &[u8]) -> VerificationResult {
        let r = self
            .client
            .post(format!("{}/v1/claims/submit", self.rp))
            .header(NONCE_HEADER, req.nonce.to_b64())
            .body(claim.to_vec())
            .send()
            .unwrap();
        canonical::decode(&r.bytes().unwrap()).unwrap()
    }

    pub fn submit_url(&self) -> String {
        format!("{}/v1/claims/submit", self.rp)
    }

    /// Request, intake, approval, pickup. Returns the request and claim.
    pub fn obtain(&self, attributes: &[&str]) -> (ClaimRequest, Vec<u8>) {
        let (bytes, req) = self.new_request(attributes, "loan application");
        let (status, view) = self.intake(&bytes, "lender.example", None);
        assert_eq!(status, 201, "{view}");
        let id = view["id"].as_str().unwrap().to_string();
        let (status, view) = self.post(&format!("/v1/pending/{id}/approve"));
        assert_eq!(status, 200, "{view}");
        assert_eq!(view["state"], "completed");
        (req, self.outbox(&id).expect("claim in outbox"))
    }
}

fn json(r: reqwest::blocking::Response) -> (u16, Value) {
    let status = r.status().as_u16();
    let body = r.bytes().unwrap();
    (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

/// The in-memory outcomes and the HTTP outcomes, phase by phase.
pub struct Comparison {
    pub phase: &'static str,
    pub memory: String,
    pub http: String,
}

impl Comparison {
    pub fn agrees(&self) -> bool {
        self.memory == self.http
    }
}

fn outcome(r: &VerificationResult) -> String {
    match r.failure {
        None if r.accepted => "accepted".into(),
        Some(f) => f.to_string(),
        None => "rejected".into(),
    }
}

/// Runs happy_path and replay over HTTP and lines each phase up against the
/// in-memory scenario at the same seed.
pub fn compare_with_scenarios(s: &Services, seed: u64) -> Vec<Comparison> {
    use cic_core::harness::run_scenario;
    let memory = |scenario: &str, phase: &str| -> String {
        let r = run_scenario(scenario, seed).unwrap();
        let p = r.phase(phase).expect("phase present");
        // accepted details start with "accepted", rejections name the failure
        match p.detail.strip_prefix("rejected: ") {
            Some(f) => f.to_string(),
            None if p.detail.starts_with("accepted") => "accepted".into(),
            None => p.detail.clone(),
        }
    };

    let mut out = Vec::new();
    let (req, claim) = s.obtain(&["name", "credit_score"]);
    let first = s.submit(&req, &claim);
    let exact = first.attributes.as_ref().map(|a| canonical::encode_string(a).unwrap());
    out.push(Comparison {
        phase: "happy_path/honest",
        memory: format!(
            "{} {}",
            memory("happy_path", "honest"),
            r#"{"credit_score":589,"name":"John Davis"}"#
        ),
        http: format!("{} {}", outcome(&first), exact.unwrap_or_default()),
    });
    let again = s.submit(&req, &claim);
    out.push(Comparison {
        phase: "replay/replay",
        memory: memory("replay", "replay"),
        http: outcome(&again),
    });
    let (fresh_bytes, fresh) = s.new_request(&["name", "credit_score"], "loan application");
    let _ = fresh_bytes;
    let reused = s.submit(&fresh, &claim);
    out.push(Comparison {
        phase: "replay/replay_against_new_request",
        memory: memory("replay", "replay_against_new_request"),
        http: outcome(&reused),
    });
    out
}
