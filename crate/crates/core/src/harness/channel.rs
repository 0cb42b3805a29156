use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::{self, b64};
use crate::claim::Nonce;
use crate::time::{Clock, ManualClock, Timestamp};

/// One delivered (or dropped) message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub at: Timestamp,
    pub from: String,
    pub to: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handle: Option<Nonce>,
    /// The canonical JSON body, or `{"raw": <base64url>}` when the bytes are
    /// not canonical JSON.
    pub body: Value,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub intercepted: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dropped: bool,
}

/// Shared, ordered message log.
#[derive(Debug, Clone)]
pub struct Recorder {
    clock: Arc<ManualClock>,
    entries: Arc<Mutex<Vec<TranscriptEntry>>>,
}

impl Recorder {
    pub fn new(clock: Arc<ManualClock>) -> Self {
        Recorder {
            clock,
            entries: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn record(&self, from: &str, to: &str, msg: &Message, intercepted: bool, dropped: bool) {
        let mut entries = self.entries.lock().expect("recorder poisoned");
        let seq = entries.len() as u64 + 1;
        entries.push(TranscriptEntry {
            seq,
            at: self.clock.now(),
            from: from.to_string(),
            to: to.to_string(),
            label: msg.label.clone(),
            handle: msg.handle,
            body: body_value(&msg.body),
            intercepted,
            dropped,
        });
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("recorder poisoned").clone()
    }

    pub fn take(&self) -> Vec<TranscriptEntry> {
        std::mem::take(&mut *self.entries.lock().expect("recorder poisoned"))
    }
}

fn body_value(bytes: &[u8]) -> Value {
    canonical::decode_value(bytes)
        .unwrap_or_else(|_| serde_json::json!({ "raw": b64::encode(bytes) }))
}

/// A message on the wire: a label, an optional clear-text nonce handle and a
/// canonical body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub label: String,
    pub handle: Option<Nonce>,
    pub body: Vec<u8>,
}

impl Message {
    pub fn new(label: &str, body: Vec<u8>) -> Self {
        Message {
            label: label.to_string(),
            handle: None,
            body,
        }
    }

    pub fn with_handle(mut self, handle: Nonce) -> Self {
        self.handle = Some(handle);
        self
    }
}

pub enum Action {
    Forward,
    Replace(Message),
    Drop,
}

type InterceptFn = Box<dyn FnMut(&str, &Message) -> Action + Send>;

/// An adversary hook on a channel. `owner` names the endpoint the adversary
/// controls, if any.
pub struct Interceptor {
    owner: Option<String>,
    f: InterceptFn,
}

impl Interceptor {
    /// A third party on the path between the endpoints.
    pub fn on_path(f: impl FnMut(&str, &Message) -> Action + Send + 'static) -> Self {
        Interceptor {
            owner: None,
            f: Box::new(f),
        }
    }

    /// An adversary that is itself one of the endpoints.
    pub fn owning(
        endpoint: &str,
        f: impl FnMut(&str, &Message) -> Action + Send + 'static,
    ) -> Self {
        Interceptor {
            owner: Some(endpoint.to_string()),
            f: Box::new(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChannelError {
    #[error("channel {0} <-> {1} is secure; an on-path adversary cannot act on it")]
    Secure(String, String),
    #[error("{0} is not an endpoint of this channel")]
    NotAnEndpoint(String),
}

/// An in-memory link between two actors.
pub struct SimChannel {
    a: String,
    b: String,
    secure: bool,
    interceptor: Option<Interceptor>,
    recorder: Recorder,
}

impl SimChannel {
    pub fn new(a: &str, b: &str, secure: bool, recorder: &Recorder) -> Self {
        SimChannel {
            a: a.to_string(),
            b: b.to_string(),
            secure,
            interceptor: None,
            recorder: recorder.clone(),
        }
    }

    pub fn is_secure(&self) -> bool {
        self.secure
    }

    pub fn endpoints(&self) -> (&str, &str) {
        (&self.a, &self.b)
    }

    /// Refused on a secure channel unless the adversary owns an endpoint.
    pub fn set_interceptor(&mut self, interceptor: Interceptor) -> Result<(), ChannelError> {
        let owns_endpoint = interceptor
            .owner
            .as_deref()
            .is_some_and(|o| o == self.a || o == self.b);
        if let Some(o) = &interceptor.owner {
            if !owns_endpoint {
                return Err(ChannelError::NotAnEndpoint(o.clone()));
            }
        }
        if self.secure && !owns_endpoint {
            return Err(ChannelError::Secure(self.a.clone(), self.b.clone()));
        }
        self.interceptor = Some(interceptor);
        Ok(())
    }

    /// Delivers `msg` from `from` to the other endpoint, letting the
    /// interceptor act first. Returns what arrives, if anything.
    pub fn send(&mut self, from: &str, msg: Message) -> Option<Message> {
        let to = if from == self.a {
            self.b.clone()
        } else {
            assert_eq!(from, self.b, "sender is not an endpoint");
            self.a.clone()
        };
        let action = match &mut self.interceptor {
            Some(i) => (i.f)(from, &msg),
            None => Action::Forward,
        };
        match action {
            Action::Forward => {
                self.recorder.record(from, &to, &msg, false, false);
                Some(msg)
            }
            Action::Replace(m) => {
                self.recorder.record(from, &to, &m, true, false);
                Some(m)
            }
            Action::Drop => {
                self.recorder.record(from, &to, &msg, true, true);
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> Recorder {
        Recorder::new(Arc::new(ManualClock::new(Timestamp::from_unix(0))))
    }

    #[test]
    fn secure_channel_refuses_on_path_adversary() {
        let r = rec();
        let mut c = SimChannel::new("subject", "rp", true, &r);
        assert!(matches!(
            c.set_interceptor(Interceptor::on_path(|_, _| Action::Drop)),
            Err(ChannelError::Secure(..))
        ));
        assert!(c
            .set_interceptor(Interceptor::owning("rp", |_, _| Action::Forward))
            .is_ok());
        assert!(matches!(
            c.set_interceptor(Interceptor::owning("mallory", |_, _| Action::Forward)),
            Err(ChannelError::NotAnEndpoint(_))
        ));
    }

    #[test]
    fn interceptor_actions_are_recorded() {
        let r = rec();
        let mut c = SimChannel::new("subject", "rp", false, &r);
        c.set_interceptor(Interceptor::on_path(|from, m| {
            if from == "rp" {
                Action::Replace(Message::new(&m.label, b"{\"x\":1}".to_vec()))
            } else {
                Action::Drop
            }
        }))
        .unwrap();
        let got = c.send("rp", Message::new("hello", b"{}".to_vec())).unwrap();
        assert_eq!(got.body, b"{\"x\":1}");
        assert!(c.send("subject", Message::new("bye", vec![0xff])).is_none());
        let log = r.entries();
        assert_eq!(log.len(), 2);
        assert_eq!(log[0].to, "subject");
        assert!(log[0].intercepted);
        assert!(log[1].dropped);
        assert_eq!(log[1].body, serde_json::json!({"raw": "_w"}));
    }
}
