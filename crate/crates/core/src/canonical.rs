//! Canonical JSON encoding.
//!
//! Every protocol object is signed, sealed and shipped as canonical bytes:
//!
//! - UTF-8, no insignificant whitespace
//! - object keys sorted ascending by byte order
//! - integers in shortest decimal form; floating point values are rejected
//! - binary fields as unpadded base64url (see [`b64`])
//! - timestamps as ISO-8601 UTC with a trailing `Z` (see [`crate::time`])
//!
//! Decoding is strict: input is accepted only if re-encoding the parsed value
//! reproduces it byte for byte, so every accepted document has exactly one
//! serialized form.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum CanonicalError {
    #[error("value cannot be canonically encoded: {0}")]
    UnencodableValue(String),
    #[error("input is not a canonical document: {0}")]
    Malformed(String),
}

/// Encodes any serializable value.
pub fn encode<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    let tree =
        serde_json::to_value(value).map_err(|e| CanonicalError::UnencodableValue(e.to_string()))?;
    encode_value(&tree)
}

/// Encodes an already-built JSON tree.
pub fn encode_value(value: &Value) -> Result<Vec<u8>, CanonicalError> {
    let mut out = Vec::with_capacity(128);
    write_value(value, &mut out)?;
    Ok(out)
}

/// Encodes to a `String`; canonical output is always valid UTF-8.
pub fn encode_string<T: Serialize + ?Sized>(value: &T) -> Result<String, CanonicalError> {
    let bytes = encode(value)?;
    Ok(String::from_utf8(bytes).expect("canonical output is UTF-8"))
}

/// Parses `bytes` into a JSON tree, rejecting anything that is not in canonical form.
pub fn decode_value(bytes: &[u8]) -> Result<Value, CanonicalError> {
    let tree: Value =
        serde_json::from_slice(bytes).map_err(|e| CanonicalError::Malformed(e.to_string()))?;
    let again = encode_value(&tree).map_err(|e| CanonicalError::Malformed(e.to_string()))?;
    if again != bytes {
        return Err(CanonicalError::Malformed(
            "document is not in canonical form".into(),
        ));
    }
    Ok(tree)
}

/// Strictly decodes a canonical document into `T`.
pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CanonicalError> {
    let tree = decode_value(bytes)?;
    serde_json::from_value(tree).map_err(|e| CanonicalError::Malformed(e.to_string()))
}

fn write_value(value: &Value, out: &mut Vec<u8>) -> Result<(), CanonicalError> {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.extend_from_slice(i.to_string().as_bytes());
            } else if let Some(u) = n.as_u64() {
                out.extend_from_slice(u.to_string().as_bytes());
            } else {
                return Err(CanonicalError::UnencodableValue(format!(
                    "non-integer number {n}"
                )));
            }
        }
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (key, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(key, out);
                out.push(b':');
                write_value(item, out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

fn write_string(s: &str, out: &mut Vec<u8>) {
    const HEX: &[u8; 16] = b"0123456789abcdef";
    out.push(b'"');
    for ch in s.chars() {
        match ch {
            '"' => out.extend_from_slice(b"\\\""),
            '\\' => out.extend_from_slice(b"\\\\"),
            '\n' => out.extend_from_slice(b"\\n"),
            '\r' => out.extend_from_slice(b"\\r"),
            '\t' => out.extend_from_slice(b"\\t"),
            '\u{08}' => out.extend_from_slice(b"\\b"),
            '\u{0c}' => out.extend_from_slice(b"\\f"),
            c if (c as u32) < 0x20 => {
                let v = c as u32;
                out.extend_from_slice(b"\\u00");
                out.push(HEX[(v >> 4) as usize]);
                out.push(HEX[(v & 0xf) as usize]);
            }
            c => {
                let mut buf = [0u8; 4];
                out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    out.push(b'"');
}

/// Serde adapters for binary fields (unpadded base64url, strict decoding).
pub mod b64 {
    use base64::engine::general_purpose::URL_SAFE_NO_PAD;
    use base64::Engine;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn encode(bytes: &[u8]) -> String {
        URL_SAFE_NO_PAD.encode(bytes)
    }

    pub fn decode(text: &str) -> Result<Vec<u8>, base64::DecodeError> {
        URL_SAFE_NO_PAD.decode(text)
    }

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        decode(&text).map_err(de::Error::custom)
    }

    /// Fixed-width variant.
    pub mod array {
        use super::*;

        pub fn serialize<S: Serializer, const N: usize>(
            bytes: &[u8; N],
            s: S,
        ) -> Result<S::Ok, S::Error> {
            super::serialize(bytes, s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(
            d: D,
        ) -> Result<[u8; N], D::Error> {
            let raw = super::deserialize(d)?;
            let len = raw.len();
            raw.try_into()
                .map_err(|_| de::Error::custom(format!("expected {N} bytes, got {len}")))
        }
    }
}
