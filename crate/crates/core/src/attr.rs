//! Attribute names, values and sets.

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

pub const MAX_NAME_LEN: usize = 64;
pub const MAX_TEXT_LEN: usize = 4096;
pub const MAX_SET_ENTRIES: usize = 64;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum AttributeError {
    #[error("invalid attribute name {0:?}")]
    InvalidName(String),
    #[error("text value exceeds {MAX_TEXT_LEN} bytes")]
    TextTooLong,
    #[error("attribute set exceeds {MAX_SET_ENTRIES} entries")]
    TooManyEntries,
    #[error("duplicate attribute {0}")]
    Duplicate(AttributeName),
}

/// A lowercase token matching `[a-z][a-z0-9_]*`, at most 64 bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeName(String);

impl AttributeName {
    pub fn new(name: impl Into<String>) -> Result<Self, AttributeError> {
        let name = name.into();
        if is_valid_name(&name) {
            Ok(AttributeName(name))
        } else {
            Err(AttributeError::InvalidName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn is_valid_name(s: &str) -> bool {
    let bytes = s.as_bytes();
    !bytes.is_empty()
        && bytes.len() <= MAX_NAME_LEN
        && bytes[0].is_ascii_lowercase()
        && bytes
            .iter()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'_')
}

impl fmt::Display for AttributeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for AttributeName {
    type Err = AttributeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttributeName::new(s)
    }
}

impl Serialize for AttributeName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for AttributeName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        AttributeName::new(String::deserialize(d)?).map_err(de::Error::custom)
    }
}

/// Parses a list of names, e.g. from CLI input.
pub fn names<I, S>(items: I) -> Result<Vec<AttributeName>, AttributeError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    items.into_iter().map(AttributeName::new).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Text,
    Integer,
    Date,
    Boolean,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Text => "text",
            ValueType::Integer => "integer",
            ValueType::Date => "date",
            ValueType::Boolean => "boolean",
        })
    }
}

/// Text and integers encode as bare JSON strings and numbers; dates as
/// `{"date":"YYYY-MM-DD"}` so that no value needs a schema to be decoded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AttributeValue {
    Text(String),
    Integer(i64),
    Date(NaiveDate),
    Boolean(bool),
}

impl AttributeValue {
    pub fn text(s: impl Into<String>) -> Result<Self, AttributeError> {
        let s = s.into();
        if s.len() > MAX_TEXT_LEN {
            return Err(AttributeError::TextTooLong);
        }
        Ok(AttributeValue::Text(s))
    }

    pub fn value_type(&self) -> ValueType {
        match self {
            AttributeValue::Text(_) => ValueType::Text,
            AttributeValue::Integer(_) => ValueType::Integer,
            AttributeValue::Date(_) => ValueType::Date,
            AttributeValue::Boolean(_) => ValueType::Boolean,
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Text(s) => f.write_str(s),
            AttributeValue::Integer(i) => write!(f, "{i}"),
            AttributeValue::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            AttributeValue::Boolean(b) => write!(f, "{b}"),
        }
    }
}

impl From<i64> for AttributeValue {
    fn from(v: i64) -> Self {
        AttributeValue::Integer(v)
    }
}

impl From<bool> for AttributeValue {
    fn from(v: bool) -> Self {
        AttributeValue::Boolean(v)
    }
}

impl From<NaiveDate> for AttributeValue {
    fn from(v: NaiveDate) -> Self {
        AttributeValue::Date(v)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DateRepr {
    date: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ValueRepr {
    Boolean(bool),
    Integer(i64),
    Text(String),
    Date(DateRepr),
}

impl Serialize for AttributeValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AttributeValue::Text(t) => s.serialize_str(t),
            AttributeValue::Integer(i) => s.serialize_i64(*i),
            AttributeValue::Boolean(b) => s.serialize_bool(*b),
            AttributeValue::Date(d) => DateRepr {
                date: d.format("%Y-%m-%d").to_string(),
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for AttributeValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match ValueRepr::deserialize(d)? {
            ValueRepr::Boolean(b) => Ok(AttributeValue::Boolean(b)),
            ValueRepr::Integer(i) => Ok(AttributeValue::Integer(i)),
            ValueRepr::Text(t) => AttributeValue::text(t).map_err(de::Error::custom),
            ValueRepr::Date(r) => crate::time::parse_date(&r.date)
                .map(AttributeValue::Date)
                .map_err(de::Error::custom),
        }
    }
}

/// Name-sorted attribute map, at most 64 entries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct AttributeSet(BTreeMap<AttributeName, AttributeValue>);

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        name: AttributeName,
        value: AttributeValue,
    ) -> Result<(), AttributeError> {
        if self.0.contains_key(&name) {
            return Err(AttributeError::Duplicate(name));
        }
        if self.0.len() >= MAX_SET_ENTRIES {
            return Err(AttributeError::TooManyEntries);
        }
        self.0.insert(name, value);
        Ok(())
    }

    /// Builder-style insert for fixtures; panics on invalid input.
    pub fn with(mut self, name: &str, value: impl Into<AttributeValue>) -> Self {
        let name = AttributeName::new(name).expect("valid attribute name");
        self.insert(name, value.into()).expect("attribute insert");
        self
    }

    pub fn get(&self, name: &AttributeName) -> Option<&AttributeValue> {
        self.0.get(name)
    }

    pub fn get_str(&self, name: &str) -> Option<&AttributeValue> {
        self.0.iter().find(|(k, _)| k.as_str() == name).map(|(_, v)| v)
    }

    pub fn contains(&self, name: &AttributeName) -> bool {
        self.0.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &AttributeName> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AttributeName, &AttributeValue)> {
        self.0.iter()
    }

    /// Projects onto exactly `wanted`; `Err` names the first missing attribute.
    pub fn select(&self, wanted: &[AttributeName]) -> Result<AttributeSet, AttributeName> {
        let mut out = BTreeMap::new();
        for name in wanted {
            let value = self.0.get(name).ok_or_else(|| name.clone())?;
            out.insert(name.clone(), value.clone());
        }
        Ok(AttributeSet(out))
    }
}

impl<'de> Deserialize<'de> for AttributeSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<AttributeName, AttributeValue>::deserialize(d)?;
        if map.len() > MAX_SET_ENTRIES {
            return Err(de::Error::custom(AttributeError::TooManyEntries));
        }
        Ok(AttributeSet(map))
    }
}
