//! The shared vocabulary of attributes: name, value type and a human label.

use std::collections::BTreeMap;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::attr::{AttributeName, AttributeSet, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSchema {
    pub name: AttributeName,
    pub value_type: ValueType,
    pub display_label: String,
}

impl AttributeSchema {
    pub fn new(name: &str, value_type: ValueType, display_label: &str) -> Self {
        AttributeSchema {
            name: AttributeName::new(name).expect("valid attribute name"),
            value_type,
            display_label: display_label.to_string(),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("attribute {0} is defined twice")]
    DuplicateName(AttributeName),
    #[error("attribute {0} has an empty display label")]
    EmptyLabel(AttributeName),
    #[error("unknown attribute {0}")]
    UnknownAttribute(AttributeName),
    #[error("attribute {name} should be {expected}, got {actual}")]
    TypeMismatch {
        name: AttributeName,
        expected: ValueType,
        actual: ValueType,
    },
}

/// Serialized as a list of [`AttributeSchema`] records sorted by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaRegistry {
    entries: BTreeMap<AttributeName, AttributeSchema>,
}

impl SchemaRegistry {
    pub fn new(records: impl IntoIterator<Item = AttributeSchema>) -> Result<Self, SchemaError> {
        let mut entries = BTreeMap::new();
        for record in records {
            if record.display_label.trim().is_empty() {
                return Err(SchemaError::EmptyLabel(record.name));
            }
            if entries.contains_key(&record.name) {
                return Err(SchemaError::DuplicateName(record.name));
            }
            entries.insert(record.name.clone(), record);
        }
        Ok(SchemaRegistry { entries })
    }

    pub fn get(&self, name: &AttributeName) -> Option<&AttributeSchema> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &AttributeName) -> bool {
        self.entries.contains_key(name)
    }

    pub fn label<'a>(&'a self, name: &'a AttributeName) -> &'a str {
        self.entries
            .get(name)
            .map(|s| s.display_label.as_str())
            .unwrap_or(name.as_str())
    }

    pub fn records(&self) -> impl Iterator<Item = &AttributeSchema> {
        self.entries.values()
    }

    /// Every name must be registered.
    pub fn check_names<'a>(
        &self,
        names: impl IntoIterator<Item = &'a AttributeName>,
    ) -> Result<(), SchemaError> {
        for name in names {
            if !self.contains(name) {
                return Err(SchemaError::UnknownAttribute(name.clone()));
            }
        }
        Ok(())
    }

    /// Every entry must be registered and carry the registered value type.
    pub fn check_set(&self, set: &AttributeSet) -> Result<(), SchemaError> {
        for (name, value) in set.iter() {
            let schema = self
                .get(name)
                .ok_or_else(|| SchemaError::UnknownAttribute(name.clone()))?;
            if schema.value_type != value.value_type() {
                return Err(SchemaError::TypeMismatch {
                    name: name.clone(),
                    expected: schema.value_type,
                    actual: value.value_type(),
                });
            }
        }
        Ok(())
    }
}

impl Serialize for SchemaRegistry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.entries.values())
    }
}

impl<'de> Deserialize<'de> for SchemaRegistry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let records = Vec::<AttributeSchema>::deserialize(d)?;
        SchemaRegistry::new(records).map_err(de::Error::custom)
    }
}
