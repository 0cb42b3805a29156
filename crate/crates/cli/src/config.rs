//! Service configuration files. Relative paths resolve against the
//! directory holding the config file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cic_core::subject::{AaDirectory, ConsentPolicy};
use cic_core::{fsio, Certificate, KeyPair, KeyUsage, SchemaRegistry, TrustStore};

use crate::pki::load_key;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AaConfig {
    pub listen: SocketAddr,
    pub signing_key: PathBuf,
    pub certificate: PathBuf,
    #[serde(default)]
    pub intermediates: Vec<PathBuf>,
    pub schema: PathBuf,
    pub records: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpConfig {
    pub listen: SocketAddr,
    pub encryption_key: PathBuf,
    pub certificate: PathBuf,
    pub schema: PathBuf,
    pub trust_store: PathBuf,
    #[serde(default = "default_ttl")]
    pub ttl_seconds: i64,
}

fn default_ttl() -> i64 {
    cic_core::rp::DEFAULT_TTL_SECONDS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectConfig {
    pub listen: SocketAddr,
    pub schema: PathBuf,
    pub trust_store: PathBuf,
    /// Wallet state file; requests are kept in memory only when absent.
    #[serde(default)]
    pub state: Option<PathBuf>,
    pub directory: AaDirectory,
    #[serde(default)]
    pub policy: ConsentPolicy,
}

/// A parsed config plus the directory its relative paths hang off.
pub struct Loaded<T> {
    pub config: T,
    base: PathBuf,
}

impl<T: DeserializeOwned> Loaded<T> {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let config =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Loaded { config, base })
    }
}

impl<T> Loaded<T> {
    pub fn path(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    pub fn key(&self, p: &Path, usage: KeyUsage) -> Result<KeyPair> {
        load_key(&self.path(p), usage)
    }

    pub fn cert(&self, p: &Path) -> Result<Certificate> {
        Ok(fsio::load(&self.path(p))?)
    }

    pub fn schema(&self, p: &Path) -> Result<SchemaRegistry> {
        Ok(fsio::load(&self.path(p))?)
    }

    pub fn trust(&self, p: &Path) -> Result<TrustStore> {
        Ok(fsio::load(&self.path(p))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subject_config_parses_inline_directory() {
        let text = r#"
            listen = "127.0.0.1:9000"
            schema = "schema.json"
            trust_store = "trust.json"

            [directory.name]
            endpoint = "http://127.0.0.1:9001"
            credential = "tok"

            [policy.throttle."lender.example"]
            credit_score = 3600
        "#;
        let c: SubjectConfig = toml::from_str(text).unwrap();
        assert_eq!(c.directory.entries.len(), 1);
        assert!(c.state.is_none());
        assert_eq!(c.policy.throttle.len(), 1);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = std::env::temp_dir().join("cic-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("rp.toml");
        std::fs::write(
            &file,
            "listen = \"127.0.0.1:1\"\nencryption_key = \"k.json\"\ncertificate = \"c.json\"\n\
             schema = \"s.json\"\ntrust_store = \"t.json\"\n",
        )
        .unwrap();
        let l = Loaded::<RpConfig>::read(&file).unwrap();
        assert_eq!(l.path(&l.config.schema), dir.join("s.json"));
        assert_eq!(l.config.ttl_seconds, 300);
    }
}
