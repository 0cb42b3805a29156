//! Key pairs. Each party holds one Ed25519 pair for signatures and one
//! X25519 pair for encryption; a pair's usage is fixed when it is generated.

use std::fmt;

use ed25519_dalek::SigningKey;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use x25519_dalek::StaticSecret;
use zeroize::Zeroize;

use crate::canonical::b64;
use crate::entropy::{RandomSource, RngFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyUsage {
    Signature,
    Encryption,
}

impl fmt::Display for KeyUsage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeyUsage::Signature => "signature",
            KeyUsage::Encryption => "encryption",
        })
    }
}

impl std::str::FromStr for KeyUsage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signature" => Ok(KeyUsage::Signature),
            "encryption" => Ok(KeyUsage::Encryption),
            other => Err(format!("unknown key usage {other:?}")),
        }
    }
}

/// 32 bytes of public-key material (Ed25519 or X25519, depending on context).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", b64::encode(&self.0))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        b64::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        b64::array::deserialize(d).map(PublicKey)
    }
}

#[derive(Clone)]
pub struct PrivateKey([u8; 32]);

impl PrivateKey {
    pub(crate) fn expose(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(..)")
    }
}

impl Drop for PrivateKey {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

#[derive(Clone)]
pub struct KeyPair {
    usage: KeyUsage,
    public: PublicKey,
    private: PrivateKey,
}

impl KeyPair {
    pub fn generate(usage: KeyUsage, rng: &mut dyn RandomSource) -> Result<Self, RngFailure> {
        let mut seed = [0u8; 32];
        rng.fill(&mut seed)?;
        Ok(Self::from_private_bytes(usage, seed))
    }

    pub fn from_private_bytes(usage: KeyUsage, private: [u8; 32]) -> Self {
        let public = match usage {
            KeyUsage::Signature => SigningKey::from_bytes(&private).verifying_key().to_bytes(),
            KeyUsage::Encryption => {
                x25519_dalek::PublicKey::from(&StaticSecret::from(private)).to_bytes()
            }
        };
        KeyPair {
            usage,
            public: PublicKey(public),
            private: PrivateKey(private),
        }
    }

    pub fn usage(&self) -> KeyUsage {
        self.usage
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn private(&self) -> &PrivateKey {
        &self.private
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("usage", &self.usage)
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyPairFile {
    usage: KeyUsage,
    public_key: PublicKey,
    #[serde(with = "b64::array")]
    private_key: [u8; 32],
}

/// Key files carry the private key in the clear; the public half is checked on load.
impl Serialize for KeyPair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        KeyPairFile {
            usage: self.usage,
            public_key: self.public,
            private_key: self.private.0,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KeyPair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = KeyPairFile::deserialize(d)?;
        let pair = KeyPair::from_private_bytes(file.usage, file.private_key);
        if pair.public != file.public_key {
            return Err(de::Error::custom("public key does not match private key"));
        }
        Ok(pair)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use crate::entropy::SeededRandom;

    #[test]
    fn key_file_round_trip_checks_correspondence() {
        let mut rng = SeededRandom::new(1);
        let kp = KeyPair::generate(KeyUsage::Encryption, &mut rng).unwrap();
        let bytes = canonical::encode(&kp).unwrap();
        let back: KeyPair = canonical::decode(&bytes).unwrap();
        assert_eq!(back.public(), kp.public());
        assert_eq!(back.usage(), KeyUsage::Encryption);

        let other = KeyPair::generate(KeyUsage::Encryption, &mut rng).unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        v["public_key"] = serde_json::to_value(other.public()).unwrap();
        assert!(serde_json::from_value::<KeyPair>(v).is_err());
    }

    #[test]
    fn usages_derive_different_publics() {
        let seed = [9u8; 32];
        let s = KeyPair::from_private_bytes(KeyUsage::Signature, seed);
        let e = KeyPair::from_private_bytes(KeyUsage::Encryption, seed);
        assert_ne!(s.public(), e.public());
    }
}
