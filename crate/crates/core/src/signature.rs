//! Ed25519 signatures over byte strings.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::canonical::b64;
use crate::keys::{KeyPair, KeyUsage, PublicKey};

pub const SIGNATURE_SCHEME: &str = "ed25519";

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", b64::encode(&self.0))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        b64::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        b64::array::deserialize(d).map(Signature)
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SigningError {
    #[error("key pair has usage {0}, expected signature")]
    WrongUsage(KeyUsage),
}

pub fn sign(message: &[u8], signer: &KeyPair) -> Result<Signature, SigningError> {
    if signer.usage() != KeyUsage::Signature {
        return Err(SigningError::WrongUsage(signer.usage()));
    }
    let key = SigningKey::from_bytes(signer.private().expose());
    Ok(Signature(key.sign(message).to_bytes()))
}

/// Strict verification; malformed keys or signatures yield `false`.
pub fn verify_sig(message: &[u8], signature: &Signature, signer: &PublicKey) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(signer.as_bytes()) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify_strict(message, &sig).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::SeededRandom;

    fn pair(seed: u64) -> KeyPair {
        KeyPair::generate(KeyUsage::Signature, &mut SeededRandom::new(seed)).unwrap()
    }

    #[test]
    fn sign_then_verify() {
        let b = pair(1);
        let sig = sign(b"contract", &b).unwrap();
        assert!(verify_sig(b"contract", &sig, &b.public()));
    }

    #[test]
    fn other_message_fails() {
        let b = pair(1);
        let sig = sign(b"contract", &b).unwrap();
        assert!(!verify_sig(b"contract'", &sig, &b.public()));
    }

    #[test]
    fn other_key_fails() {
        let a = pair(1);
        let b = pair(2);
        let sig = sign(b"contract", &a).unwrap();
        assert!(!verify_sig(b"contract", &sig, &b.public()));
    }

    #[test]
    fn garbage_is_false_not_panic() {
        let b = pair(1);
        assert!(!verify_sig(b"m", &Signature([0xff; 64]), &b.public()));
        assert!(!verify_sig(b"m", &Signature([0; 64]), &PublicKey([0xff; 32])));
    }

    #[test]
    fn encryption_keys_cannot_sign() {
        let e = KeyPair::generate(KeyUsage::Encryption, &mut SeededRandom::new(3)).unwrap();
        assert_eq!(
            sign(b"m", &e),
            Err(SigningError::WrongUsage(KeyUsage::Encryption))
        );
    }
}
