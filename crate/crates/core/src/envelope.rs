//! Hybrid public-key envelope.
//!
//! A fresh X25519 key is generated per envelope; its Diffie-Hellman output
//! with the recipient's encryption key is expanded with HKDF-SHA256 into a
//! one-time ChaCha20-Poly1305 key and nonce. The ephemeral public key is the
//! encapsulated key. The scheme identifier is bound as associated data.

use chacha20poly1305::aead::AeadInPlace;
use chacha20poly1305::{ChaCha20Poly1305, Key, KeyInit, Nonce as AeadNonce, Tag};
use hkdf::Hkdf;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use x25519_dalek::StaticSecret;

use crate::canonical::{self, b64};
use crate::claim::ClaimPayload;
use crate::entropy::RandomSource;
use crate::keys::{KeyPair, KeyUsage, PublicKey};

pub const ENVELOPE_SCHEME: &str = "x25519-hkdf-sha256-chacha20poly1305";
const KDF_INFO: &[u8] = b"cic envelope v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub scheme_id: String,
    #[serde(with = "b64::array")]
    pub encapsulated_key: [u8; 32],
    #[serde(with = "b64")]
    pub body: Vec<u8>,
    #[serde(with = "b64::array")]
    pub auth_tag: [u8; 16],
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum EnvelopeError {
    #[error("encryption failed: {0}")]
    EncryptionFailure(String),
    #[error("envelope could not be opened")]
    OpenFailure,
    #[error("envelope opened but payload is malformed: {0}")]
    MalformedPayload(String),
}

fn derive(shared: &[u8; 32], eph: &[u8; 32], recipient: &[u8; 32]) -> ([u8; 32], [u8; 12]) {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(eph);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; 44];
    hk.expand(KDF_INFO, &mut okm).expect("44 bytes is a valid HKDF length");
    let mut key = [0u8; 32];
    let mut nonce = [0u8; 12];
    key.copy_from_slice(&okm[..32]);
    nonce.copy_from_slice(&okm[32..]);
    (key, nonce)
}

/// Encrypts arbitrary bytes to `recipient`.
pub fn seal_bytes(
    plaintext: &[u8],
    recipient: &PublicKey,
    rng: &mut dyn RandomSource,
) -> Result<Envelope, EnvelopeError> {
    let mut eph_bytes = [0u8; 32];
    rng.fill(&mut eph_bytes)
        .map_err(|e| EnvelopeError::EncryptionFailure(e.to_string()))?;
    let eph = StaticSecret::from(eph_bytes);
    let eph_pub = x25519_dalek::PublicKey::from(&eph).to_bytes();
    let shared = eph.diffie_hellman(&x25519_dalek::PublicKey::from(recipient.0));
    if !shared.was_contributory() {
        return Err(EnvelopeError::EncryptionFailure(
            "recipient key is a low-order point".into(),
        ));
    }
    let (key, nonce) = derive(shared.as_bytes(), &eph_pub, &recipient.0);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&key));
    let mut body = plaintext.to_vec();
    let tag = cipher
        .encrypt_in_place_detached(AeadNonce::from_slice(&nonce), ENVELOPE_SCHEME.as_bytes(), &mut body)
        .map_err(|e| EnvelopeError::EncryptionFailure(e.to_string()))?;
    Ok(Envelope {
        scheme_id: ENVELOPE_SCHEME.to_string(),
        encapsulated_key: eph_pub,
        body,
        auth_tag: tag.into(),
    })
}

/// Decrypts with the recipient's encryption key pair.
pub fn open_bytes(envelope: &Envelope, recipient: &KeyPair) -> Result<Vec<u8>, EnvelopeError> {
    if recipient.usage() != KeyUsage::Encryption || envelope.scheme_id != ENVELOPE_SCHEME {
        return Err(EnvelopeError::OpenFailure);
    }
    let secret = StaticSecret::from(*recipient.private().expose());
    let shared =
        secret.diffie_hellman(&x25519_dalek::PublicKey::from(envelope.encapsulated_key));
    if !shared.was_contributory() {
        return Err(EnvelopeError::OpenFailure);
    }
    let (key, nonce) = derive(
        shared.as_bytes(),
        &envelope.encapsulated_key,
        recipient.public().as_bytes(),
    );
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&key));
    let mut body = envelope.body.clone();
    cipher
        .decrypt_in_place_detached(
            AeadNonce::from_slice(&nonce),
            ENVELOPE_SCHEME.as_bytes(),
            &mut body,
            Tag::from_slice(&envelope.auth_tag),
        )
        .map_err(|_| EnvelopeError::OpenFailure)?;
    Ok(body)
}

/// Seals the canonical encoding of `payload` to `recipient`.
pub fn seal(
    payload: &ClaimPayload,
    recipient: &PublicKey,
    rng: &mut dyn RandomSource,
) -> Result<Envelope, EnvelopeError> {
    let bytes =
        canonical::encode(payload).map_err(|e| EnvelopeError::EncryptionFailure(e.to_string()))?;
    seal_bytes(&bytes, recipient, rng)
}

pub fn open(envelope: &Envelope, recipient: &KeyPair) -> Result<ClaimPayload, EnvelopeError> {
    let bytes = open_bytes(envelope, recipient)?;
    canonical::decode(&bytes).map_err(|e| EnvelopeError::MalformedPayload(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::{AttributeSet, AttributeValue};
    use crate::claim::Nonce;
    use crate::entropy::SeededRandom;
    use crate::time::Timestamp;

    fn payload() -> ClaimPayload {
        ClaimPayload {
            attributes: AttributeSet::new()
                .with("name", AttributeValue::text("John Davis").unwrap())
                .with("credit_score", 589),
            nonce: Nonce([7; 16]),
            issued_at: Timestamp::from_unix(1_767_225_600),
        }
    }

    fn enc_pair(rng: &mut SeededRandom) -> KeyPair {
        KeyPair::generate(KeyUsage::Encryption, rng).unwrap()
    }

    #[test]
    fn round_trip() {
        let mut rng = SeededRandom::new(11);
        let rp = enc_pair(&mut rng);
        let env = seal(&payload(), &rp.public(), &mut rng).unwrap();
        assert_eq!(open(&env, &rp).unwrap(), payload());
    }

    #[test]
    fn randomized_over_100_trials() {
        let mut rng = SeededRandom::new(12);
        let rp = enc_pair(&mut rng);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            let env = seal(&payload(), &rp.public(), &mut rng).unwrap();
            assert!(seen.insert((env.encapsulated_key, env.body.clone(), env.auth_tag)));
        }
    }

    #[test]
    fn wrong_key_fails() {
        let mut rng = SeededRandom::new(13);
        let rp = enc_pair(&mut rng);
        let other = enc_pair(&mut rng);
        let env = seal(&payload(), &rp.public(), &mut rng).unwrap();
        assert_eq!(open(&env, &other), Err(EnvelopeError::OpenFailure));
    }

    #[test]
    fn signature_pair_cannot_open() {
        let mut rng = SeededRandom::new(14);
        let rp = enc_pair(&mut rng);
        let env = seal(&payload(), &rp.public(), &mut rng).unwrap();
        let sig = KeyPair::from_private_bytes(KeyUsage::Signature, [1; 32]);
        assert_eq!(open(&env, &sig), Err(EnvelopeError::OpenFailure));
    }

    #[test]
    fn truncated_body_fails() {
        let mut rng = SeededRandom::new(15);
        let rp = enc_pair(&mut rng);
        let mut env = seal(&payload(), &rp.public(), &mut rng).unwrap();
        env.body.pop();
        assert_eq!(open(&env, &rp), Err(EnvelopeError::OpenFailure));
        env.body.clear();
        assert_eq!(open(&env, &rp), Err(EnvelopeError::OpenFailure));
    }

    #[test]
    fn every_bit_flip_in_body_tag_and_key_fails() {
        let mut rng = SeededRandom::new(16);
        let rp = enc_pair(&mut rng);
        let env = seal(&payload(), &rp.public(), &mut rng).unwrap();
        let total_bits = (env.body.len() + 16 + 32) * 8;
        assert!(total_bits >= 1000, "need at least 1000 positions, have {total_bits}");
        let mut rejected = 0;
        for bit in 0..total_bits {
            let mut t = env.clone();
            let (byte, mask) = (bit / 8, 1u8 << (bit % 8));
            if byte < t.body.len() {
                t.body[byte] ^= mask;
            } else if byte < t.body.len() + 16 {
                t.auth_tag[byte - t.body.len()] ^= mask;
            } else {
                t.encapsulated_key[byte - t.body.len() - 16] ^= mask;
            }
            if open(&t, &rp).is_err() {
                rejected += 1;
            }
        }
        assert_eq!(rejected, total_bits);
    }

    #[test]
    fn garbage_plaintext_is_malformed_payload() {
        let mut rng = SeededRandom::new(17);
        let rp = enc_pair(&mut rng);
        let env = seal_bytes(b"{\"not\":\"a payload\"}", &rp.public(), &mut rng).unwrap();
        assert!(matches!(open(&env, &rp), Err(EnvelopeError::MalformedPayload(_))));
    }

    #[test]
    fn low_order_recipient_rejected() {
        let mut rng = SeededRandom::new(18);
        assert!(matches!(
            seal(&payload(), &PublicKey([0; 32]), &mut rng),
            Err(EnvelopeError::EncryptionFailure(_))
        ));
    }
}
