//! A named participant with its key pairs and certificate.

use crate::cert::{CertError, Certificate, CertificateRequest, CommonName};
use crate::entropy::RandomSource;
use crate::keys::{KeyPair, KeyUsage};
use crate::time::Timestamp;

#[derive(Debug, Clone)]
pub struct Party {
    pub sig: KeyPair,
    pub enc: KeyPair,
    pub cert: Certificate,
}

#[derive(Debug, thiserror::Error)]
pub enum PartyError {
    #[error(transparent)]
    Rng(#[from] crate::entropy::RngFailure),
    #[error(transparent)]
    Cert(#[from] CertError),
}

impl Party {
    pub fn name(&self) -> &CommonName {
        &self.cert.subject_common_name
    }

    /// A self-signed root.
    pub fn root(
        name: CommonName,
        rng: &mut dyn RandomSource,
        not_before: Timestamp,
        not_after: Timestamp,
    ) -> Result<Party, PartyError> {
        let sig = KeyPair::generate(KeyUsage::Signature, rng)?;
        let enc = KeyPair::generate(KeyUsage::Encryption, rng)?;
        let cert = Certificate::self_signed(
            CertificateRequest {
                common_name: name,
                sig_public_key: sig.public(),
                enc_public_key: enc.public(),
                not_before,
                not_after,
            },
            &sig,
        )?;
        Ok(Party { sig, enc, cert })
    }

    /// A party whose certificate is signed by `issuer`.
    pub fn issued_by(
        name: CommonName,
        issuer: &Party,
        rng: &mut dyn RandomSource,
        not_before: Timestamp,
        not_after: Timestamp,
    ) -> Result<Party, PartyError> {
        let sig = KeyPair::generate(KeyUsage::Signature, rng)?;
        let enc = KeyPair::generate(KeyUsage::Encryption, rng)?;
        let cert = Certificate::issue(
            CertificateRequest {
                common_name: name,
                sig_public_key: sig.public(),
                enc_public_key: enc.public(),
                not_before,
                not_after,
            },
            &issuer.cert,
            &issuer.sig,
        )?;
        Ok(Party { sig, enc, cert })
    }
}
