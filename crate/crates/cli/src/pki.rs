use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::{Args, Subcommand};

use cic_core::entropy::OsRandom;
use cic_core::fsio;
use cic_core::{Certificate, CertificateRequest, CommonName, KeyPair, KeyUsage, Timestamp};

const DEFAULT_VALIDITY_DAYS: i64 = 365;

#[derive(Subcommand)]
pub enum CertCommand {
    /// A self-signed root certificate.
    SelfSigned(Subject),
    /// A certificate signed by an existing issuer.
    Issue {
        #[command(flatten)]
        subject: Subject,
        #[arg(long)]
        issuer_cert: PathBuf,
        #[arg(long)]
        issuer_key: PathBuf,
    },
}

#[derive(Args)]
pub struct Subject {
    #[arg(long)]
    cn: String,
    /// Subject's signature key pair file.
    #[arg(long)]
    sig_key: PathBuf,
    /// Subject's encryption key pair file.
    #[arg(long)]
    enc_key: PathBuf,
    /// Defaults to now.
    #[arg(long, value_parser = Timestamp::parse)]
    not_before: Option<Timestamp>,
    /// Defaults to a year after `not_before`.
    #[arg(long, value_parser = Timestamp::parse)]
    not_after: Option<Timestamp>,
    #[arg(long)]
    out: PathBuf,
}

pub fn keygen(usage: KeyUsage, out: &Path) -> Result<KeyPair> {
    let pair = KeyPair::generate(usage, &mut OsRandom)?;
    fsio::store(out, &pair)?;
    Ok(pair)
}

pub fn load_key(path: &Path, usage: KeyUsage) -> Result<KeyPair> {
    let pair: KeyPair = fsio::load(path)?;
    ensure!(
        pair.usage() == usage,
        "{} holds a {} key, expected {usage}",
        path.display(),
        pair.usage()
    );
    Ok(pair)
}

fn request(s: &Subject) -> Result<CertificateRequest> {
    let sig = load_key(&s.sig_key, KeyUsage::Signature)?;
    let enc = load_key(&s.enc_key, KeyUsage::Encryption)?;
    let not_before = s.not_before.unwrap_or_else(Timestamp::now);
    Ok(CertificateRequest {
        common_name: CommonName::new(&s.cn)?,
        sig_public_key: sig.public(),
        enc_public_key: enc.public(),
        not_before,
        not_after: s
            .not_after
            .unwrap_or(not_before.plus_seconds(DEFAULT_VALIDITY_DAYS * 86_400)),
    })
}

pub fn cert(cmd: CertCommand) -> Result<()> {
    let (cert, out) = match cmd {
        CertCommand::SelfSigned(s) => {
            let signer = load_key(&s.sig_key, KeyUsage::Signature)?;
            (Certificate::self_signed(request(&s)?, &signer)?, s.out)
        }
        CertCommand::Issue {
            subject,
            issuer_cert,
            issuer_key,
        } => {
            let issuer: Certificate = fsio::load(&issuer_cert)?;
            let keys = load_key(&issuer_key, KeyUsage::Signature)?;
            let cert = Certificate::issue(request(&subject)?, &issuer, &keys)
                .with_context(|| format!("issuing under {}", issuer.subject_common_name))?;
            (cert, subject.out)
        }
    };
    fsio::store(&out, &cert)?;
    Ok(())
}
