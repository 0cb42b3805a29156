//! Injectable randomness.
//!
//! Everything that consumes randomness (nonces, key generation, envelope
//! ephemeral keys) draws from a [`RandomSource`], so scenarios can run with a
//! seeded generator or a deliberately broken one.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_core::OsRng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("random source failure: {0}")]
pub struct RngFailure(pub String);

pub trait RandomSource: Send {
    fn fill(&mut self, dest: &mut [u8]) -> Result<(), RngFailure>;

    fn array<const N: usize>(&mut self) -> Result<[u8; N], RngFailure>
    where
        Self: Sized,
    {
        let mut out = [0u8; N];
        self.fill(&mut out)?;
        Ok(out)
    }
}

impl<R: RandomSource + ?Sized> RandomSource for Box<R> {
    fn fill(&mut self, dest: &mut [u8]) -> Result<(), RngFailure> {
        (**self).fill(dest)
    }
}

impl<R: RandomSource + ?Sized> RandomSource for &mut R {
    fn fill(&mut self, dest: &mut [u8]) -> Result<(), RngFailure> {
        (**self).fill(dest)
    }
}

/// Operating-system CSPRNG.
#[derive(Debug, Default, Clone, Copy)]
pub struct OsRandom;

impl RandomSource for OsRandom {
    fn fill(&mut self, dest: &mut [u8]) -> Result<(), RngFailure> {
        rand_core::RngCore::try_fill_bytes(&mut OsRng, dest)
            .map_err(|e| RngFailure(e.to_string()))
    }
}

/// ChaCha20 stream keyed from a seed and a label, for reproducible runs.
pub struct SeededRandom(ChaCha20Rng);

impl SeededRandom {
    pub fn new(seed: u64) -> Self {
        Self::labelled(seed, "")
    }

    /// Independent streams for different actors sharing one seed.
    pub fn labelled(seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(seed.to_be_bytes());
        h.update(label.as_bytes());
        SeededRandom(ChaCha20Rng::from_seed(h.finalize().into()))
    }
}

impl RandomSource for SeededRandom {
    fn fill(&mut self, dest: &mut [u8]) -> Result<(), RngFailure> {
        self.0.fill_bytes(dest);
        Ok(())
    }
}

/// A broken generator: every call yields the same bytes.
#[derive(Debug, Clone)]
pub struct FixedRandom(Vec<u8>);

impl FixedRandom {
    pub fn new(pattern: impl Into<Vec<u8>>) -> Self {
        let pattern = pattern.into();
        assert!(!pattern.is_empty(), "fixed pattern must be non-empty");
        FixedRandom(pattern)
    }
}

impl RandomSource for FixedRandom {
    fn fill(&mut self, dest: &mut [u8]) -> Result<(), RngFailure> {
        for (d, s) in dest.iter_mut().zip(self.0.iter().cycle()) {
            *d = *s;
        }
        Ok(())
    }
}

/// Always fails.
#[derive(Debug, Default, Clone, Copy)]
pub struct FailingRandom;

impl RandomSource for FailingRandom {
    fn fill(&mut self, _dest: &mut [u8]) -> Result<(), RngFailure> {
        Err(RngFailure("entropy source unavailable".into()))
    }
}
