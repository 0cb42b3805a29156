use std::collections::HashMap;
use std::sync::Mutex;

use crate::attr::AttributeName;
use crate::claim::Nonce;
use crate::time::Timestamp;

pub const DEFAULT_TTL_SECONDS: i64 = 300;

#[derive(Debug, Clone)]
struct Pending {
    description: Vec<AttributeName>,
    created_at: Timestamp,
}

#[derive(Debug, Default)]
struct Inner {
    pending: HashMap<Nonce, Pending>,
    /// Value is the creation time; kept until it expires like a pending entry.
    consumed: HashMap<Nonce, Timestamp>,
}

/// What the registry knows about a nonce at a given instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NonceStatus {
    Pending { description: Vec<AttributeName> },
    Expired,
    Consumed,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsumeOutcome {
    Consumed,
    AlreadyConsumed,
    Expired,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("nonce is already registered")]
pub struct NonceReuse;

/// Single-use nonces issued by a relying party.
///
/// A nonce is pending from registration until it is consumed or its TTL
/// elapses. Consumed nonces are retained for the same TTL so a replay inside
/// that window is reported as such; afterwards it is simply unknown.
#[derive(Debug)]
pub struct NonceRegistry {
    ttl: i64,
    inner: Mutex<Inner>,
}

impl Default for NonceRegistry {
    fn default() -> Self {
        NonceRegistry::new(DEFAULT_TTL_SECONDS)
    }
}

impl NonceRegistry {
    pub fn new(ttl_seconds: i64) -> Self {
        assert!(ttl_seconds >= 0, "ttl must be non-negative");
        NonceRegistry {
            ttl: ttl_seconds,
            inner: Mutex::new(Inner::default()),
        }
    }

    pub fn ttl(&self) -> i64 {
        self.ttl
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().expect("nonce registry poisoned")
    }

    fn expired(&self, created_at: Timestamp, now: Timestamp) -> bool {
        created_at.plus_seconds(self.ttl) < now
    }

    /// Fails if the nonce is pending or still retained as consumed.
    pub fn register(
        &self,
        nonce: Nonce,
        description: Vec<AttributeName>,
        now: Timestamp,
    ) -> Result<(), NonceReuse> {
        let mut inner = self.lock();
        if inner.pending.contains_key(&nonce) || inner.consumed.contains_key(&nonce) {
            return Err(NonceReuse);
        }
        inner.pending.insert(
            nonce,
            Pending {
                description,
                created_at: now,
            },
        );
        Ok(())
    }

    pub fn status(&self, nonce: &Nonce, now: Timestamp) -> NonceStatus {
        let inner = self.lock();
        if inner.consumed.contains_key(nonce) {
            return NonceStatus::Consumed;
        }
        match inner.pending.get(nonce) {
            Some(p) if self.expired(p.created_at, now) => NonceStatus::Expired,
            Some(p) => NonceStatus::Pending {
                description: p.description.clone(),
            },
            None => NonceStatus::Unknown,
        }
    }

    /// Atomically moves a live pending nonce to consumed.
    pub fn consume(&self, nonce: &Nonce, now: Timestamp) -> ConsumeOutcome {
        let mut inner = self.lock();
        if inner.consumed.contains_key(nonce) {
            return ConsumeOutcome::AlreadyConsumed;
        }
        let Some(created_at) = inner.pending.get(nonce).map(|p| p.created_at) else {
            return ConsumeOutcome::Unknown;
        };
        if self.expired(created_at, now) {
            return ConsumeOutcome::Expired;
        }
        inner.pending.remove(nonce);
        inner.consumed.insert(*nonce, created_at);
        ConsumeOutcome::Consumed
    }

    /// Drops entries with `created_at + ttl < now`. Returns how many went.
    pub fn evict_expired(&self, now: Timestamp) -> usize {
        let mut inner = self.lock();
        let before = inner.pending.len() + inner.consumed.len();
        inner
            .pending
            .retain(|_, p| !(p.created_at.plus_seconds(self.ttl) < now));
        inner
            .consumed
            .retain(|_, created_at| !(created_at.plus_seconds(self.ttl) < now));
        before - inner.pending.len() - inner.consumed.len()
    }

    pub fn pending_len(&self) -> usize {
        self.lock().pending.len()
    }

    pub fn consumed_len(&self) -> usize {
        self.lock().consumed.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::names;

    const T: Timestamp = Timestamp::from_unix(1_767_225_600);

    fn n(b: u8) -> Nonce {
        Nonce([b; 16])
    }

    #[test]
    fn lifecycle() {
        let reg = NonceRegistry::new(300);
        let desc = names(["name"]).unwrap();
        reg.register(n(1), desc.clone(), T).unwrap();
        assert_eq!(reg.register(n(1), desc.clone(), T), Err(NonceReuse));
        assert_eq!(
            reg.status(&n(1), T),
            NonceStatus::Pending {
                description: desc.clone()
            }
        );
        assert_eq!(reg.consume(&n(1), T), ConsumeOutcome::Consumed);
        assert_eq!(reg.consume(&n(1), T), ConsumeOutcome::AlreadyConsumed);
        assert_eq!(reg.status(&n(1), T), NonceStatus::Consumed);
        assert_eq!(reg.register(n(1), desc, T), Err(NonceReuse));
        assert_eq!(reg.status(&n(2), T), NonceStatus::Unknown);
        assert_eq!(reg.consume(&n(2), T), ConsumeOutcome::Unknown);
    }

    #[test]
    fn ttl_boundary_is_inclusive() {
        let reg = NonceRegistry::new(300);
        reg.register(n(1), vec![], T).unwrap();
        assert!(matches!(
            reg.status(&n(1), T.plus_seconds(300)),
            NonceStatus::Pending { .. }
        ));
        assert_eq!(reg.status(&n(1), T.plus_seconds(301)), NonceStatus::Expired);
        assert_eq!(
            reg.consume(&n(1), T.plus_seconds(301)),
            ConsumeOutcome::Expired
        );
    }

    #[test]
    fn eviction() {
        let reg = NonceRegistry::new(60);
        reg.register(n(1), vec![], T).unwrap();
        reg.register(n(2), vec![], T).unwrap();
        reg.consume(&n(2), T);
        reg.register(n(3), vec![], T.plus_seconds(50)).unwrap();
        assert_eq!(reg.evict_expired(T.plus_seconds(60)), 0);
        assert_eq!(reg.evict_expired(T.plus_seconds(61)), 2);
        assert_eq!(reg.status(&n(1), T.plus_seconds(61)), NonceStatus::Unknown);
        assert_eq!(reg.status(&n(2), T.plus_seconds(61)), NonceStatus::Unknown);
        assert!(matches!(
            reg.status(&n(3), T.plus_seconds(61)),
            NonceStatus::Pending { .. }
        ));
        // once evicted the value may be issued again
        reg.register(n(2), vec![], T.plus_seconds(61)).unwrap();
    }

    #[test]
    fn concurrent_consume_is_exactly_once() {
        let reg = NonceRegistry::new(300);
        for i in 0..100u8 {
            reg.register(n(i), vec![], T).unwrap();
        }
        let wins: usize = std::thread::scope(|s| {
            let handles: Vec<_> = (0..4)
                .map(|_| {
                    s.spawn(|| {
                        (0..100u8)
                            .filter(|i| reg.consume(&n(*i), T) == ConsumeOutcome::Consumed)
                            .count()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).sum()
        });
        assert_eq!(wins, 100);
    }
}
