use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use cic_bench::{Bench, NOW};
use cic_core::entropy::RandomSource;
use cic_core::rp::{accept_claim, NonceRegistry, DEFAULT_TTL_SECONDS};
use cic_core::{
    issue_cic, open, seal, validate_chain, verify_cic, AttributeSchema, ClaimPayload, Nonce,
    SchemaRegistry, ValueType,
};

fn envelope(c: &mut Criterion) {
    let mut b = Bench::new(1);
    let payload = ClaimPayload {
        attributes: b.attributes.clone(),
        nonce: Nonce(b.rng.array().unwrap()),
        issued_at: NOW,
    };
    let rp_pub = b.rp.enc.public();
    c.bench_function("seal", |bn| {
        bn.iter(|| seal(black_box(&payload), &rp_pub, &mut b.rng).unwrap())
    });
    let sealed = seal(&payload, &rp_pub, &mut b.rng).unwrap();
    c.bench_function("open", |bn| {
        bn.iter(|| open(black_box(&sealed), &b.rp.enc).unwrap())
    });
}

fn claims(c: &mut Criterion) {
    let mut b = Bench::new(2);
    let nonce = Nonce(b.rng.array().unwrap());
    let rp_pub = b.rp.enc.public();
    let inter = [b.mid.cert.clone()];
    c.bench_function("issue_cic", |bn| {
        bn.iter(|| {
            issue_cic(
                &b.attributes, nonce, &rp_pub, &b.aa.sig, &b.aa.cert, &inter, NOW, &mut b.rng,
            )
            .unwrap()
        })
    });
    let claim = issue_cic(
        &b.attributes, nonce, &rp_pub, &b.aa.sig, &b.aa.cert, &inter, NOW, &mut b.rng,
    )
    .unwrap();
    c.bench_function("verify_cic", |bn| {
        bn.iter(|| verify_cic(black_box(&claim), &nonce, &b.rp.enc).unwrap())
    });
    c.bench_function("validate_chain_3", |bn| {
        bn.iter(|| validate_chain(black_box(&b.aa.cert), &inter, &b.trust, NOW))
    });
}

fn accept(c: &mut Criterion) {
    let mut b = Bench::new(3);
    let schema = SchemaRegistry::new([
        AttributeSchema::new("name", ValueType::Text, "Name"),
        AttributeSchema::new("credit_score", ValueType::Integer, "Credit score"),
    ])
    .unwrap();
    let registry = NonceRegistry::new(DEFAULT_TTL_SECONDS);
    let rp_pub = b.rp.enc.public();
    let inter = [b.mid.cert.clone()];
    let description: Vec<_> = b.attributes.names().cloned().collect();
    c.bench_function("accept_claim", |bn| {
        bn.iter_batched(
            || {
                let nonce = Nonce(b.rng.array().unwrap());
                registry.register(nonce, description.clone(), NOW).unwrap();
                let claim = issue_cic(
                    &b.attributes, nonce, &rp_pub, &b.aa.sig, &b.aa.cert, &inter, NOW, &mut b.rng,
                )
                .unwrap();
                (nonce, claim)
            },
            |(nonce, claim)| {
                let r = accept_claim(&nonce, &claim, &registry, &b.trust, &schema, &b.rp.enc, NOW);
                assert!(r.accepted);
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, envelope, claims, accept);
criterion_main!(benches);
