use std::sync::Arc;

use cosynth_core::analytics::{pca_project, tfidf_vectors, DefaultTokenizer, IdfMode};
use cosynth_core::gateway::{MockSpec, SyntheticBackend};
use cosynth_core::{BoundaryPredictor, Engine, LexiconPredictor, SynthesisConfig, TokenKind};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn engine() -> Engine {
    Engine::new(
        SynthesisConfig::default(),
        Arc::new(SyntheticBackend::new(MockSpec::default())),
        Arc::new(LexiconPredictor::default()),
        Arc::new(LexiconPredictor::default()),
    )
    .unwrap()
}

fn lexicon(c: &mut Criterion) {
    let p = LexiconPredictor::default();
    let text = " compute gcd(a,b) mod p hence x = 2 sum prefix index loop returns 17 value divides Okay, wait, so let me check";
    c.bench_function("lexicon_predict_style", |b| b.iter(|| p.predict(black_box(text), TokenKind::Style)));
    c.bench_function("lexicon_predict_capability", |b| {
        b.iter(|| p.predict(black_box(text), TokenKind::Capability))
    });
}

fn tessy(c: &mut Criterion) {
    let e = engine();
    c.bench_function("tessy_synthetic_trajectory", |b| {
        b.iter(|| e.synthesize_tessy("bench", black_box("Compute gcd(12, 18).")).unwrap())
    });
}

fn analytics(c: &mut Criterion) {
    let e = engine();
    let docs: Vec<(String, String)> = (0..64)
        .map(|i| {
            let r = e.synthesize_tessy(&i.to_string(), &format!("Question {i}")).unwrap();
            (r.id.clone(), r.think_text())
        })
        .collect();
    c.bench_function("tfidf_64_docs", |b| {
        b.iter(|| tfidf_vectors(black_box(&docs), &DefaultTokenizer, IdfMode::Plain).unwrap())
    });
    let (vocab, vectors) = tfidf_vectors(&docs, &DefaultTokenizer, IdfMode::Plain).unwrap();
    c.bench_function("pca_64_docs", |b| b.iter(|| pca_project(black_box(&vectors), vocab.len()).unwrap()));
}

criterion_group!(benches, lexicon, tessy, analytics);
criterion_main!(benches);
