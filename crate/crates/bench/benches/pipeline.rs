use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tmhc_bench::{synthetic_docs, synthetic_matrix};
use tmhc_core::clusterer::{bisecting_kmeans, cut, hac, DocVector, Linkage};
use tmhc_core::corpus::{Corpus, Document};
use tmhc_core::clusterer::tfidf_vectorize;
use tmhc_core::metrics::{entropy, f_measure, purity, ContingencyTable};
use tmhc_core::similarity::{build_matrix, sim_pair};

fn bench_similarity(c: &mut Criterion) {
    let mut group = c.benchmark_group("similarity");
    let docs = synthetic_docs(2, 7);
    group.bench_function("sim_pair", |b| b.iter(|| sim_pair(&docs[0], &docs[1])));
    for n in [50usize, 150, 300] {
        let docs = synthetic_docs(n, 7);
        group.bench_with_input(BenchmarkId::new("build_matrix", n), &docs, |b, docs| {
            b.iter(|| build_matrix(docs).unwrap())
        });
    }
    group.finish();
}

fn bench_hac(c: &mut Criterion) {
    let mut group = c.benchmark_group("hac");
    let matrix = synthetic_matrix(200, 11);
    for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
        group.bench_with_input(BenchmarkId::new("linkage", linkage), &matrix, |b, m| {
            b.iter(|| cut(&hac(m, linkage), 8).unwrap())
        });
    }
    group.finish();
}

fn bench_bkm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let texts: Vec<String> = (0..200)
        .map(|_| {
            (0..30)
                .map(|_| format!("w{}", rng.gen_range(0..120)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let corpus = Corpus::new(
        texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| Document { id: format!("d{i}"), text, gold_class: None })
            .collect(),
    )
    .unwrap();
    let vectors: Vec<DocVector> = tfidf_vectorize(&corpus, &Default::default());
    c.bench_function("bisecting_kmeans/200x8", |b| {
        b.iter(|| bisecting_kmeans(&vectors, 8, 5, 42).unwrap())
    });
}

fn bench_metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let counts: Vec<Vec<usize>> = (0..10)
        .map(|_| (0..10).map(|_| rng.gen_range(1..=50)).collect())
        .collect();
    let table = ContingencyTable::from_counts(counts).unwrap();
    c.bench_function("metrics/f_purity_entropy", |b| {
        b.iter(|| (f_measure(&table), purity(&table), entropy(&table)))
    });
}

criterion_group!(benches, bench_similarity, bench_hac, bench_bkm, bench_metrics);
criterion_main!(benches);
