use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use manna_bench::{lambda, random, six_agents_two_bads, six_by_five, two_agents_six_bads};
use manna_core::topology::{pattern_ratios, ratio_instance};
use manna_core::{
    brute_force_components, classify, ef_components_two_bads, enumerate, enumerate_general, solve_positive_with, Kind,
    Limits, PositiveOptions,
};

fn classification(c: &mut Criterion) {
    let mut g = c.benchmark_group("classify");
    for (name, p) in [("lambda", lambda(-1.0)), ("random 8x8", random(Kind::Positive, 8, 8, 7))] {
        g.bench_function(name, |b| b.iter(|| classify(black_box(&p)).unwrap()));
    }
    g.finish();
}

fn closed_forms(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate closed form");
    let limits = Limits::default();
    for (name, p) in [("two agents, six bads", two_agents_six_bads()), ("six agents, two bads", six_agents_two_bads())]
    {
        g.bench_function(name, |b| b.iter(|| enumerate(black_box(&p), &limits).unwrap()));
    }
    g.finish();
}

fn general_search(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate general");
    g.sample_size(10);
    let p = six_by_five();
    for parallel in [false, true] {
        let limits = Limits { parallel, ..Limits::default() };
        g.bench_with_input(
            BenchmarkId::new("six by five", if parallel { "parallel" } else { "serial" }),
            &limits,
            |b, l| b.iter(|| enumerate_general(black_box(&p), l).unwrap()),
        );
    }
    let small = random(Kind::Negative, 4, 4, 3);
    g.bench_function("random 4x4", |b| b.iter(|| enumerate_general(black_box(&small), &Limits::default()).unwrap()));
    g.finish();
}

fn positive(c: &mut Criterion) {
    let mut g = c.benchmark_group("positive solver");
    for size in [3, 6, 10] {
        let p = random(Kind::Positive, size, size, size as u64);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{size}x{size}")), &p, |b, p| {
            b.iter(|| solve_positive_with(black_box(p), &PositiveOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn components(c: &mut Criterion) {
    let mut g = c.benchmark_group("components");
    let p = ratio_instance(&pattern_ratios(9)).unwrap();
    g.bench_function("formula, pattern 9", |b| b.iter(|| ef_components_two_bads(black_box(&p)).unwrap()));
    g.sample_size(10);
    for grid in [50, 200] {
        g.bench_with_input(BenchmarkId::new("grid oracle, pattern 9", grid), &grid, |b, &grid| {
            b.iter(|| brute_force_components(black_box(&p), grid).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, classification, closed_forms, general_search, positive, components);
criterion_main!(benches);
