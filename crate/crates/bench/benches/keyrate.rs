use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use loose_decoy::decoy::{brute_force_s1_oracle, solve_s1_lower};
use loose_decoy::keyrate::{evaluate_protocol, find_secure_distance, optimize_intensities};
use loose_decoy_bench::{channel_at, default_detector, loose_spec};

fn bounds(c: &mut Criterion) {
    let (s_mu, s_mu_prime, s0) = (0.0048, 0.0237, 1.7e-6);
    c.bench_function("solve_s1_lower", |b| {
        b.iter(|| solve_s1_lower(black_box(0.1), black_box(0.5), s_mu, s_mu_prime, s0))
    });
    c.bench_function("brute_force_s1_oracle step 1e-5", |b| {
        b.iter(|| brute_force_s1_oracle(black_box(0.1), black_box(0.5), s_mu, s_mu_prime, s0, 1e-5))
    });
}

fn protocol(c: &mut Criterion) {
    let det = default_detector();
    let spec = loose_spec(1.05);
    let channel = channel_at(50.0);
    c.bench_function("evaluate_protocol 50 km", |b| {
        b.iter(|| evaluate_protocol(black_box(&spec), &channel, &det))
    });
    let origin = channel_at(0.0);
    c.bench_function("find_secure_distance", |b| {
        b.iter(|| find_secure_distance(black_box(&spec), &origin, &det, 0.0))
    });
    let mus: Vec<f64> = (1..=10).map(|i| 0.02 * i as f64).collect();
    let mu_primes: Vec<f64> = (1..=10).map(|i| 0.1 * i as f64).collect();
    c.bench_function("optimize_intensities 10x10", |b| {
        b.iter(|| optimize_intensities(&spec, &channel, &det, black_box(&mus), &mu_primes))
    });
}

criterion_group!(benches, bounds, protocol);
criterion_main!(benches);
