use criterion::{black_box, criterion_group, criterion_main, Criterion};

use floquet_embed::floquet::{floquet_solution, monodromy};
use floquet_embed::synth::solve_xi;
use floquet_embed::verify::{decay_check, stability_check};
use floquet_embed::{Coefficients, IntegratorSpec};
use floquet_embed_bench::{free_piece, mixed_coeffs, targets};

fn floquet(c: &mut Criterion) {
    let spec = IntegratorSpec::default();
    let coeffs = mixed_coeffs();
    c.bench_function("monodromy", |b| b.iter(|| monodromy(&coeffs, black_box(1.7), &spec).unwrap()));
    c.bench_function("floquet_solution", |b| {
        b.iter(|| floquet_solution(&coeffs, black_box(1.7), &spec).unwrap())
    });
    let sol = floquet_solution(&coeffs, 1.7, &spec).unwrap();
    c.bench_function("frame", |b| b.iter(|| sol.frame(black_box(1234.567))));
    c.bench_function("xi_coefficients", |b| b.iter(|| sol.xi_coefficients(black_box(1234.567))));
}

fn pieces(c: &mut Criterion) {
    let spec = IntegratorSpec::default();
    let ts = targets(&Coefficients::free(), &[0.7, 1.3]);
    let piece = free_piece(1e3);
    let mut g = c.benchmark_group("piece");
    g.sample_size(10);
    g.bench_function("solve_xi", |b| b.iter(|| solve_xi(&piece, &ts[0].floquet, &spec, 8.0).unwrap()));
    g.bench_function("decay_check", |b| b.iter(|| decay_check(&ts[0], &piece, 210.0, 5.0, &spec).unwrap()));
    g.bench_function("stability_check", |b| {
        b.iter(|| stability_check(&ts[0], &ts[1], &piece, 8, 0.02, &spec).unwrap())
    });
    g.finish();
}

criterion_group!(benches, floquet, pieces);
criterion_main!(benches);
