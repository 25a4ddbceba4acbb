use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use vpl_core::collision::CollisionAssembly;
use vpl_core::initial;
use vpl_core::solver::{Solver, SolverOptions};
use vpl_core::weyl::{make_symbol, quantize, QuantRule, SymbolGrid, SymbolKind, SymbolParams};
use vpl_core::{GridConfig, PhaseGrid, VelocityGrid};

fn collision(c: &mut Criterion) {
    let grid = VelocityGrid::new(16, 6.0).unwrap();
    let asm = CollisionAssembly::new(&grid, -2.5).unwrap();
    let f: Vec<f64> = (0..2 * grid.len()).map(|i| ((i as f64) * 0.37).sin()).collect();
    c.bench_function("apply_l nv=16", |b| b.iter(|| asm.apply_l(black_box(&f))));
    c.bench_function("apply_gamma nv=16", |b| b.iter(|| asm.apply_gamma(black_box(&f), black_box(&f))));
    c.bench_function("sigma assembly nv=16", |b| b.iter(|| CollisionAssembly::new(black_box(&grid), -2.5).unwrap()));
}

fn solver(c: &mut Criterion) {
    let phase = PhaseGrid::new(&GridConfig { nv: 8, vmax: 5.0, nx: 8, lx: std::f64::consts::PI, dim_x: 1 }).unwrap();
    let asm = CollisionAssembly::new(&phase.v, 0.0).unwrap();
    let s = Solver::new(&phase, &asm, SolverOptions::default()).unwrap();
    let state = s.init(&initial::macroscopic(&phase, 1e-2)).unwrap();
    c.bench_function("nonlinear step nv=8 nx=8", |b| b.iter(|| s.step(black_box(&state)).unwrap()));
}

fn weyl(c: &mut Criterion) {
    let p = SymbolParams::new(-2.5, 1.0, 0.5).unwrap();
    let g = SymbolGrid::dft(1, 64, 6.0).unwrap();
    let theta = make_symbol(SymbolKind::Theta, &g, p, Some(&[1.0])).unwrap();
    c.bench_function("weyl quantize theta n=64", |b| b.iter(|| quantize(black_box(&theta), QuantRule::Weyl).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = collision, solver, weyl
}
criterion_main!(benches);
