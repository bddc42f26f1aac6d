use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use trapwalk_core::lattice::{BoxWindow, LatticeRegion, ModelParams, ObstacleField, Point, Site};
use trapwalk_core::polymer::{
    exact_distribution, GibbsConfig, GibbsSampler, McmcConfig, McmcVariant, PathMcmc, PolymerWeight, Variant,
};
use trapwalk_core::spectral::{log_killed_heat_kernel, principal_eigen, DEFAULT_TOL};
use trapwalk_core::structure::{detect_vacant_ball, DetectConfig};

fn spectral(c: &mut Criterion) {
    let ball = LatticeRegion::ball_at_origin(2, 20.0);
    c.bench_function("principal_eigen ball R=20", |b| b.iter(|| principal_eigen(black_box(&ball), DEFAULT_TOL)));
    let small = LatticeRegion::ball_at_origin(2, 8.0);
    let o = Site::origin(2);
    c.bench_function("heat kernel R=8 n=5000", |b| b.iter(|| log_killed_heat_kernel(&small, &o, &o, black_box(5000))));
}

fn polymer(c: &mut Criterion) {
    let w = PolymerWeight::new(2, 0.5, &[0.2, 0.0]).unwrap();
    c.bench_function("exact_distribution N=10", |b| {
        b.iter(|| exact_distribution(&w, black_box(10), Variant::Tilted, None))
    });
    let mut chain = PathMcmc::new(w.clone(), 64, McmcVariant::Tilted, McmcConfig::default(), 1).unwrap();
    c.bench_function("path mcmc 1000 steps N=64", |b| {
        b.iter(|| {
            for _ in 0..1000 {
                chain.step();
            }
        })
    });
    let w = PolymerWeight::new(2, 0.7, &[0.4, 0.0]).unwrap();
    let mut g = GibbsSampler::new(&w, 1024, GibbsConfig::new(40), 1).unwrap();
    c.bench_function("gibbs sweep N=1024", |b| b.iter(|| g.sweep().unwrap()));
}

fn structure(c: &mut Criterion) {
    let params = ModelParams::new(2, 0.5, &[0.0, 0.0], 10_000).unwrap();
    let rho = params.rho_n();
    let field = ObstacleField::sample(BoxWindow::centered(2, (3.0 * rho).ceil() as i32), 0.5, 3)
        .unwrap()
        .with_planted_vacant_ball(Point::new(&[1.5, -2.5]), rho);
    let cfg = DetectConfig::default();
    c.bench_function("detect_vacant_ball N=1e4", |b| b.iter(|| detect_vacant_ball(black_box(&field), &params, None, &cfg)));
}

criterion_group!(benches, spectral, polymer, structure);
criterion_main!(benches);
