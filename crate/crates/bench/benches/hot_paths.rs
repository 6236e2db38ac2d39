//! Throughput of the numerical kernels the estimators spend their time in.
//! Dimensions are kept small enough that `cargo bench` finishes in minutes;
//! scaling in N is what matters, not absolute size.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use interact_clark::{
    clark_integrand_path, delta_representation_residual, euler_solve, inner_conditional_multi,
    integrand_density, mean_field_drift, variational_solve, BandwidthPolicy, BrownianPath,
    CoefficientSet, DiffusionFamily, DriftFamily, EnsembleState, InitialDistribution, StreamRole,
    TestFunction, TimeGrid,
};
use std::hint::black_box;

fn gaussian_ensemble(n: usize) -> EnsembleState {
    EnsembleState::from_quantiles(
        InitialDistribution::from_config("gaussian", &[0.0, 1.0]).unwrap(),
        n,
    )
    .unwrap()
}

fn tanh_sin() -> CoefficientSet {
    CoefficientSet::new(
        DriftFamily::TanhKernel { alpha: 0.2, gamma: 1.0 },
        DiffusionFamily::SinBounded { base: 1.5, amp: 0.5 },
    )
    .unwrap()
}

fn tanh_unit() -> CoefficientSet {
    CoefficientSet::new(
        DriftFamily::TanhKernel { alpha: 0.2, gamma: 1.0 },
        DiffusionFamily::Unit,
    )
    .unwrap()
}

/// O(N^2) pairwise drift, the inner loop of every flow step.
fn bench_mean_field_drift(c: &mut Criterion) {
    let cs = tanh_unit();
    let mut group = c.benchmark_group("mean_field_drift");
    for n in [8usize, 32, 128] {
        let state = gaussian_ensemble(n);
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &state, |b, s| {
            b.iter(|| mean_field_drift(black_box(s), &cs).unwrap())
        });
    }
    group.finish();
}

/// Full flow solve: 256 steps, pairwise drift plus shared-noise diffusion.
fn bench_euler_solve(c: &mut Criterion) {
    let grid = TimeGrid::unit(256).unwrap();
    let path = BrownianPath::sample(grid, 5150, StreamRole::Path, 0, 0, 0);
    let mut group = c.benchmark_group("euler_solve");
    for n in [2usize, 8, 32] {
        let e0 = gaussian_ensemble(n);
        group.throughput(Throughput::Elements(256 * (n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &e0, |b, e| {
            b.iter(|| euler_solve(&tanh_sin(), black_box(e), &path).unwrap())
        });
    }
    group.finish();
}

/// Derivative recursion along a solved trajectory, launched at t = 0.
fn bench_variational_solve(c: &mut Criterion) {
    let grid = TimeGrid::unit(256).unwrap();
    let path = BrownianPath::sample(grid, 5151, StreamRole::Path, 0, 0, 0);
    let cs = tanh_sin();
    let mut group = c.benchmark_group("variational_solve");
    for n in [2usize, 8, 32] {
        let e0 = gaussian_ensemble(n);
        let traj = euler_solve(&cs, &e0, &path).unwrap();
        group.throughput(Throughput::Elements(256 * (n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &traj, |b, t| {
            b.iter(|| variational_solve(&cs, black_box(t), &path, 0).unwrap())
        });
    }
    group.finish();
}

/// Conditional-expectation estimate at one frozen state: one vs three test
/// functions over the same inner sample (the multi-function path shares the
/// simulation work).
fn bench_inner_estimate(c: &mut Criterion) {
    let cs = tanh_unit();
    let grid = TimeGrid::unit(64).unwrap();
    let path = BrownianPath::sample(grid, 5152, StreamRole::Outer, 0, 0, 0);
    let state = euler_solve(&cs, &gaussian_ensemble(2), &path)
        .unwrap()
        .state(32)
        .clone();
    let one = [TestFunction::Sin];
    let three = [TestFunction::Identity, TestFunction::Square, TestFunction::Sin];
    let mut group = c.benchmark_group("inner_estimate_256");
    for (label, fs) in [("1fn", &one[..]), ("3fn", &three[..])] {
        group.bench_function(label, |b| {
            b.iter(|| {
                inner_conditional_multi(&cs, black_box(&state), fs, 256, &grid, 5152, 0).unwrap()
            })
        });
    }
    group.finish();
}

/// Integrand estimate along a whole outer path (the unit of work nested MC
/// repeats M_outer times).
fn bench_integrand_path(c: &mut Criterion) {
    let cs = tanh_unit();
    let grid = TimeGrid::unit(64).unwrap();
    let path = BrownianPath::sample(grid, 5153, StreamRole::Outer, 0, 0, 0);
    let e0 = gaussian_ensemble(2);
    c.bench_function("clark_integrand_path_64x64", |b| {
        b.iter(|| {
            clark_integrand_path(&cs, black_box(&e0), TestFunction::Sin, &path, 64, 5153, 0)
                .unwrap()
        })
    });
}

/// Weighted derivative-kernel smoothing, simulation included.
fn bench_density(c: &mut Criterion) {
    let grid = TimeGrid::unit(64).unwrap();
    let cs = CoefficientSet::new(DriftFamily::Zero, DiffusionFamily::Unit).unwrap();
    let path = BrownianPath::sample(grid, 5154, StreamRole::Outer, 0, 0, 0);
    let state = euler_solve(&cs, &EnsembleState::delta(0.0), &path)
        .unwrap()
        .state(32)
        .clone();
    c.bench_function("integrand_density_1000x512", |b| {
        b.iter(|| {
            integrand_density(
                &cs,
                black_box(&state),
                &grid,
                1000,
                BandwidthPolicy::Silverman,
                512,
                5154,
                0,
            )
            .unwrap()
        })
    });
}

/// Quadrature-based exact residual for the point-mass benchmark.
fn bench_oracle_residual(c: &mut Criterion) {
    let grid = TimeGrid::unit(256).unwrap();
    let path = BrownianPath::sample(grid, 5155, StreamRole::Path, 0, 0, 0);
    c.bench_function("delta_residual_256x40", |b| {
        b.iter(|| {
            delta_representation_residual(TestFunction::Sin, black_box(&path), 40).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_mean_field_drift,
    bench_euler_solve,
    bench_variational_solve,
    bench_inner_estimate,
    bench_integrand_path,
    bench_density,
    bench_oracle_residual
);
criterion_main!(benches);
