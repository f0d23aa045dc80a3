use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use shanks_bench::{linear_problem, pagerank, picard_window};
use shanks_core::drivers::{self, atm_step, AtmState, HVariant, ThetaRule};
use shanks_core::shanks::{extrapolate, CoefficientStrategy, ExtrapolationOptions, YSpec};
use shanks_core::{FixedPointProblem, LambdaScale, Method, MethodConfig, RegularizationPolicy};

fn extrapolation(c: &mut Criterion) {
    let mut group = c.benchmark_group("extrapolate");
    let prob = linear_problem(2000, 7);
    let k = 5;
    let window = picard_window(&prob, 2 * k + 1);
    let strategies = [
        ("min_res_alpha", CoefficientStrategy::MinResAlpha),
        ("svd", CoefficientStrategy::MinResAlphaSvd),
        ("rre", CoefficientStrategy::MinResBeta),
        ("mpe", CoefficientStrategy::GeneralY(YSpec::Mpe)),
        ("topo_alpha", CoefficientStrategy::TopoAlpha),
        ("topo_beta", CoefficientStrategy::TopoBeta),
    ];
    for (name, strategy) in &strategies {
        group.bench_function(*name, |b| {
            b.iter(|| extrapolate(black_box(&window), 0, k, strategy, &ExtrapolationOptions::default()))
        });
    }
    let ridge = ExtrapolationOptions { lambda: 1e-6, lambda_scale: LambdaScale::Relative, ..Default::default() };
    group.bench_function("rre_ridge", |b| {
        b.iter(|| extrapolate(black_box(&window), 0, k, &CoefficientStrategy::MinResBeta, &ridge))
    });
    group.finish();
}

fn anderson_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("aa_step");
    let prob = linear_problem(2000, 8);
    for depth in [3, 7, 10] {
        let mut state = AtmState::new(prob.initial_guess(), depth);
        let rule = ThetaRule::Anderson(HVariant::Anderson);
        for _ in 0..=depth {
            let g = prob.evaluate(state.current()).unwrap();
            atm_step(&mut state, &g, &rule, 0.0, 1.0).unwrap();
        }
        let g = prob.evaluate(state.current()).unwrap();
        state.record_residual(&g - state.current()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(depth), &depth, |b, _| {
            b.iter(|| state.propose(&rule, black_box(0.0), 1.0))
        });
    }
    group.finish();
}

fn pagerank_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("pagerank_2000");
    group.sample_size(10);
    let prob = pagerank(2000);
    let configs = [
        ("plain", MethodConfig::new(Method::PlainFixedPoint)),
        ("rrre_gcv", MethodConfig::new(Method::Rrre)),
        ("rnla_grid", MethodConfig::new(Method::Rnla).with_policy(RegularizationPolicy::grid_search())),
        ("aa_m7", MethodConfig::new(Method::Aa).with_depth(7)),
        ("raa_m7", MethodConfig::new(Method::Raa).with_depth(7)),
    ];
    for (name, cfg) in &configs {
        group.bench_function(*name, |b| b.iter(|| drivers::run(&prob, cfg).unwrap().record.g_eval_count));
    }
    group.finish();
}

criterion_group!(benches, extrapolation, anderson_step, pagerank_runs);
criterion_main!(benches);
