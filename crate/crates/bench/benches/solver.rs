use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use relay_aoi::{
    evaluate_policy_exact, joint_transitions, rvi_solve, run_simulation, table_executor, Action,
    BellmanOperator, SolverConfig, SourceKernel, State, SystemParams, TruncationLevel,
};

fn params() -> SystemParams {
    SystemParams::new(0.6, 0.9, 0.8, 0.7, 1.6).unwrap()
}

fn kernel(c: &mut Criterion) {
    let n = TruncationLevel::new(7).unwrap();
    let state = State::from_tuple([1, 2, 1, 0, 3, 2]);
    let p = params();
    c.bench_function("joint_transitions", |b| {
        b.iter(|| joint_transitions(black_box(&state), Action::new(1, 2).unwrap(), &p, n).unwrap())
    });
    c.bench_function("source_kernel_pair_n7", |b| b.iter(|| SourceKernel::pair(&p, n).unwrap()));
}

fn bellman(c: &mut Criterion) {
    let mut group = c.benchmark_group("bellman_sweep");
    group.sample_size(20);
    for n in [4u32, 7] {
        let n = TruncationLevel::new(n).unwrap();
        let kernels = SourceKernel::pair(&params(), n).unwrap();
        let mut op = BellmanOperator::new(&kernels, 1.37).unwrap();
        let h: Vec<f64> = (0..n.num_states()).map(|i| (i % 97) as f64).collect();
        let mut values = vec![0.0; n.num_states()];
        group.bench_function(format!("n{n}"), |b| b.iter(|| op.apply(&h, &mut values, None)));
    }
    group.finish();
}

fn solve_and_evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let cfg = SolverConfig::default();
    let p = params();
    group.bench_function("rvi_n7", |b| b.iter(|| rvi_solve(&p, &cfg, 1.37).unwrap()));
    let policy = rvi_solve(&p, &cfg, 1.37).unwrap().policy;
    group.bench_function("evaluate_n7", |b| b.iter(|| evaluate_policy_exact(&policy, &p).unwrap()));
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let p = params();
    let policy = rvi_solve(&p, &SolverConfig::default(), 1.37).unwrap().policy;
    c.bench_function("simulate_table_10k_slots", |b| {
        b.iter_batched(
            || table_executor(&policy),
            |mut exec| run_simulation(&mut exec, &p, 10_000, 7).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, kernel, bellman, solve_and_evaluate, simulation);
criterion_main!(benches);
