use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use seqrec_core::{
    Execution, Experiment, KSchedule, ModelParams, MultiplicativeModel, RatingScale, ResponderProcess,
    RevealProcess,
};

const REPLICATIONS: u64 = 64;

fn experiment(execution: Execution) -> Experiment<MultiplicativeModel> {
    let model = MultiplicativeModel::new(RatingScale::new(10.0, 8).unwrap(), ModelParams::default()).unwrap();
    Experiment::new(
        model,
        RevealProcess::Incremental4Plus1,
        ResponderProcess::BernoulliGrowth { p: 0.5 },
        1,
    )
    .unwrap()
    .with_execution(execution)
}

fn replications(c: &mut Criterion) {
    let schedule = KSchedule::four_item_masks();
    let mut group = c.benchmark_group("replications");
    group.sample_size(10);
    for n in [200usize, 800] {
        for (name, execution) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel),
        ] {
            let exp = experiment(execution);
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| black_box(exp.errors(n, schedule.k(n), 0..REPLICATIONS).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
