use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lcm_bench::{half_move_trace, sim_trace};
use lcm_core::sim::analyze_sim_trace;
use lcm_core::{monitor_mlcv, validate_schedule, SchedulerClass, Trace};

fn engine(c: &mut Criterion) {
    let mut g = c.benchmark_group("engine");
    for class in [
        SchedulerClass::Ssynch,
        SchedulerClass::Asynch,
        SchedulerClass::MAtomic,
    ] {
        g.bench_with_input(
            BenchmarkId::new("half_move_1000", class),
            &class,
            |b, &class| b.iter(|| half_move_trace(class, 1000, 7)),
        );
    }
    for n in [3, 5] {
        g.bench_with_input(BenchmarkId::new("sim_2000", n), &n, |b, &n| {
            b.iter(|| sim_trace(n, SchedulerClass::Asynch, 2000, 7))
        });
    }
    g.finish();
}

fn checkers(c: &mut Criterion) {
    let sim = sim_trace(5, SchedulerClass::Asynch, 2000, 7);
    let half = half_move_trace(SchedulerClass::Asynch, 2000, 7);
    c.bench_function("validate_schedule_m_atomic", |b| {
        b.iter(|| validate_schedule(&sim, SchedulerClass::MAtomic))
    });
    c.bench_function("analyze_sim_trace", |b| {
        b.iter(|| analyze_sim_trace(&sim).unwrap())
    });
    c.bench_function("monitor_mlcv", |b| {
        b.iter(|| monitor_mlcv(&half, 1e-9, false).unwrap())
    });
    c.bench_function("trace_round_trip", |b| {
        b.iter(|| Trace::deserialize(&sim.serialize()).unwrap())
    });
}

criterion_group!(benches, engine, checkers);
criterion_main!(benches);
