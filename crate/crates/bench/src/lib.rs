//! Fixtures shared by the benchmarks.

use lcm_core::engine::{Disorientation, RandomFair};
use lcm_core::{
    registry, run_with, sim_wrap, Point, RunConfig, Scenario, SchedulerClass, SimConfig, Trace,
};

/// `n` robots spread on a slightly irregular circle.
pub fn ring(n: usize) -> Scenario {
    let pts = (0..n)
        .map(|i| {
            let t = i as f64 * std::f64::consts::TAU / n as f64 + 0.1;
            Point::new(t.cos() * (1.0 + 0.1 * i as f64), t.sin())
        })
        .collect();
    Scenario::new(pts)
}

/// A random fair run of the SIM-wrapped color cycler.
pub fn sim_trace(n: usize, class: SchedulerClass, horizon: u64, seed: u64) -> Trace {
    let algo = sim_wrap(&registry("color_cycler").unwrap(), SimConfig::default()).unwrap();
    let mut adv = RandomFair::new(seed, Disorientation::Variable);
    run_with(
        &ring(n),
        &algo,
        class,
        &mut adv,
        &RunConfig::new(horizon, seed),
    )
    .unwrap()
}

/// A random fair run of the half-move algorithm on two robots.
pub fn half_move_trace(class: SchedulerClass, horizon: u64, seed: u64) -> Trace {
    let sc = Scenario::new(vec![Point::ORIGIN, Point::new(1.0, 0.0)]);
    let mut adv = RandomFair::new(seed, Disorientation::Variable);
    run_with(
        &sc,
        &registry("half_move").unwrap(),
        class,
        &mut adv,
        &RunConfig::new(horizon, seed),
    )
    .unwrap()
}
