#![allow(dead_code)]

use lcm_core::engine::{Disorientation, RandomFair};
use lcm_core::trace::{Configuration, RobotState, Stage};
use lcm_core::{
    registry, run_with, sim_wrap, Adversary, Decision, EngineView, EventKind, Point, RunConfig,
    Scenario, SchedulerClass, SimConfig, Trace,
};

/// Stops the wrapped adversary once the trace holds `budget` events.
pub struct EventBudget<A> {
    pub inner: A,
    pub budget: usize,
}

impl<A: Adversary> Adversary for EventBudget<A> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        if view.trace.len() >= self.budget {
            return Decision::Stop;
        }
        self.inner.next_step(view)
    }
}

pub fn pair() -> Scenario {
    Scenario::new(vec![Point::ORIGIN, Point::new(1.0, 0.0)])
}

/// `n` robots near a circle, jittered by `seed`.
pub fn ring(n: usize, seed: u64) -> Scenario {
    let pts = (0..n)
        .map(|i| {
            let t = i as f64 * std::f64::consts::TAU / n as f64 + 0.1 + 0.01 * (seed % 7) as f64;
            let r = 1.0 + 0.05 * ((seed as usize + i) % 5) as f64;
            Point::new(t.cos() * r, t.sin() * r)
        })
        .collect();
    Scenario::new(pts)
}

/// A SIM(color_cycler) run driven by a random fair adversary for `events` events.
pub fn sim_run(
    n: usize,
    seed: u64,
    class: SchedulerClass,
    events: usize,
    sim: SimConfig,
    color_delay: bool,
) -> Trace {
    let algo = sim_wrap(&registry("color_cycler").unwrap(), sim).unwrap();
    let mut adv = EventBudget {
        inner: RandomFair::new(seed, Disorientation::Variable),
        budget: events,
    };
    let mut cfg = RunConfig::new(events as u64, seed);
    cfg.color_delay = color_delay;
    run_with(&ring(n, seed), &algo, class, &mut adv, &cfg).unwrap()
}

/// Checks that every Look saw exactly the lights committed by Computes at
/// earlier times and the positions committed by MoveEnds at earlier times,
/// rebuilt from the event list alone. Returns the first offending time.
pub fn delay_invariant_violation(trace: &Trace) -> Option<u64> {
    let h = trace.header();
    let mut robots: Vec<RobotState> = h
        .init_positions
        .iter()
        .zip(&h.init_lights)
        .map(|(p, l)| RobotState {
            pos: *p,
            light: l.clone(),
            pending_light: None,
            pending_pos: None,
            stage: Stage::Idle,
            progress: 0.0,
        })
        .collect();
    let mut shown_at = u64::MAX;
    for e in trace.events() {
        let r = e.robot;
        match e.kind {
            EventKind::Look => {
                if shown_at != e.time {
                    for &(q, f) in &e.transit {
                        robots[q].progress = f;
                    }
                    shown_at = e.time;
                }
                let cfg = Configuration {
                    time: e.time,
                    robots: robots.clone(),
                };
                if e.snap != Some(cfg.digest()) {
                    return Some(e.time);
                }
            }
            EventKind::Compute => robots[r].light = e.light.clone(),
            EventKind::MoveBegin => {
                let dest = e.dest.expect("MoveBegin carries its destination");
                robots[r].stage = Stage::Moving {
                    from: robots[r].pos,
                    dest,
                };
                robots[r].progress = 0.0;
            }
            EventKind::MoveEnd => {
                robots[r].pos = e.pos;
                robots[r].stage = Stage::Idle;
                robots[r].progress = 0.0;
            }
        }
    }
    None
}
