//! Execution engine: adversaries propose steps, the engine checks them
//! against the scheduler class, runs the algorithm, and records the trace.

use std::borrow::Cow;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversaries::AdversaryError;
use crate::algorithms::{AlgoError, AlgorithmBinding};
use crate::geometry::{Handedness, LocalFrame};
use crate::model::{build_snapshot_with, ModelError, Scenario, Snapshot};
use crate::trace::{
    Configuration, CycleEvent, EventKind, RelevantTime, RobotId, Stage, Trace, TraceError,
    TraceHeader, TRACE_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchedulerClass {
    Fsynch,
    Ssynch,
    #[serde(rename = "ROUNDROBIN")]
    RoundRobin,
    LcAtomic,
    CmAtomic,
    MAtomic,
    Asynch,
}

impl SchedulerClass {
    pub const ALL: [SchedulerClass; 7] = [
        SchedulerClass::Fsynch,
        SchedulerClass::Ssynch,
        SchedulerClass::RoundRobin,
        SchedulerClass::LcAtomic,
        SchedulerClass::CmAtomic,
        SchedulerClass::MAtomic,
        SchedulerClass::Asynch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerClass::Fsynch => "FSYNCH",
            SchedulerClass::Ssynch => "SSYNCH",
            SchedulerClass::RoundRobin => "ROUNDROBIN",
            SchedulerClass::LcAtomic => "LC_ATOMIC",
            SchedulerClass::CmAtomic => "CM_ATOMIC",
            SchedulerClass::MAtomic => "M_ATOMIC",
            SchedulerClass::Asynch => "ASYNCH",
        }
    }

    fn synchronous(self) -> bool {
        matches!(
            self,
            SchedulerClass::Fsynch | SchedulerClass::Ssynch | SchedulerClass::RoundRobin
        )
    }

    /// Look and Compute share a time.
    fn lc_rules(self) -> bool {
        self.synchronous() || self == SchedulerClass::LcAtomic
    }

    /// Compute, MoveBegin and MoveEnd share a time.
    fn cm_rules(self) -> bool {
        self.synchronous() || self == SchedulerClass::CmAtomic
    }

    /// MoveBegin and MoveEnd share a time.
    fn m_rules(self) -> bool {
        self.cm_rules() || self == SchedulerClass::MAtomic
    }

    /// Whether every schedule of `self` is also a schedule of `other`.
    pub fn is_within(self, other: SchedulerClass) -> bool {
        use SchedulerClass::*;
        self == other
            || other == Asynch
            || match self {
                Fsynch | RoundRobin => matches!(other, Ssynch | LcAtomic | CmAtomic | MAtomic),
                Ssynch => matches!(other, LcAtomic | CmAtomic | MAtomic),
                CmAtomic => other == MAtomic,
                _ => false,
            }
    }
}

impl fmt::Display for SchedulerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerClass {
    type Err = EngineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_").to_ascii_uppercase();
        let norm = match norm.as_str() {
            "ROUND_ROBIN" => "ROUNDROBIN".to_string(),
            "LC" => "LC_ATOMIC".to_string(),
            "CM" => "CM_ATOMIC".to_string(),
            "M" => "M_ATOMIC".to_string(),
            _ => norm,
        };
        SchedulerClass::ALL
            .into_iter()
            .find(|c| c.name() == norm)
            .ok_or_else(|| EngineError::UnknownKind(format!("scheduler {s:?}")))
    }
}

/// The rule a schedule broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum Constraint {
    LookComputeSplit,
    ComputeMoveSplit,
    MoveSplit,
    LookDuringLookCompute { other: RobotId },
    LookDuringComputeMove { other: RobotId },
    LookDuringMove { other: RobotId },
    PartialRound,
    RoundRobinOrder,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::LookComputeSplit => write!(f, "Look and Compute at different times"),
            Constraint::ComputeMoveSplit => {
                write!(f, "Compute, MoveBegin and MoveEnd at different times")
            }
            Constraint::MoveSplit => write!(f, "MoveBegin and MoveEnd at different times"),
            Constraint::LookDuringLookCompute { other } => {
                write!(f, "Look between robot {other}'s Look and Compute")
            }
            Constraint::LookDuringComputeMove { other } => {
                write!(f, "Look between robot {other}'s Compute and MoveEnd")
            }
            Constraint::LookDuringMove { other } => write!(f, "Look while robot {other} is moving"),
            Constraint::PartialRound => write!(f, "round without every robot's full cycle"),
            Constraint::RoundRobinOrder => write!(f, "round-robin order broken"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub time: RelevantTime,
    pub robot: RobotId,
    pub constraint: Constraint,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={} robot {}: {}",
            self.time, self.robot, self.constraint
        )
    }
}

/// Incremental checker for one scheduler class, fed one relevant time at a
/// time.
#[derive(Debug, Clone)]
pub struct ScheduleChecker {
    class: SchedulerClass,
    last: Vec<Option<EventKind>>,
    rr_next: RobotId,
}

impl ScheduleChecker {
    pub fn new(class: SchedulerClass, n: usize) -> Self {
        ScheduleChecker {
            class,
            last: vec![None; n],
            rr_next: 0,
        }
    }

    fn stage(&self, r: RobotId) -> Option<EventKind> {
        match self.last[r] {
            None | Some(EventKind::MoveEnd) => None,
            k => k,
        }
    }

    pub fn check_time(
        &mut self,
        time: RelevantTime,
        ops: &[(RobotId, EventKind)],
    ) -> Vec<Violation> {
        let n = self.last.len();
        let class = self.class;
        let mut out = Vec::new();
        let did = |r: RobotId, k: EventKind| ops.iter().any(|&(q, j)| q == r && j == k);
        let mut v = |robot, constraint| {
            out.push(Violation {
                time,
                robot,
                constraint,
            })
        };

        for &(r, k) in ops.iter().filter(|(_, k)| *k == EventKind::Look) {
            debug_assert_eq!(k, EventKind::Look);
            for q in (0..n).filter(|q| *q != r) {
                match self.stage(q) {
                    Some(EventKind::Look) if class.lc_rules() && !did(q, EventKind::Compute) => {
                        v(r, Constraint::LookDuringLookCompute { other: q })
                    }
                    Some(EventKind::Compute) if class.cm_rules() && !did(q, EventKind::MoveEnd) => {
                        v(r, Constraint::LookDuringComputeMove { other: q })
                    }
                    Some(EventKind::MoveBegin)
                        if class.m_rules() && !did(q, EventKind::MoveEnd) =>
                    {
                        if class.cm_rules() {
                            v(r, Constraint::LookDuringComputeMove { other: q });
                        } else {
                            v(r, Constraint::LookDuringMove { other: q });
                        }
                    }
                    _ => {}
                }
            }
        }
        for &(r, k) in ops {
            match k {
                EventKind::Look if class.lc_rules() && !did(r, EventKind::Compute) => {
                    v(r, Constraint::LookComputeSplit)
                }
                EventKind::Compute
                    if class.cm_rules()
                        && !(did(r, EventKind::MoveBegin) && did(r, EventKind::MoveEnd)) =>
                {
                    v(r, Constraint::ComputeMoveSplit)
                }
                EventKind::MoveBegin if class.m_rules() && !did(r, EventKind::MoveEnd) => {
                    v(r, Constraint::MoveSplit)
                }
                _ => {}
            }
        }
        let active: Vec<RobotId> = {
            let mut a: Vec<RobotId> = ops.iter().map(|o| o.0).collect();
            a.sort_unstable();
            a.dedup();
            a
        };
        let full = |r: RobotId| {
            [
                EventKind::Look,
                EventKind::Compute,
                EventKind::MoveBegin,
                EventKind::MoveEnd,
            ]
            .iter()
            .all(|k| did(r, *k))
        };
        match class {
            SchedulerClass::Fsynch => {
                for r in (0..n).filter(|r| !full(*r)) {
                    v(r, Constraint::PartialRound);
                }
            }
            SchedulerClass::RoundRobin => {
                if active != [self.rr_next] || !full(self.rr_next) {
                    v(self.rr_next, Constraint::RoundRobinOrder);
                }
                self.rr_next = (self.rr_next + 1) % n;
            }
            _ => {}
        }
        for &(r, k) in ops {
            self.last[r] = Some(k);
        }
        out
    }
}

/// All class violations in a trace; empty when the schedule is admissible.
pub fn validate_schedule(trace: &Trace, class: SchedulerClass) -> Vec<Violation> {
    let mut checker = ScheduleChecker::new(class, trace.n());
    let mut out = Vec::new();
    let events = trace.events();
    let mut i = 0;
    while i < events.len() {
        let t = events[i].time;
        let mut ops = Vec::new();
        while i < events.len() && events[i].time == t {
            ops.push((events[i].robot, events[i].kind));
            i += 1;
        }
        out.extend(checker.check_time(t, &ops));
    }
    out
}

/// Orientation and scale of a Look's frame; the origin is always the
/// observer's exposed position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub rotation: f64,
    pub unit: f64,
    pub handedness: Handedness,
}

impl FrameSpec {
    pub const IDENTITY: FrameSpec = FrameSpec {
        rotation: 0.0,
        unit: 1.0,
        handedness: Handedness::Ccw,
    };

    /// Rotation uniform in [0, 2π), unit log-uniform in [2^-4, 2^4].
    pub fn random<R: Rng>(rng: &mut R, chirality: bool) -> Self {
        let rotation = rng.gen_range(0.0..TAU);
        let unit = 2f64.powf(rng.gen_range(-4.0..=4.0));
        let handedness = if chirality || rng.gen_bool(0.5) {
            Handedness::Ccw
        } else {
            Handedness::Cw
        };
        FrameSpec {
            rotation,
            unit,
            handedness,
        }
    }

    pub fn with_unit(self, unit: f64) -> Self {
        FrameSpec { unit, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Look { robot: RobotId, frame: FrameSpec },
    Compute(RobotId),
    MoveBegin(RobotId),
    MoveEnd(RobotId),
}

impl Op {
    pub fn robot(&self) -> RobotId {
        match *self {
            Op::Look { robot, .. }
            | Op::Compute(robot)
            | Op::MoveBegin(robot)
            | Op::MoveEnd(robot) => robot,
        }
    }

    pub fn kind(&self) -> EventKind {
        match self {
            Op::Look { .. } => EventKind::Look,
            Op::Compute(_) => EventKind::Compute,
            Op::MoveBegin(_) => EventKind::MoveBegin,
            Op::MoveEnd(_) => EventKind::MoveEnd,
        }
    }
}

/// The operations fired at one relevant time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Step {
    pub ops: Vec<Op>,
    /// Fractions of their moves at which in-transit robots are shown to
    /// this time's Looks.
    pub progress: Vec<(RobotId, f64)>,
}

impl Step {
    pub fn new() -> Self {
        Step::default()
    }

    pub fn look(mut self, robot: RobotId, frame: FrameSpec) -> Self {
        self.ops.push(Op::Look { robot, frame });
        self
    }

    pub fn compute(mut self, robot: RobotId) -> Self {
        self.ops.push(Op::Compute(robot));
        self
    }

    pub fn move_begin(mut self, robot: RobotId) -> Self {
        self.ops.push(Op::MoveBegin(robot));
        self
    }

    pub fn move_end(mut self, robot: RobotId) -> Self {
        self.ops.push(Op::MoveEnd(robot));
        self
    }

    /// Both halves of a move.
    pub fn do_move(self, robot: RobotId) -> Self {
        self.move_begin(robot).move_end(robot)
    }

    /// A whole Look-Compute-Move cycle at this time.
    pub fn cycle(self, robot: RobotId, frame: FrameSpec) -> Self {
        self.look(robot, frame).compute(robot).do_move(robot)
    }

    pub fn show(mut self, robot: RobotId, fraction: f64) -> Self {
        self.progress.push((robot, fraction));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

pub enum Decision {
    Fire(Step),
    Stop,
    Abort(AdversaryError),
}

/// What an adversary sees before choosing the next step.
pub struct EngineView<'a> {
    /// The time the next step will occupy.
    pub time: RelevantTime,
    /// Configuration with everything committed so far exposed.
    pub config: &'a Configuration,
    pub class: SchedulerClass,
    pub algorithm: &'a AlgorithmBinding,
    pub chirality: bool,
    pub trace: &'a Trace,
}

impl EngineView<'_> {
    pub fn n(&self) -> usize {
        self.config.n()
    }

    pub fn stage(&self, r: RobotId) -> Stage {
        self.config.robots[r].stage
    }
}

pub trait Adversary {
    fn name(&self) -> String;
    fn next_step(&mut self, view: &EngineView<'_>) -> Decision;
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("adversary proposed {kind} for robot {robot} at t={time}: {constraint}")]
    AdversaryConstraintViolation {
        time: RelevantTime,
        robot: RobotId,
        kind: EventKind,
        constraint: String,
    },
    #[error("adversary proposed no event at t={time}")]
    Deadlock { time: RelevantTime },
    #[error("algorithm failed for robot {robot} at t={time}: {error}")]
    Algorithm {
        time: RelevantTime,
        robot: RobotId,
        error: AlgoError,
    },
    #[error("adversary gave up: {error}")]
    AdversaryAborted {
        error: AdversaryError,
        trace: Box<Trace>,
    },
    #[error("unknown kind {0}")]
    UnknownKind(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Maximum number of relevant times.
    pub horizon: u64,
    /// Recorded in the trace header.
    pub seed: u64,
    /// All frames share handedness.
    pub chirality: bool,
    /// Colors become visible one relevant time after their Compute.
    /// Turning this off is a fault-injection hook for verifier tests.
    pub color_delay: bool,
}

impl RunConfig {
    pub fn new(horizon: u64, seed: u64) -> Self {
        RunConfig {
            horizon,
            seed,
            chirality: true,
            color_delay: true,
        }
    }
}

/// Run an algorithm from a scenario under an adversary for at most
/// `horizon` relevant times.
pub fn run(
    scenario: &Scenario,
    algorithm: &AlgorithmBinding,
    class: SchedulerClass,
    adversary: &mut dyn Adversary,
    horizon: u64,
) -> Result<Trace, EngineError> {
    run_with(
        scenario,
        algorithm,
        class,
        adversary,
        &RunConfig::new(horizon, 0),
    )
}

pub fn run_with(
    scenario: &Scenario,
    algorithm: &AlgorithmBinding,
    class: SchedulerClass,
    adversary: &mut dyn Adversary,
    cfg: &RunConfig,
) -> Result<Trace, EngineError> {
    scenario.validate()?;
    if let Some(m) = scenario.model {
        if m != algorithm.model {
            return Err(ModelError::Scenario(format!(
                "scenario model {m} but algorithm is {}",
                algorithm.model
            ))
            .into());
        }
    }
    let header = TraceHeader {
        version: TRACE_VERSION,
        n: scenario.n,
        model: algorithm.model,
        scheduler: class,
        chirality: cfg.chirality,
        rigid: true,
        seed: cfg.seed,
        algorithm: algorithm.name.clone(),
        adversary: adversary.name(),
        lights: algorithm.lights.clone(),
        init_positions: scenario.positions.clone(),
        init_lights: scenario.initial_lights(&algorithm.lights)?,
    };
    let mut engine = Engine {
        trace: Trace::new(header)?,
        held: vec![None; scenario.n],
        checker: ScheduleChecker::new(class, scenario.n),
        algorithm,
        cfg,
    };
    for t in 1..=cfg.horizon {
        let mut visible = engine.trace.current().clone();
        visible.promote();
        let decision = adversary.next_step(&EngineView {
            time: t,
            config: &visible,
            class,
            algorithm,
            chirality: cfg.chirality,
            trace: &engine.trace,
        });
        match decision {
            Decision::Stop => break,
            Decision::Abort(error) => {
                return Err(EngineError::AdversaryAborted {
                    error,
                    trace: Box::new(engine.trace),
                })
            }
            Decision::Fire(step) => engine.fire(t, step, visible)?,
        }
    }
    Ok(engine.trace)
}

struct Engine<'a> {
    trace: Trace,
    held: Vec<Option<(Snapshot, LocalFrame)>>,
    checker: ScheduleChecker,
    algorithm: &'a AlgorithmBinding,
    cfg: &'a RunConfig,
}

impl Engine<'_> {
    /// `start` is the current configuration with earlier commits exposed.
    fn fire(
        &mut self,
        t: RelevantTime,
        mut step: Step,
        mut start: Configuration,
    ) -> Result<(), EngineError> {
        if step.is_empty() {
            return Err(EngineError::Deadlock { time: t });
        }
        let n = self.trace.n();
        let reject = |op: &Op, why: &str| EngineError::AdversaryConstraintViolation {
            time: t,
            robot: op.robot(),
            kind: op.kind(),
            constraint: why.to_string(),
        };
        step.ops.sort_by_key(|o| (o.kind(), o.robot()));
        start.time = t;

        // per-robot ops must continue the robot's cycle without gaps
        let mut next: Vec<EventKind> = start.robots.iter().map(|r| r.stage.expected()).collect();
        let mut touched = vec![false; n];
        for op in &step.ops {
            let r = op.robot();
            if r >= n {
                return Err(reject(op, "no such robot"));
            }
            if op.kind() != next[r] || (touched[r] && op.kind() == EventKind::Look) {
                return Err(reject(op, "breaks the robot's Look-Compute-Move order"));
            }
            touched[r] = true;
            next[r] = match op.kind() {
                EventKind::Look => EventKind::Compute,
                EventKind::Compute => EventKind::MoveBegin,
                EventKind::MoveBegin => EventKind::MoveEnd,
                EventKind::MoveEnd => EventKind::Look,
            };
            if let Op::Look { frame, .. } = op {
                if self.cfg.chirality && frame.handedness != Handedness::Ccw {
                    return Err(reject(op, "frame handedness differs under chirality"));
                }
                if !(frame.unit > 0.0 && frame.unit.is_finite() && frame.rotation.is_finite()) {
                    return Err(reject(op, "invalid frame"));
                }
            }
        }
        let has_look = step.ops.iter().any(|o| o.kind() == EventKind::Look);
        for &(r, f) in &step.progress {
            let bad = r >= n
                || !start.in_transit(r)
                || !(0.0..=1.0).contains(&f)
                || f < start.robots[r].progress
                || !has_look
                || step.ops.iter().any(|o| o.robot() == r);
            if bad {
                let op = Op::MoveEnd(r.min(n - 1));
                return Err(reject(
                    &op,
                    "move progress must be shown to a Look of this time",
                ));
            }
        }
        let kinds: Vec<(RobotId, EventKind)> =
            step.ops.iter().map(|o| (o.robot(), o.kind())).collect();
        let mut checker = self.checker.clone();
        if let Some(v) = checker.check_time(t, &kinds).into_iter().next() {
            let op = step
                .ops
                .iter()
                .find(|o| o.robot() == v.robot)
                .copied()
                .unwrap_or(Op::Compute(v.robot));
            return Err(reject(&op, &v.constraint.to_string()));
        }
        self.checker = checker;

        start.apply_progress(&step.progress);
        let looking: Vec<RobotId> = step
            .ops
            .iter()
            .filter(|o| o.kind() == EventKind::Look)
            .map(|o| o.robot())
            .collect();

        // Computes of robots that looked earlier do not depend on this
        // time's Looks, so they can be evaluated first.
        let mut results: Vec<Option<(crate::geometry::Point, crate::model::LightTuple)>> =
            vec![None; n];
        for op in step
            .ops
            .iter()
            .filter(|o| o.kind() == EventKind::Compute && !looking.contains(&o.robot()))
        {
            results[op.robot()] = Some(self.compute(t, op.robot(), &start)?);
        }
        let mut observed = Cow::Borrowed(&start);
        if !self.cfg.color_delay {
            for (r, res) in results.iter().enumerate() {
                if let Some((_, l)) = res {
                    observed.to_mut().robots[r].pending_light = Some(l.clone());
                }
            }
        }
        let early = !self.cfg.color_delay;
        let snap = observed.digest_with(early);
        let mut events = Vec::with_capacity(step.ops.len());
        for op in &step.ops {
            if let Op::Look { robot, frame } = *op {
                let lf = LocalFrame::new(
                    start.exposed_pos(robot),
                    frame.rotation,
                    frame.unit,
                    frame.handedness,
                )
                .expect("frame checked above");
                let s = build_snapshot_with(&observed, robot, &lf, self.algorithm.model, early);
                self.held[robot] = Some((s, lf));
                let mut e = CycleEvent::new(
                    t,
                    robot,
                    EventKind::Look,
                    start.robots[robot].pos,
                    start.robots[robot].light.clone(),
                );
                e.frame = Some(lf);
                e.snap = Some(snap);
                e.transit = step.progress.clone();
                events.push(e);
            }
        }
        for op in step
            .ops
            .iter()
            .filter(|o| o.kind() == EventKind::Compute && looking.contains(&o.robot()))
        {
            results[op.robot()] = Some(self.compute(t, op.robot(), &start)?);
        }
        for op in &step.ops {
            let r = op.robot();
            let rs = &start.robots[r];
            match op.kind() {
                EventKind::Look => {}
                EventKind::Compute => {
                    let (dest, light) = results[r].clone().expect("computed above");
                    events.push(
                        CycleEvent::new(t, r, EventKind::Compute, rs.pos, light).with_dest(dest),
                    );
                }
                EventKind::MoveBegin | EventKind::MoveEnd => {
                    let dest = match (&results[r], rs.stage) {
                        (Some((d, _)), _) => *d,
                        (None, Stage::Computed { dest }) | (None, Stage::Moving { dest, .. }) => {
                            dest
                        }
                        _ => unreachable!("order checked above"),
                    };
                    let light = results[r]
                        .as_ref()
                        .map_or_else(|| start.latest_light(r).clone(), |x| x.1.clone());
                    let pos = if op.kind() == EventKind::MoveEnd {
                        dest
                    } else {
                        rs.pos
                    };
                    events.push(CycleEvent::new(t, r, op.kind(), pos, light).with_dest(dest));
                }
            }
        }
        for e in events {
            self.trace.append_event(e)?;
        }
        Ok(())
    }

    fn compute(
        &mut self,
        t: RelevantTime,
        robot: RobotId,
        start: &Configuration,
    ) -> Result<(crate::geometry::Point, crate::model::LightTuple), EngineError> {
        let (snapshot, frame) = self.held[robot].take().expect("Compute follows a Look");
        let action = self
            .algorithm
            .compute(&snapshot)
            .map_err(|error| EngineError::Algorithm {
                time: t,
                robot,
                error,
            })?;
        let light = action.light.apply(start.latest_light(robot));
        if !self.algorithm.lights.contains(&light) {
            return Err(EngineError::Algorithm {
                time: t,
                robot,
                error: AlgoError::Other(format!("light {light:?} outside the declaration")),
            });
        }
        Ok((frame.to_global(action.dest), light))
    }
}

/// Frame choice for generic adversaries.
#[derive(Debug, Clone, PartialEq)]
pub enum Disorientation {
    /// A fresh random frame at every Look.
    Variable,
    /// One random frame per robot for the whole run.
    Fixed,
    /// Every frame is the identity orientation and unit.
    Aligned,
}

/// Seeded random scheduler valid for any class. Each step activates a
/// random subset of robots; a robot that has missed `2n` Looks of others is
/// given priority until it looks again, so every window of `4n` Looks
/// contains every robot.
pub struct RandomFair {
    rng: ChaCha8Rng,
    frames: Disorientation,
    pinned: Vec<FrameSpec>,
    starving: Vec<usize>,
    rr_next: RobotId,
}

impl RandomFair {
    pub fn new(seed: u64, frames: Disorientation) -> Self {
        RandomFair {
            rng: ChaCha8Rng::seed_from_u64(seed),
            frames,
            pinned: Vec::new(),
            starving: Vec::new(),
            rr_next: 0,
        }
    }

    fn frame(&mut self, r: RobotId, chirality: bool) -> FrameSpec {
        match self.frames {
            Disorientation::Variable => FrameSpec::random(&mut self.rng, chirality),
            Disorientation::Aligned => FrameSpec::IDENTITY,
            Disorientation::Fixed => {
                while self.pinned.len() <= r {
                    let f = FrameSpec::random(&mut self.rng, chirality);
                    self.pinned.push(f);
                }
                self.pinned[r]
            }
        }
    }

    /// Ops advancing robot `r` from `stage` under `class`.
    fn advance(
        &mut self,
        step: &mut Step,
        r: RobotId,
        stage: Stage,
        class: SchedulerClass,
        chirality: bool,
    ) {
        use EventKind::*;
        let mut kind = stage.expected();
        loop {
            match kind {
                Look => {
                    let f = self.frame(r, chirality);
                    step.ops.push(Op::Look { robot: r, frame: f });
                }
                Compute => step.ops.push(Op::Compute(r)),
                MoveBegin => step.ops.push(Op::MoveBegin(r)),
                MoveEnd => {
                    step.ops.push(Op::MoveEnd(r));
                    return;
                }
            }
            let must_continue = match kind {
                Look => class.lc_rules(),
                Compute => class.cm_rules(),
                MoveBegin => class.m_rules(),
                MoveEnd => false,
            };
            if !must_continue && !self.rng.gen_bool(0.35) {
                return;
            }
            kind = match kind {
                Look => Compute,
                Compute => MoveBegin,
                _ => MoveEnd,
            };
        }
    }
}

impl Adversary for RandomFair {
    fn name(&self) -> String {
        "uniform-random-fair".into()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        let n = view.n();
        if self.starving.len() != n {
            self.starving = vec![0; n];
        }
        let class = view.class;
        let mut step = Step::new();
        let cycle_all = |me: &mut Self, step: &mut Step, rs: &[RobotId]| {
            for &r in rs {
                let f = me.frame(r, view.chirality);
                *step = std::mem::take(step).cycle(r, f);
            }
        };
        match class {
            SchedulerClass::Fsynch => cycle_all(self, &mut step, &(0..n).collect::<Vec<_>>()),
            SchedulerClass::RoundRobin => {
                let r = self.rr_next;
                self.rr_next = (r + 1) % n;
                cycle_all(self, &mut step, &[r]);
            }
            _ => {
                let hungry: Vec<RobotId> = (0..n).filter(|r| self.starving[*r] >= 2 * n).collect();
                let mut chosen: Vec<RobotId> = if hungry.is_empty() {
                    (0..n).filter(|_| self.rng.gen_bool(0.5)).collect()
                } else {
                    // let only the starving robots and non-Look ops proceed
                    let mut c = hungry.clone();
                    c.extend(
                        (0..n).filter(|r| !hungry.contains(r) && view.stage(*r) != Stage::Idle),
                    );
                    c
                };
                if chosen.is_empty() {
                    chosen.push(self.rng.gen_range(0..n));
                }
                // A Look must not land inside another robot's atomic window.
                let busy = |r: RobotId| match view.stage(r) {
                    Stage::Looked => class.lc_rules(),
                    Stage::Computed { .. } => class.cm_rules(),
                    Stage::Moving { .. } => class.m_rules(),
                    Stage::Idle => false,
                };
                if class == SchedulerClass::Ssynch {
                    cycle_all(self, &mut step, &chosen);
                } else {
                    for &r in &chosen {
                        let stage = view.stage(r);
                        if stage == Stage::Idle
                            && (0..n).any(|q| q != r && busy(q) && !chosen.contains(&q))
                        {
                            continue;
                        }
                        self.advance(&mut step, r, stage, class, view.chirality);
                    }
                    if step.is_empty() {
                        // every chosen robot was blocked; finish a pending cycle instead
                        let r = (0..n)
                            .find(|r| view.stage(*r) != Stage::Idle)
                            .unwrap_or(chosen[0]);
                        self.advance(&mut step, r, view.stage(r), class, view.chirality);
                    }
                }
                if matches!(class, SchedulerClass::Asynch | SchedulerClass::LcAtomic)
                    && step.ops.iter().any(|o| o.kind() == EventKind::Look)
                {
                    for r in 0..n {
                        if let Stage::Moving { .. } = view.stage(r) {
                            if !step.ops.iter().any(|o| o.robot() == r) && self.rng.gen_bool(0.5) {
                                let cur = view.config.robots[r].progress;
                                let f = cur + (1.0 - cur) * self.rng.gen_range(0.0..1.0);
                                step.progress.push((r, f));
                            }
                        }
                    }
                }
            }
        }
        count_missed_looks(&mut self.starving, &step);
        Decision::Fire(step)
    }
}

fn count_missed_looks(starving: &mut [usize], step: &Step) {
    let lookers: Vec<RobotId> = step
        .ops
        .iter()
        .filter(|o| o.kind() == EventKind::Look)
        .map(|o| o.robot())
        .collect();
    for (r, s) in starving.iter_mut().enumerate() {
        if lookers.contains(&r) {
            *s = 0;
        } else {
            *s += lookers.len();
        }
    }
}

/// One robot per time, full cycles, in index order.
pub struct RoundRobinAdversary {
    rng: ChaCha8Rng,
    next: RobotId,
    frames: Disorientation,
}

impl RoundRobinAdversary {
    pub fn new(seed: u64, frames: Disorientation) -> Self {
        RoundRobinAdversary {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: 0,
            frames,
        }
    }
}

impl Adversary for RoundRobinAdversary {
    fn name(&self) -> String {
        "round-robin".into()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        let r = self.next;
        self.next = (r + 1) % view.n();
        let f = match self.frames {
            Disorientation::Aligned => FrameSpec::IDENTITY,
            _ => FrameSpec::random(&mut self.rng, view.chirality),
        };
        Decision::Fire(Step::new().cycle(r, f))
    }
}

/// Every robot performs a full cycle at every time.
pub struct FsynchAdversary {
    rng: ChaCha8Rng,
    frames: Disorientation,
}

impl FsynchAdversary {
    pub fn new(seed: u64, frames: Disorientation) -> Self {
        FsynchAdversary {
            rng: ChaCha8Rng::seed_from_u64(seed),
            frames,
        }
    }
}

impl Adversary for FsynchAdversary {
    fn name(&self) -> String {
        "fsynch".into()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        let mut step = Step::new();
        for r in 0..view.n() {
            let f = match self.frames {
                Disorientation::Aligned => FrameSpec::IDENTITY,
                _ => FrameSpec::random(&mut self.rng, view.chirality),
            };
            step = step.cycle(r, f);
        }
        Decision::Fire(step)
    }
}

/// Stretches one robot's move across `k` full cycles of the others, rotating
/// the delayed robot. Valid under ASYNCH and LC_ATOMIC.
pub struct MaxDelay {
    rng: ChaCha8Rng,
    k: usize,
    victim: RobotId,
    phase: usize,
}

impl MaxDelay {
    pub fn new(seed: u64, k: usize) -> Self {
        MaxDelay {
            rng: ChaCha8Rng::seed_from_u64(seed),
            k: k.max(1),
            victim: 0,
            phase: 0,
        }
    }
}

impl Adversary for MaxDelay {
    fn name(&self) -> String {
        format!("max-delay:{}", self.k)
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        if !matches!(
            view.class,
            SchedulerClass::Asynch | SchedulerClass::LcAtomic
        ) {
            return Decision::Abort(AdversaryError::Incompatible(format!(
                "max-delay cannot run under {}",
                view.class
            )));
        }
        let n = view.n();
        let f = FrameSpec::random(&mut self.rng, view.chirality);
        let v = self.victim;
        let step = if self.phase == 0 {
            Step::new().look(v, f).compute(v).move_begin(v)
        } else if self.phase <= self.k {
            let others: Vec<RobotId> = (0..n).filter(|r| *r != v).collect();
            let r = others[(self.phase - 1) % others.len()];
            Step::new().cycle(r, f)
        } else {
            Step::new().move_end(v)
        };
        self.phase += 1;
        if self.phase > self.k + 1 {
            self.phase = 0;
            self.victim = (v + 1) % n;
        }
        Decision::Fire(step)
    }
}

pub const BUILTIN_KINDS: [&str; 4] = ["uniform-random-fair", "round-robin", "fsynch", "max-delay"];

/// Generic strategies by name.
pub fn builtin_adversaries(kind: &str, seed: u64) -> Result<Box<dyn Adversary>, EngineError> {
    Ok(match kind {
        "uniform-random-fair" => Box::new(RandomFair::new(seed, Disorientation::Variable)),
        "uniform-random-fair-fixed" => Box::new(RandomFair::new(seed, Disorientation::Fixed)),
        "round-robin" => Box::new(RoundRobinAdversary::new(seed, Disorientation::Variable)),
        "fsynch" => Box::new(FsynchAdversary::new(seed, Disorientation::Variable)),
        "max-delay" => Box::new(MaxDelay::new(seed, 3)),
        other => return Err(EngineError::UnknownKind(format!("adversary {other:?}"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{self, registry};
    use crate::geometry::Point;
    use crate::model::LightTuple;
    use crate::trace::{fairness_windows, TraceHeader};

    fn pair() -> Scenario {
        Scenario::new(vec![Point::ORIGIN, Point::new(1.0, 0.0)])
    }

    fn triangle() -> Scenario {
        Scenario::new(vec![
            Point::ORIGIN,
            Point::new(1.0, 0.0),
            Point::new(0.3, 0.9),
        ])
    }

    #[test]
    fn scheduler_names_round_trip() {
        for c in SchedulerClass::ALL {
            assert_eq!(c.name().parse::<SchedulerClass>().unwrap(), c);
            assert_eq!(
                serde_json::to_string(&c).unwrap(),
                format!("\"{}\"", c.name())
            );
        }
        assert_eq!(
            "lc-atomic".parse::<SchedulerClass>().unwrap(),
            SchedulerClass::LcAtomic
        );
        assert!("sometimes".parse::<SchedulerClass>().is_err());
    }

    #[test]
    fn fsynch_rounds_fire_everything_at_once() {
        let algo = registry("half_move").unwrap();
        let mut adv = FsynchAdversary::new(1, Disorientation::Variable);
        let t = run(&pair(), &algo, SchedulerClass::Fsynch, &mut adv, 3).unwrap();
        assert_eq!(t.len(), 24);
        for time in 1..=3 {
            assert_eq!(t.events().iter().filter(|e| e.time == time).count(), 8);
        }
    }

    #[test]
    fn round_robin_order() {
        let algo = registry("color_cycler").unwrap();
        let mut adv = RoundRobinAdversary::new(3, Disorientation::Variable);
        let t = run(&triangle(), &algo, SchedulerClass::RoundRobin, &mut adv, 6).unwrap();
        let looks: Vec<usize> = t
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::Look)
            .map(|e| e.robot)
            .collect();
        assert_eq!(looks, vec![0, 1, 2, 0, 1, 2]);
        assert!(validate_schedule(&t, SchedulerClass::RoundRobin).is_empty());
    }

    struct Script(Vec<Step>);

    impl Adversary for Script {
        fn name(&self) -> String {
            "script".into()
        }
        fn next_step(&mut self, _: &EngineView<'_>) -> Decision {
            if self.0.is_empty() {
                Decision::Stop
            } else {
                Decision::Fire(self.0.remove(0))
            }
        }
    }

    #[test]
    fn look_during_move_is_rejected_under_m_atomic() {
        let algo = registry("half_move").unwrap();
        let f = FrameSpec::IDENTITY;
        let mut adv = Script(vec![
            Step::new().look(1, f).compute(1).move_begin(1),
            Step::new().look(0, f),
        ]);
        let err = run(&pair(), &algo, SchedulerClass::Asynch, &mut adv, 5);
        assert!(err.is_ok());
        let mut adv = Script(vec![
            Step::new().look(1, f).compute(1).do_move(1),
            Step::new().look(0, f),
        ]);
        assert!(run(&pair(), &algo, SchedulerClass::MAtomic, &mut adv, 5).is_ok());
        let mut adv = Script(vec![Step::new().look(1, f).compute(1).move_begin(1)]);
        match run(&pair(), &algo, SchedulerClass::MAtomic, &mut adv, 5) {
            Err(EngineError::AdversaryConstraintViolation { .. }) => {}
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn empty_step_is_deadlock() {
        let algo = registry("half_move").unwrap();
        let mut adv = Script(vec![Step::new()]);
        assert!(matches!(
            run(&pair(), &algo, SchedulerClass::Asynch, &mut adv, 5),
            Err(EngineError::Deadlock { time: 1 })
        ));
    }

    #[test]
    fn chirality_rejects_mirrored_frames() {
        let algo = registry("half_move").unwrap();
        let f = FrameSpec {
            handedness: Handedness::Cw,
            ..FrameSpec::IDENTITY
        };
        let mut adv = Script(vec![Step::new().cycle(0, f)]);
        assert!(matches!(
            run(&pair(), &algo, SchedulerClass::Asynch, &mut adv, 5),
            Err(EngineError::AdversaryConstraintViolation { .. })
        ));
    }

    fn hand_trace(events: &[(u64, usize, EventKind)]) -> Trace {
        let header = TraceHeader {
            version: TRACE_VERSION,
            n: 2,
            model: crate::model::ModelClass::Oblot,
            scheduler: SchedulerClass::Asynch,
            chirality: true,
            rigid: true,
            seed: 0,
            algorithm: String::new(),
            adversary: String::new(),
            lights: Default::default(),
            init_positions: vec![Point::ORIGIN, Point::new(1.0, 0.0)],
            init_lights: vec![LightTuple::default(); 2],
        };
        let mut t = Trace::new(header).unwrap();
        for &(time, r, k) in events {
            let mut e = CycleEvent::new(time, r, k, Point::ORIGIN, LightTuple::default());
            if k != EventKind::Look {
                e.dest = Some(Point::new(r as f64, 0.0));
            }
            t.append_event(e).unwrap();
        }
        t
    }

    #[test]
    fn look_inside_a_move_window() {
        use EventKind::*;
        let t = hand_trace(&[
            (1, 1, Look),
            (1, 1, Compute),
            (3, 1, MoveBegin),
            (4, 0, Look),
            (4, 0, Compute),
            (6, 1, MoveEnd),
        ]);
        for c in [
            SchedulerClass::MAtomic,
            SchedulerClass::CmAtomic,
            SchedulerClass::Ssynch,
        ] {
            assert!(!validate_schedule(&t, c).is_empty(), "{c}");
        }
        assert!(validate_schedule(&t, SchedulerClass::Asynch).is_empty());
        assert!(validate_schedule(&t, SchedulerClass::LcAtomic).is_empty());
        let m = validate_schedule(&t, SchedulerClass::MAtomic);
        assert!(m
            .iter()
            .any(|v| v.constraint == Constraint::LookDuringMove { other: 1 }));
        assert!(m.iter().any(|v| v.constraint == Constraint::MoveSplit));
    }

    #[test]
    fn ssynch_trace_is_lc_and_cm_valid() {
        let algo = registry("half_move").unwrap();
        let mut adv = RandomFair::new(5, Disorientation::Variable);
        let t = run(&pair(), &algo, SchedulerClass::Ssynch, &mut adv, 50).unwrap();
        for c in [
            SchedulerClass::Ssynch,
            SchedulerClass::LcAtomic,
            SchedulerClass::CmAtomic,
            SchedulerClass::Asynch,
        ] {
            assert!(validate_schedule(&t, c).is_empty(), "{c}");
        }
    }

    #[test]
    fn fsynch_trace_valid_everywhere_but_round_robin() {
        let algo = registry("color_cycler").unwrap();
        let mut adv = FsynchAdversary::new(2, Disorientation::Variable);
        let t = run(&triangle(), &algo, SchedulerClass::Fsynch, &mut adv, 10).unwrap();
        for c in SchedulerClass::ALL {
            assert_eq!(
                validate_schedule(&t, c).is_empty(),
                c != SchedulerClass::RoundRobin,
                "{c}"
            );
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let algo = registry("half_move").unwrap();
        let go = || {
            let mut adv = builtin_adversaries("uniform-random-fair", 1).unwrap();
            let cfg = RunConfig::new(200, 1);
            run_with(&pair(), &algo, SchedulerClass::Asynch, adv.as_mut(), &cfg)
                .unwrap()
                .serialize()
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn max_delay_stretches_a_move() {
        let algo = registry("half_move").unwrap();
        let mut adv = MaxDelay::new(4, 3);
        let t = run(&pair(), &algo, SchedulerClass::Asynch, &mut adv, 20).unwrap();
        let mb = t
            .events()
            .iter()
            .find(|e| e.kind == EventKind::MoveBegin && e.robot == 0)
            .unwrap()
            .time;
        let me = t
            .events()
            .iter()
            .find(|e| e.kind == EventKind::MoveEnd && e.robot == 0)
            .unwrap()
            .time;
        assert_eq!(me - mb, 4);
        let others = t
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::Look && e.robot != 0 && e.time > mb && e.time < me)
            .count();
        assert_eq!(others, 3);
        assert!(validate_schedule(&t, SchedulerClass::Asynch).is_empty());
        assert!(validate_schedule(&t, SchedulerClass::LcAtomic).is_empty());
        assert!(!validate_schedule(&t, SchedulerClass::MAtomic).is_empty());
    }

    #[test]
    fn fsynch_kind_runs_under_asynch() {
        let algo = registry("half_move").unwrap();
        let mut adv = builtin_adversaries("fsynch", 9).unwrap();
        let t = run(&pair(), &algo, SchedulerClass::Asynch, adv.as_mut(), 5).unwrap();
        assert!(validate_schedule(&t, SchedulerClass::Fsynch).is_empty());
    }

    #[test]
    fn unknown_kind() {
        assert!(matches!(
            builtin_adversaries("lazy", 0),
            Err(EngineError::UnknownKind(_))
        ));
    }

    #[test]
    fn random_fair_respects_default_window() {
        let algo = algorithms::registry("color_cycler").unwrap();
        for class in SchedulerClass::ALL {
            for seed in 0..5 {
                let mut adv = RandomFair::new(seed, Disorientation::Variable);
                let t = run(&triangle(), &algo, class, &mut adv, 300).unwrap();
                assert!(fairness_windows(&t, 12).is_fair(), "{class} seed {seed}");
            }
        }
    }

    #[test]
    fn nesting_order() {
        use SchedulerClass::*;
        assert!(
            Fsynch.is_within(Ssynch) && Ssynch.is_within(LcAtomic) && LcAtomic.is_within(Asynch)
        );
        assert!(
            Ssynch.is_within(CmAtomic) && CmAtomic.is_within(MAtomic) && MAtomic.is_within(Asynch)
        );
        assert!(!LcAtomic.is_within(MAtomic) && !MAtomic.is_within(CmAtomic));
    }
}
