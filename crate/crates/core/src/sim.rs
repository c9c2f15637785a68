//! SIM(A): runs an FCOM algorithm under ASYNCH so that its executions form a
//! CM-atomic schedule, plus trace verifiers for that guarantee.
//!
//! Each robot's light is the payload light followed by three protocol
//! sub-lights: `phase` (1, 2, 3, m), `state` (W, M, F) and `suc`, the
//! nonempty set of states last copied from the successor location.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::algorithms::{Action, AlgoError, AlgorithmBinding};
use crate::geometry::{circular_order, Handedness, Point, Ring};
use crate::model::{build_snapshot, LightDecl, LightTuple, ModelClass, Observed, Snapshot};
use crate::trace::{EventKind, RelevantTime, RobotId, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Phase {
    One,
    Two,
    Three,
    M,
}

impl Phase {
    const ALL: [Phase; 4] = [Phase::One, Phase::Two, Phase::Three, Phase::M];

    fn code(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(PHASE_NAMES[*self as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SimState {
    W,
    M,
    F,
}

impl SimState {
    const ALL: [SimState; 3] = [SimState::W, SimState::M, SimState::F];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// A set of [`SimState`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StateSet(u8);

impl StateSet {
    pub const EMPTY: StateSet = StateSet(0);

    pub fn only(s: SimState) -> Self {
        StateSet(s.bit())
    }

    pub fn of(states: &[SimState]) -> Self {
        StateSet(states.iter().fold(0, |m, s| m | s.bit()))
    }

    pub fn insert(&mut self, s: SimState) {
        self.0 |= s.bit();
    }

    pub fn contains(self, s: SimState) -> bool {
        self.0 & s.bit() != 0
    }

    pub fn union(self, o: StateSet) -> Self {
        StateSet(self.0 | o.0)
    }

    pub fn minus(self, o: StateSet) -> Self {
        StateSet(self.0 & !o.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Color index of a nonempty set.
    fn code(self) -> u8 {
        debug_assert!(!self.is_empty());
        self.0 - 1
    }
}

impl fmt::Display for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        let names: Vec<String> = SimState::ALL
            .iter()
            .filter(|s| self.contains(**s))
            .map(|s| format!("{s:?}"))
            .collect();
        f.write_str(&names.join(","))?;
        f.write_str("}")
    }
}

const PHASE_NAMES: [&str; 4] = ["1", "2", "3", "m"];
const STATE_NAMES: [&str; 3] = ["W", "M", "F"];
const SUC_NAMES: [&str; 7] = ["W", "M", "WM", "F", "WF", "MF", "WMF"];

/// The protocol flags of one light.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimFlags {
    pub payload: LightTuple,
    pub phase: Phase,
    pub state: SimState,
    pub suc: StateSet,
}

/// Light declaration of SIM(payload): payload sub-lights, then phase, state
/// and suc.
pub fn sim_lights(payload: &LightDecl) -> LightDecl {
    let mut d = payload.clone();
    d = d
        .with("phase", &PHASE_NAMES)
        .with("state", &STATE_NAMES)
        .with("suc", &SUC_NAMES);
    d
}

/// Split a SIM light into payload and protocol flags.
pub fn decode(l: &LightTuple, payload_len: usize) -> Result<SimFlags, String> {
    if l.0.len() != payload_len + 3 {
        return Err(format!(
            "light has {} sub-lights, expected {}",
            l.0.len(),
            payload_len + 3
        ));
    }
    let phase = *Phase::ALL
        .get(l.get(payload_len) as usize)
        .ok_or("phase out of range")?;
    let state = *SimState::ALL
        .get(l.get(payload_len + 1) as usize)
        .ok_or("state out of range")?;
    let code = l.get(payload_len + 2);
    if code >= 7 {
        return Err("suc state set out of range".into());
    }
    Ok(SimFlags {
        payload: LightTuple(l.0[..payload_len].to_vec()),
        phase,
        state,
        suc: StateSet(code + 1),
    })
}

pub fn encode(f: &SimFlags) -> LightTuple {
    let mut v = f.payload.0.clone();
    v.extend([f.phase.code(), f.state as u8, f.suc.code()]);
    LightTuple(v)
}

/// Fault-injection switches for verifier tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimConfig {
    /// Evaluate the exists-M predicate as false.
    pub disable_exist_m_guard: bool,
}

/// What a robot running SIM reads from its snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SimView {
    /// Every other robot's flags, one entry per distinct light at a location.
    pub others: Vec<(Point, SimFlags)>,
    pub ring: Ring,
    /// Union of the suc sets shown at the predecessor location.
    pub pred_suc_state: StateSet,
    /// States shown by other robots at the observer's location.
    pub state_here: StateSet,
    /// States shown at the successor location.
    pub suc_location_states: StateSet,
}

impl SimView {
    pub fn from_snapshot(s: &Snapshot, payload_len: usize) -> Result<SimView, AlgoError> {
        let mut others = Vec::new();
        for o in &s.others {
            for l in &o.lights {
                let f = decode(l, payload_len).map_err(AlgoError::Other)?;
                others.push((o.pos, f));
            }
        }
        let mut locs: Vec<Point> = s.others.iter().map(|o| o.pos).collect();
        locs.push(Point::ORIGIN);
        let ring = circular_order(&locs, Handedness::Ccw).map_err(|_| AlgoError::MDegenerate)?;
        if ring.len() < 2 {
            return Err(AlgoError::MDegenerate);
        }
        let x = ring
            .index_of(Point::ORIGIN)
            .expect("observer location is in the ring");
        let pred = ring.locations()[ring.pred(x)];
        let suc = ring.locations()[ring.suc(x)];
        let states_at = |p: Point| {
            others
                .iter()
                .filter(|(q, _)| *q == p)
                .fold(StateSet::EMPTY, |acc, (_, f)| {
                    acc.union(StateSet::only(f.state))
                })
        };
        let pred_suc_state = others
            .iter()
            .filter(|(q, _)| *q == pred)
            .fold(StateSet::EMPTY, |acc, (_, f)| acc.union(f.suc));
        let state_here = states_at(Point::ORIGIN);
        let suc_location_states = states_at(suc);
        Ok(SimView {
            others,
            ring,
            pred_suc_state,
            state_here,
            suc_location_states,
        })
    }

    /// The observer's own state as reconstructed from its neighbours.
    pub fn own_state(&self) -> StateSet {
        own_state(self.pred_suc_state, self.state_here)
    }
}

pub fn own_state(pred_suc_state: StateSet, state_here: StateSet) -> StateSet {
    pred_suc_state.minus(state_here)
}

/// The protocol predicates, evaluated over the other robots.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicates<'a> {
    view: &'a SimView,
    cfg: SimConfig,
}

impl Predicates<'_> {
    pub fn is_all_phases(&self, p: Phase) -> bool {
        self.view.others.iter().all(|(_, f)| f.phase == p)
    }

    pub fn is_phases_mixed(&self, p: Phase, q: Phase) -> bool {
        self.view
            .others
            .iter()
            .all(|(_, f)| f.phase == p || f.phase == q)
            && !self.is_all_phases(p)
            && !self.is_all_phases(q)
    }

    pub fn is_exist_m(&self) -> bool {
        !self.cfg.disable_exist_m_guard
            && self
                .view
                .others
                .iter()
                .any(|(_, f)| f.state == SimState::M || f.suc.contains(SimState::M))
    }

    pub fn is_all(&self, s: SimState) -> bool {
        self.view.others.iter().all(|(_, f)| f.state == s)
            && self.view.own_state() == StateSet::only(s)
    }

    fn any_state(&self, s: SimState) -> bool {
        self.view.others.iter().any(|(_, f)| f.state == s)
    }
}

pub fn sim_predicates(view: &SimView, cfg: SimConfig) -> Predicates<'_> {
    Predicates { view, cfg }
}

/// Flag updates chosen by one Compute; `None` keeps the current value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outcome {
    pub phase: Option<Phase>,
    pub state: Option<SimState>,
    pub suc: Option<StateSet>,
    /// The embedded algorithm's Compute runs.
    pub execute: bool,
}

/// One Compute of the protocol, without the embedded algorithm itself.
pub fn sim_step(view: &SimView, cfg: SimConfig) -> Outcome {
    use Phase::*;
    let p = sim_predicates(view, cfg);
    let mut o = Outcome::default();
    let copy = |o: &mut Outcome| o.suc = Some(view.suc_location_states);
    if p.is_all_phases(One) {
        copy(&mut o);
        o.phase = Some(One);
        if p.is_all(SimState::F) {
            o.phase = Some(M);
        } else if p.any_state(SimState::M) {
            o.phase = Some(Two);
        } else if view.own_state() == StateSet::only(SimState::W) {
            o.execute = true;
            o.state = Some(SimState::M);
        }
    } else if p.is_all_phases(Two) {
        o.phase = Some(Three);
        copy(&mut o);
    } else if p.is_all_phases(Three) {
        copy(&mut o);
        o.phase = Some(Three);
        if p.is_exist_m() {
            if view.own_state() == StateSet::only(SimState::M) {
                o.state = Some(SimState::F);
            }
            copy(&mut o);
        } else {
            o.phase = Some(One);
            copy(&mut o);
        }
    } else if p.is_phases_mixed(One, Two) {
        o.phase = Some(Two);
    } else if p.is_phases_mixed(Two, Three) {
        o.phase = Some(Three);
        copy(&mut o);
    } else if p.is_phases_mixed(One, Three) {
        o.phase = Some(One);
        copy(&mut o);
    } else if p.is_all_phases(M) {
        o.state = Some(SimState::W);
        o.suc = Some(StateSet::only(SimState::W));
        o.phase = Some(if p.any_state(SimState::F) { M } else { One });
    } else if p.is_phases_mixed(One, M) && p.is_all(SimState::F) {
        o.phase = Some(M);
    } else if p.is_phases_mixed(One, M) && p.is_all(SimState::W) {
        o.phase = Some(One);
    }
    o
}

/// The payload's view: positions and payload lights only.
fn payload_snapshot(s: &Snapshot, payload_len: usize) -> Snapshot {
    let others = s
        .others
        .iter()
        .map(|o| {
            let mut lights: Vec<LightTuple> = o
                .lights
                .iter()
                .map(|l| LightTuple(l.0[..payload_len].to_vec()))
                .collect();
            lights.sort();
            lights.dedup();
            Observed { pos: o.pos, lights }
        })
        .collect();
    Snapshot {
        observer: s.observer,
        others,
        own_light: None,
    }
}

/// A full SIM Compute: protocol step plus, when due, the embedded Compute.
pub fn sim_compute(
    s: &Snapshot,
    payload: &AlgorithmBinding,
    cfg: SimConfig,
) -> Result<Action, AlgoError> {
    let k = payload.lights.len();
    let view = SimView::from_snapshot(s, k)?;
    let o = sim_step(&view, cfg);
    let mut action = if o.execute {
        payload.compute(&payload_snapshot(s, k))?
    } else {
        Action::stay()
    };
    if let Some(p) = o.phase {
        action = action.with_color(k, p.code());
    }
    if let Some(st) = o.state {
        action = action.with_color(k + 1, st as u8);
    }
    if let Some(suc) = o.suc {
        action = action.with_color(k + 2, suc.code());
    }
    Ok(action)
}

/// Bind SIM(payload) as an FCOM algorithm.
pub fn sim_wrap(payload: &AlgorithmBinding, cfg: SimConfig) -> Result<AlgorithmBinding, AlgoError> {
    if payload.model != ModelClass::Fcom {
        return Err(AlgoError::Other(format!(
            "SIM needs an FCOM payload, {} is {}",
            payload.name, payload.model
        )));
    }
    let inner = payload.clone();
    Ok(AlgorithmBinding::new(
        format!("sim({})", payload.name),
        ModelClass::Fcom,
        sim_lights(&payload.lights),
        move |s| sim_compute(s, &inner, cfg),
    ))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("not a SIM trace at t={time}, robot {robot}: {reason}")]
    MalformedSimTrace {
        time: RelevantTime,
        robot: RobotId,
        reason: String,
    },
}

/// One run of the embedded algorithm: the Look whose snapshot it used, its
/// Compute, and the MoveEnd of that cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddedInstance {
    pub robot: RobotId,
    pub look: RelevantTime,
    pub compute: RelevantTime,
    pub move_end: Option<RelevantTime>,
    /// Digest of the configuration the Look observed.
    pub snapshot: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AtomicityViolation {
    /// Instance `inner`'s Look fell inside instance `window`'s Compute-to-MoveEnd window.
    LookInsideWindow { inner: usize, window: usize },
    /// A Look recorded a configuration other than the one the trace exposes.
    SnapshotMismatch { time: RelevantTime, robot: RobotId },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddedExecution {
    pub instances: Vec<EmbeddedInstance>,
    pub violations: Vec<AtomicityViolation>,
}

impl EmbeddedExecution {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MegaCycle {
    pub boundary: RelevantTime,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MegaCycleReport {
    pub completed: Vec<MegaCycle>,
    /// Executions since the last boundary.
    pub partial: Vec<usize>,
}

impl MegaCycleReport {
    /// Every robot executed at least once in every completed mega-cycle.
    pub fn all_counts_positive(&self) -> bool {
        self.completed
            .iter()
            .all(|m| m.counts.iter().all(|c| *c >= 1))
    }

    /// At most one robot executed more than once per mega-cycle.
    pub fn at_most_one_repeater(&self) -> bool {
        self.completed
            .iter()
            .all(|m| m.counts.iter().filter(|c| **c > 1).count() <= 1)
    }
}

/// Embedded executions grouped by the phase-1 pass they belong to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Batch {
    pub instances: Vec<usize>,
    /// All Looks at one time with one observed configuration.
    pub same_snapshot: bool,
    pub single_robot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimAnalysis {
    pub execution: EmbeddedExecution,
    pub mega_cycles: MegaCycleReport,
    pub batches: Vec<Batch>,
}

impl SimAnalysis {
    /// Under LC-atomic driving schedules every batch used one snapshot, or
    /// was a single robot re-executing.
    pub fn lc_refinement_holds(&self) -> bool {
        self.batches
            .iter()
            .all(|b| b.same_snapshot || b.single_robot)
    }
}

fn payload_len(trace: &Trace) -> Result<usize, SimError> {
    let subs = &trace.header().lights.subs;
    let k = subs.len().checked_sub(3);
    let names: Vec<&str> = subs.iter().rev().take(3).map(|s| s.name.as_str()).collect();
    match k {
        Some(k) if names == ["suc", "state", "phase"] => Ok(k),
        _ => Err(SimError::MalformedSimTrace {
            time: 0,
            robot: 0,
            reason: "lights lack phase/state/suc".into(),
        }),
    }
}

/// Replay a SIM trace, re-deriving which Computes ran the embedded algorithm
/// from the configuration each Look observed.
pub fn analyze_sim_trace(trace: &Trace) -> Result<SimAnalysis, SimError> {
    let k = payload_len(trace)?;
    let n = trace.n();
    let malformed = |time, robot, reason: String| SimError::MalformedSimTrace {
        time,
        robot,
        reason,
    };
    let mut looked: Vec<Option<(RelevantTime, u64, bool)>> = vec![None; n];
    let mut open: Vec<Option<usize>> = vec![None; n];
    let mut instances: Vec<EmbeddedInstance> = Vec::new();
    let mut violations = Vec::new();
    let mut phase: Vec<Phase> = Vec::with_capacity(n);
    for l in &trace.header().init_lights {
        phase.push(decode(l, k).map_err(|e| malformed(0, 0, e))?.phase);
    }
    let mut completed = Vec::new();
    let mut since = vec![0usize; n];
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut batch_open = false;

    for step in trace.replay() {
        let mut seen = step.before.clone();
        for e in step.events {
            match e.kind {
                EventKind::Look => {
                    seen.apply_progress(&e.transit);
                    let digest = seen.digest();
                    if e.snap.is_some_and(|s| s != digest) {
                        violations.push(AtomicityViolation::SnapshotMismatch {
                            time: e.time,
                            robot: e.robot,
                        });
                    }
                    let frame = e
                        .frame
                        .ok_or_else(|| malformed(e.time, e.robot, "Look without a frame".into()))?;
                    let snap = build_snapshot(&seen, e.robot, &frame, ModelClass::Fcom);
                    let execute = match SimView::from_snapshot(&snap, k) {
                        Ok(view) => sim_step(&view, SimConfig::default()).execute,
                        Err(AlgoError::MDegenerate) => false,
                        Err(err) => return Err(malformed(e.time, e.robot, err.to_string())),
                    };
                    looked[e.robot] = Some((e.time, digest, execute));
                }
                EventKind::Compute => {
                    let flags =
                        decode(&e.light, k).map_err(|err| malformed(e.time, e.robot, err))?;
                    let (look, snapshot, execute) = looked[e.robot]
                        .take()
                        .ok_or_else(|| malformed(e.time, e.robot, "Compute without Look".into()))?;
                    if execute {
                        instances.push(EmbeddedInstance {
                            robot: e.robot,
                            look,
                            compute: e.time,
                            move_end: None,
                            snapshot,
                        });
                        open[e.robot] = Some(instances.len() - 1);
                        since[e.robot] += 1;
                        if !batch_open {
                            batches.push(Vec::new());
                            batch_open = true;
                        }
                        batches
                            .last_mut()
                            .expect("opened above")
                            .push(instances.len() - 1);
                    }
                    if flags.phase == Phase::Three && phase[e.robot] != Phase::Three {
                        batch_open = false;
                    }
                    if flags.phase == Phase::M
                        && phase[e.robot] != Phase::M
                        && since.iter().any(|c| *c > 0)
                    {
                        completed.push(MegaCycle {
                            boundary: e.time,
                            counts: std::mem::replace(&mut since, vec![0; n]),
                        });
                    }
                    phase[e.robot] = flags.phase;
                }
                EventKind::MoveBegin => {}
                EventKind::MoveEnd => {
                    if let Some(i) = open[e.robot].take() {
                        instances[i].move_end = Some(e.time);
                    }
                }
            }
        }
    }

    for (i, a) in instances.iter().enumerate() {
        for (j, w) in instances.iter().enumerate() {
            if i == j || a.robot == w.robot {
                continue;
            }
            let end = w.move_end.unwrap_or(RelevantTime::MAX);
            if a.look > w.compute && a.look <= end {
                violations.push(AtomicityViolation::LookInsideWindow {
                    inner: i,
                    window: j,
                });
            }
        }
    }
    let batches = batches
        .into_iter()
        .map(|ids| {
            let first = &instances[ids[0]];
            let same_snapshot = ids.iter().all(|i| {
                instances[*i].look == first.look && instances[*i].snapshot == first.snapshot
            });
            let single_robot = ids.iter().all(|i| instances[*i].robot == first.robot);
            Batch {
                instances: ids,
                same_snapshot,
                single_robot,
            }
        })
        .collect();
    Ok(SimAnalysis {
        execution: EmbeddedExecution {
            instances,
            violations,
        },
        mega_cycles: MegaCycleReport {
            completed,
            partial: since,
        },
        batches,
    })
}

/// Project the embedded executions and check they form a CM-atomic schedule.
pub fn extract_embedded_execution(trace: &Trace) -> Result<EmbeddedExecution, SimError> {
    Ok(analyze_sim_trace(trace)?.execution)
}

/// Mega-cycle boundaries with per-robot execution counts.
pub fn mega_cycle_report(trace: &Trace) -> Result<MegaCycleReport, SimError> {
    Ok(analyze_sim_trace(trace)?.mega_cycles)
}
