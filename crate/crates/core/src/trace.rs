//! Relevant-time event model: configurations, cycle events, and replayable
//! JSONL traces.
//!
//! Each relevant time hosts a set of simultaneous operations, ordered
//! Look, Compute, MoveBegin, MoveEnd. Colors and positions committed at time
//! `t` sit in pending buffers and become visible at `t + 1`.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::SchedulerClass;
use crate::geometry::{Handedness, LocalFrame, Point};
use crate::model::{LightDecl, LightTuple, ModelClass};

pub type RobotId = usize;
pub type RelevantTime = u64;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("event at time {time} for robot {robot} is out of order")]
    OutOfOrderEvent { time: RelevantTime, robot: RobotId },
    #[error("robot {robot} cannot perform {kind} at time {time} (expected {expected})")]
    PhaseOrderViolation {
        time: RelevantTime,
        robot: RobotId,
        kind: EventKind,
        expected: EventKind,
    },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("invalid event: {0}")]
    InvalidEvent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Look,
    Compute,
    MoveBegin,
    MoveEnd,
}

impl EventKind {
    pub fn code(self) -> &'static str {
        match self {
            EventKind::Look => "L",
            EventKind::Compute => "C",
            EventKind::MoveBegin => "MB",
            EventKind::MoveEnd => "ME",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        Some(match s {
            "L" => EventKind::Look,
            "C" => EventKind::Compute,
            "MB" => EventKind::MoveBegin,
            "ME" => EventKind::MoveEnd,
            _ => return None,
        })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Where a robot is inside its current cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stage {
    Idle,
    Looked,
    Computed { dest: Point },
    Moving { from: Point, dest: Point },
}

impl Stage {
    pub fn expected(&self) -> EventKind {
        match self {
            Stage::Idle => EventKind::Look,
            Stage::Looked => EventKind::Compute,
            Stage::Computed { .. } => EventKind::MoveBegin,
            Stage::Moving { .. } => EventKind::MoveEnd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    /// Committed position; a robot in transit stays here until its MoveEnd.
    pub pos: Point,
    pub light: LightTuple,
    pub pending_light: Option<LightTuple>,
    pub pending_pos: Option<Point>,
    pub stage: Stage,
    /// Fraction of the current move an observer is shown (0 = start point).
    pub progress: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub time: RelevantTime,
    pub robots: Vec<RobotState>,
}

impl Configuration {
    pub fn new(positions: &[Point], lights: &[LightTuple]) -> Self {
        assert_eq!(positions.len(), lights.len());
        Configuration {
            time: 0,
            robots: positions
                .iter()
                .zip(lights)
                .map(|(p, l)| RobotState {
                    pos: *p,
                    light: l.clone(),
                    pending_light: None,
                    pending_pos: None,
                    stage: Stage::Idle,
                    progress: 0.0,
                })
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.robots.len()
    }

    /// Position other robots observe.
    pub fn exposed_pos(&self, r: RobotId) -> Point {
        let s = &self.robots[r];
        match s.stage {
            Stage::Moving { from, dest } if s.progress > 0.0 => from.lerp(dest, s.progress),
            _ => s.pos,
        }
    }

    /// Most recent committed light, visible or not.
    pub fn latest_light(&self, r: RobotId) -> &LightTuple {
        let s = &self.robots[r];
        s.pending_light.as_ref().unwrap_or(&s.light)
    }

    pub fn in_transit(&self, r: RobotId) -> bool {
        matches!(self.robots[r].stage, Stage::Moving { .. })
    }

    /// Expose everything committed at the current time.
    pub fn promote(&mut self) {
        for r in &mut self.robots {
            if let Some(l) = r.pending_light.take() {
                r.light = l;
            }
            if let Some(p) = r.pending_pos.take() {
                r.pos = p;
            }
        }
    }

    /// Show in-transit robots at the given fractions of their moves.
    pub fn apply_progress(&mut self, transit: &[(RobotId, f64)]) {
        for &(r, f) in transit {
            if r < self.robots.len() && self.in_transit(r) {
                self.robots[r].progress = f;
            }
        }
    }

    pub fn has_pending(&self) -> bool {
        self.robots
            .iter()
            .any(|r| r.pending_light.is_some() || r.pending_pos.is_some())
    }

    /// Stable fingerprint of the exposed positions and lights.
    pub fn digest(&self) -> u64 {
        self.digest_with(false)
    }

    pub(crate) fn digest_with(&self, early_lights: bool) -> u64 {
        let mut h = Fnv::new();
        for i in 0..self.robots.len() {
            let p = self.exposed_pos(i);
            h.write(&p.x.to_bits().to_le_bytes());
            h.write(&p.y.to_bits().to_le_bytes());
            let l = if early_lights {
                self.latest_light(i)
            } else {
                &self.robots[i].light
            };
            h.write(&[l.0.len() as u8]);
            h.write(&l.0);
        }
        h.0
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleEvent {
    pub time: RelevantTime,
    pub robot: RobotId,
    pub kind: EventKind,
    /// Robot position after the event.
    pub pos: Point,
    /// Robot light after the event (the committed light for a Compute).
    pub light: LightTuple,
    /// Destination of the cycle (Compute, MoveBegin, MoveEnd).
    pub dest: Option<Point>,
    /// Frame used by a Look.
    pub frame: Option<LocalFrame>,
    /// Digest of the configuration a Look observed.
    pub snap: Option<u64>,
    /// Move progress of in-transit robots shown to a Look.
    pub transit: Vec<(RobotId, f64)>,
}

impl CycleEvent {
    pub fn new(
        time: RelevantTime,
        robot: RobotId,
        kind: EventKind,
        pos: Point,
        light: LightTuple,
    ) -> Self {
        CycleEvent {
            time,
            robot,
            kind,
            pos,
            light,
            dest: None,
            frame: None,
            snap: None,
            transit: Vec::new(),
        }
    }

    pub fn with_dest(mut self, dest: Point) -> Self {
        self.dest = Some(dest);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub version: u32,
    pub n: usize,
    pub model: ModelClass,
    pub scheduler: SchedulerClass,
    pub chirality: bool,
    pub rigid: bool,
    pub seed: u64,
    pub algorithm: String,
    pub adversary: String,
    pub lights: LightDecl,
    pub init_positions: Vec<Point>,
    pub init_lights: Vec<LightTuple>,
}

impl TraceHeader {
    pub fn initial_configuration(&self) -> Configuration {
        Configuration::new(&self.init_positions, &self.init_lights)
    }
}

/// An execution: header, events in time order, and the configuration the
/// events lead to.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    header: TraceHeader,
    events: Vec<CycleEvent>,
    current: Configuration,
}

impl Trace {
    pub fn new(header: TraceHeader) -> Result<Self, TraceError> {
        if header.n < 2
            || header.init_positions.len() != header.n
            || header.init_lights.len() != header.n
        {
            return Err(TraceError::InvalidEvent(
                "header needs n >= 2 initial robots".into(),
            ));
        }
        if let Some(l) = header
            .init_lights
            .iter()
            .find(|l| !header.lights.contains(l))
        {
            return Err(TraceError::InvalidEvent(format!(
                "initial light {l:?} not declared"
            )));
        }
        let current = header.initial_configuration();
        Ok(Trace {
            header,
            events: Vec::new(),
            current,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    pub fn events(&self) -> &[CycleEvent] {
        &self.events
    }

    pub fn n(&self) -> usize {
        self.header.n
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_time(&self) -> RelevantTime {
        self.events.last().map_or(0, |e| e.time)
    }

    /// Configuration after the last event, pending buffers not yet exposed.
    pub fn current(&self) -> &Configuration {
        &self.current
    }

    pub fn append_event(&mut self, e: CycleEvent) -> Result<(), TraceError> {
        apply_event(&mut self.current, &self.header, self.events.last(), &e)?;
        self.events.push(e);
        Ok(())
    }

    /// Configuration visible after each relevant time, i.e. with that
    /// time's commits exposed.
    pub fn configurations(&self) -> Vec<(RelevantTime, Configuration)> {
        self.replay()
            .map(|s| {
                let mut c = s.after;
                c.promote();
                (s.time, c)
            })
            .collect()
    }

    /// Replays the trace one relevant time at a time.
    pub fn replay(&self) -> impl Iterator<Item = TimeStep<'_>> + '_ {
        let mut cfg = self.header.initial_configuration();
        let mut i = 0;
        std::iter::from_fn(move || {
            if i >= self.events.len() {
                return None;
            }
            let t = self.events[i].time;
            let start = i;
            while i < self.events.len() && self.events[i].time == t {
                i += 1;
            }
            cfg.promote();
            cfg.time = t;
            let before = cfg.clone();
            for k in start..i {
                let prev = if k == 0 {
                    None
                } else {
                    Some(&self.events[k - 1])
                };
                apply_event(&mut cfg, &self.header, prev, &self.events[k])
                    .expect("trace events were validated");
            }
            Some(TimeStep {
                time: t,
                events: &self.events[start..i],
                before,
                after: cfg.clone(),
            })
        })
    }

    pub fn serialize(&self) -> String {
        let mut out = Vec::new();
        self.write_jsonl(&mut out)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("JSON is UTF-8")
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", header_json(&self.header))?;
        for e in &self.events {
            writeln!(w, "{}", event_json(&self.header.lights, e))?;
        }
        Ok(())
    }

    pub fn deserialize(s: &str) -> Result<Self, TraceError> {
        Trace::read_jsonl(s.as_bytes())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut trace: Option<Trace> = None;
        for (k, line) in r.lines().enumerate() {
            let line_no = k + 1;
            let bad = |reason: String| TraceError::MalformedRecord {
                line: line_no,
                reason,
            };
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            match &mut trace {
                None => {
                    let h = parse_header(&v).map_err(bad)?;
                    trace = Some(Trace::new(h).map_err(|e| bad(e.to_string()))?);
                }
                Some(t) => {
                    let e = parse_event(&t.header.lights, &v).map_err(bad)?;
                    t.append_event(e).map_err(|e| bad(e.to_string()))?;
                }
            }
        }
        trace.ok_or(TraceError::MalformedRecord {
            line: 1,
            reason: "missing header".into(),
        })
    }
}

/// Events of one relevant time with the configuration before them (what
/// the time's Looks observe, move progress aside) and after them (commits
/// still pending).
#[derive(Debug, Clone)]
pub struct TimeStep<'a> {
    pub time: RelevantTime,
    pub events: &'a [CycleEvent],
    pub before: Configuration,
    pub after: Configuration,
}

fn apply_event(
    cfg: &mut Configuration,
    header: &TraceHeader,
    prev: Option<&CycleEvent>,
    e: &CycleEvent,
) -> Result<(), TraceError> {
    let ooo = || TraceError::OutOfOrderEvent {
        time: e.time,
        robot: e.robot,
    };
    if e.time == 0 {
        return Err(ooo());
    }
    if let Some(p) = prev {
        if e.time < p.time || (e.time == p.time && e.kind < p.kind) {
            return Err(ooo());
        }
    }
    if e.robot >= cfg.robots.len() {
        return Err(TraceError::InvalidEvent(format!(
            "robot {} out of range",
            e.robot
        )));
    }
    if e.time > cfg.time {
        cfg.promote();
        cfg.time = e.time;
    }
    let expected = cfg.robots[e.robot].stage.expected();
    if e.kind != expected {
        return Err(TraceError::PhaseOrderViolation {
            time: e.time,
            robot: e.robot,
            kind: e.kind,
            expected,
        });
    }
    let need_dest = || {
        e.dest.ok_or_else(|| {
            TraceError::InvalidEvent(format!("{} event without destination", e.kind))
        })
    };
    match e.kind {
        EventKind::Look => {
            for &(r, f) in &e.transit {
                if r >= cfg.robots.len()
                    || !cfg.in_transit(r)
                    || !(0.0..=1.0).contains(&f)
                    || f < cfg.robots[r].progress
                {
                    return Err(TraceError::InvalidEvent(format!(
                        "bad move progress {f} for robot {r}"
                    )));
                }
            }
            cfg.apply_progress(&e.transit);
            cfg.robots[e.robot].stage = Stage::Looked;
        }
        EventKind::Compute => {
            if !header.lights.contains(&e.light) {
                return Err(TraceError::InvalidEvent(format!(
                    "light {:?} not declared",
                    e.light
                )));
            }
            let dest = need_dest()?;
            crate::model::commit_compute(cfg, e.robot, dest, e.light.clone(), e.time)
                .map_err(|err| TraceError::InvalidEvent(err.to_string()))?;
        }
        EventKind::MoveBegin => {
            let r = &mut cfg.robots[e.robot];
            let Stage::Computed { dest } = r.stage else {
                unreachable!()
            };
            r.stage = Stage::Moving { from: r.pos, dest };
            r.progress = 0.0;
        }
        EventKind::MoveEnd => {
            let r = &mut cfg.robots[e.robot];
            let Stage::Moving { dest, .. } = r.stage else {
                unreachable!()
            };
            r.pending_pos = Some(dest);
            r.stage = Stage::Idle;
            r.progress = 0.0;
        }
    }
    Ok(())
}

fn header_json(h: &TraceHeader) -> Value {
    json!({
        "version": h.version,
        "n": h.n,
        "model": h.model,
        "scheduler": h.scheduler,
        "chirality": h.chirality,
        "rigid": h.rigid,
        "seed": h.seed,
        "algorithm": h.algorithm,
        "adversary": h.adversary,
        "lights": h.lights,
        "init": h.init_positions.iter().zip(&h.init_lights)
            .map(|(p, l)| json!({"pos": p, "light": h.lights.to_json(l)}))
            .collect::<Vec<_>>(),
    })
}

fn event_json(decl: &LightDecl, e: &CycleEvent) -> Value {
    let mut v = json!({
        "t": e.time,
        "r": e.robot,
        "k": e.kind.code(),
        "pos": e.pos,
        "light": decl.to_json(&e.light),
    });
    let m = v.as_object_mut().expect("object literal");
    if let Some(d) = e.dest {
        m.insert("dest".into(), json!(d));
    }
    if let Some(f) = e.frame {
        m.insert(
            "frame".into(),
            json!([
                f.origin.x,
                f.origin.y,
                f.rotation,
                f.unit,
                i8::from(f.handedness)
            ]),
        );
    }
    if let Some(s) = e.snap {
        m.insert("snap".into(), json!(format!("{s:016x}")));
    }
    if !e.transit.is_empty() {
        m.insert("transit".into(), json!(e.transit));
    }
    v
}

#[derive(Deserialize)]
struct HeaderRecord {
    version: u32,
    n: usize,
    model: ModelClass,
    scheduler: SchedulerClass,
    chirality: bool,
    rigid: bool,
    seed: u64,
    #[serde(default)]
    algorithm: String,
    #[serde(default)]
    adversary: String,
    #[serde(default)]
    lights: LightDecl,
    init: Vec<InitRecord>,
}

#[derive(Deserialize, Serialize)]
struct InitRecord {
    pos: Point,
    light: Value,
}

fn parse_header(v: &Value) -> Result<TraceHeader, String> {
    let h: HeaderRecord = serde_json::from_value(v.clone()).map_err(|e| format!("header: {e}"))?;
    if h.version != TRACE_VERSION {
        return Err(format!("unsupported trace version {}", h.version));
    }
    let mut init_positions = Vec::new();
    let mut init_lights = Vec::new();
    for r in &h.init {
        init_positions.push(r.pos);
        init_lights.push(h.lights.from_json(&r.light).map_err(|e| e.to_string())?);
    }
    Ok(TraceHeader {
        version: h.version,
        n: h.n,
        model: h.model,
        scheduler: h.scheduler,
        chirality: h.chirality,
        rigid: h.rigid,
        seed: h.seed,
        algorithm: h.algorithm,
        adversary: h.adversary,
        lights: h.lights,
        init_positions,
        init_lights,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    t: RelevantTime,
    r: RobotId,
    k: String,
    pos: Point,
    light: Value,
    #[serde(default)]
    dest: Option<Point>,
    #[serde(default)]
    frame: Option<(f64, f64, f64, f64, i8)>,
    #[serde(default)]
    snap: Option<String>,
    #[serde(default)]
    transit: Vec<(RobotId, f64)>,
}

fn parse_event(decl: &LightDecl, v: &Value) -> Result<CycleEvent, String> {
    let r: EventRecord = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
    let kind = EventKind::from_code(&r.k).ok_or_else(|| format!("unknown event kind {:?}", r.k))?;
    let light = decl.from_json(&r.light).map_err(|e| e.to_string())?;
    let frame = match r.frame {
        None => None,
        Some((ox, oy, rot, unit, hand)) => {
            let origin = Point::try_new(ox, oy).map_err(|e| e.to_string())?;
            let hand = Handedness::try_from(hand).map_err(|e| e.to_string())?;
            Some(LocalFrame::new(origin, rot, unit, hand).map_err(|e| e.to_string())?)
        }
    };
    let snap = match r.snap {
        None => None,
        Some(s) => Some(u64::from_str_radix(&s, 16).map_err(|e| format!("snap: {e}"))?),
    };
    Ok(CycleEvent {
        time: r.t,
        robot: r.r,
        kind,
        pos: r.pos,
        light,
        dest: r.dest,
        frame,
        snap,
        transit: r.transit,
    })
}

/// A window of consecutive Looks in which some robot never Looked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnfairWindow {
    /// Index of the window's first Look among all Looks.
    pub start: usize,
    pub first_time: RelevantTime,
    pub missing: Vec<RobotId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub window: usize,
    pub unfair: Vec<UnfairWindow>,
}

impl FairnessReport {
    pub fn is_fair(&self) -> bool {
        self.unfair.is_empty()
    }
}

/// Default fairness window: 4 Looks per robot.
pub fn default_window(n: usize) -> usize {
    4 * n
}

/// Slide a window of `w` Looks over the trace and report every window in
/// which some robot has no Look. A trace with fewer than `w` Looks is
/// checked as a single window.
pub fn fairness_windows(trace: &Trace, w: usize) -> FairnessReport {
    let n = trace.n();
    let looks: Vec<&CycleEvent> = trace
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::Look)
        .collect();
    let w = w.max(1);
    let mut unfair = Vec::new();
    let span = w.min(looks.len());
    let mut counts = vec![0usize; n];
    for e in &looks[..span] {
        counts[e.robot] += 1;
    }
    let mut start = 0;
    loop {
        let missing: Vec<RobotId> = (0..n).filter(|r| counts[*r] == 0).collect();
        if !missing.is_empty() {
            let first_time = looks.get(start).map_or(0, |e| e.time);
            unfair.push(UnfairWindow {
                start,
                first_time,
                missing,
            });
        }
        if start + span >= looks.len() {
            break;
        }
        counts[looks[start].robot] -= 1;
        counts[looks[start + span].robot] += 1;
        start += 1;
    }
    FairnessReport { window: w, unfair }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn header(n: usize) -> TraceHeader {
        TraceHeader {
            version: TRACE_VERSION,
            n,
            model: ModelClass::Fcom,
            scheduler: SchedulerClass::Asynch,
            chirality: true,
            rigid: true,
            seed: 7,
            algorithm: "test".into(),
            adversary: "hand".into(),
            lights: LightDecl::single("color", &["c0", "c1"]),
            init_positions: (0..n).map(|i| Point::new(i as f64, 0.0)).collect(),
            init_lights: vec![LightTuple(vec![0]); n],
        }
    }

    fn ev(t: u64, r: usize, kind: EventKind) -> CycleEvent {
        let e = CycleEvent::new(t, r, kind, Point::new(r as f64, 0.0), LightTuple(vec![0]));
        if kind == EventKind::Look {
            e
        } else {
            e.with_dest(Point::new(r as f64, 0.0))
        }
    }

    #[test]
    fn append_accepts_cycle_order() {
        let mut t = Trace::new(header(2)).unwrap();
        t.append_event(ev(1, 0, EventKind::Look)).unwrap();
        assert_eq!(t.len(), 1);
        t.append_event(ev(2, 0, EventKind::Compute)).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn append_rejects_skipped_phases() {
        let mut t = Trace::new(header(2)).unwrap();
        t.append_event(ev(1, 0, EventKind::Look)).unwrap();
        assert!(matches!(
            t.append_event(ev(2, 0, EventKind::MoveEnd)),
            Err(TraceError::PhaseOrderViolation { .. })
        ));
    }

    #[test]
    fn append_rejects_time_going_back() {
        let mut t = Trace::new(header(2)).unwrap();
        t.append_event(ev(3, 0, EventKind::Look)).unwrap();
        assert!(matches!(
            t.append_event(ev(2, 1, EventKind::Look)),
            Err(TraceError::OutOfOrderEvent { .. })
        ));
        t.append_event(ev(3, 0, EventKind::Compute)).unwrap();
        // a Look may not follow a Compute within one time
        assert!(matches!(
            t.append_event(ev(3, 1, EventKind::Look)),
            Err(TraceError::OutOfOrderEvent { .. })
        ));
    }

    #[test]
    fn color_becomes_visible_one_time_later() {
        let mut t = Trace::new(header(2)).unwrap();
        t.append_event(ev(1, 1, EventKind::Look)).unwrap();
        let mut c = ev(2, 1, EventKind::Compute);
        c.light = LightTuple(vec![1]);
        t.append_event(c).unwrap();
        assert_eq!(t.current().robots[1].light, LightTuple(vec![0]));
        t.append_event(ev(3, 0, EventKind::Look)).unwrap();
        assert_eq!(t.current().robots[1].light, LightTuple(vec![1]));
        let cfgs = t.configurations();
        assert_eq!(cfgs[0].1.robots[1].light, LightTuple(vec![0]));
        assert_eq!(cfgs[1].1.robots[1].light, LightTuple(vec![1]));
    }

    #[test]
    fn empty_trace_serializes_to_header_only() {
        let t = Trace::new(header(2)).unwrap();
        let s = t.serialize();
        assert_eq!(s.lines().count(), 1);
        assert_eq!(Trace::deserialize(&s).unwrap(), t);
    }

    #[test]
    fn three_events_round_trip() {
        let mut t = Trace::new(header(2)).unwrap();
        let mut l = ev(1, 0, EventKind::Look);
        l.frame = Some(LocalFrame::new(Point::ORIGIN, 0.3, 0.1, Handedness::Ccw).unwrap());
        l.snap = Some(0xdead_beef);
        t.append_event(l).unwrap();
        let mut c = ev(1, 0, EventKind::Compute);
        c.dest = Some(Point::new(0.1 + 0.2, 1.0 / 3.0));
        t.append_event(c).unwrap();
        t.append_event(ev(2, 0, EventKind::MoveBegin)).unwrap();
        let s = t.serialize();
        assert_eq!(s.lines().count(), 4);
        assert!(s.contains("0.30000000000000004"));
        assert_eq!(Trace::deserialize(&s).unwrap(), t);
    }

    #[test]
    fn corrupt_line_reports_its_number() {
        let mut t = Trace::new(header(2)).unwrap();
        t.append_event(ev(1, 0, EventKind::Look)).unwrap();
        let mut s = t.serialize();
        s.push_str("{\"t\": 2, \"r\": \n");
        match Trace::deserialize(&s) {
            Err(TraceError::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let truncated: String = t.serialize().lines().next().unwrap()[..20].to_string();
        assert!(matches!(
            Trace::deserialize(&truncated),
            Err(TraceError::MalformedRecord { line: 1, .. })
        ));
    }

    fn round_robin(n: usize, rounds: usize) -> Trace {
        let mut t = Trace::new(header(n)).unwrap();
        let mut time = 0;
        for k in 0..rounds {
            time += 1;
            let r = k % n;
            for kind in [
                EventKind::Look,
                EventKind::Compute,
                EventKind::MoveBegin,
                EventKind::MoveEnd,
            ] {
                t.append_event(ev(time, r, kind)).unwrap();
            }
        }
        t
    }

    #[test]
    fn fairness_of_alternation() {
        assert!(fairness_windows(&round_robin(2, 10), 2).is_fair());
    }

    #[test]
    fn silent_robot_flags_every_window() {
        let mut t = Trace::new(header(2)).unwrap();
        for time in 1..=20 {
            for kind in [
                EventKind::Look,
                EventKind::Compute,
                EventKind::MoveBegin,
                EventKind::MoveEnd,
            ] {
                t.append_event(ev(time, 0, kind)).unwrap();
            }
        }
        let rep = fairness_windows(&t, 10);
        assert_eq!(rep.unfair.len(), 11);
        assert!(rep.unfair.iter().all(|w| w.missing == vec![1]));
    }

    fn arb_trace() -> impl Strategy<Value = Trace> {
        (
            2usize..5,
            prop::collection::vec(
                (
                    0usize..5,
                    0u8..2,
                    -10.0..10.0f64,
                    -10.0..10.0f64,
                    any::<bool>(),
                ),
                0..40,
            ),
        )
            .prop_map(|(n, steps)| {
                let mut t = Trace::new(header(n)).unwrap();
                let mut time = 0;
                for (r, color, x, y, advance) in steps {
                    let r = r % n;
                    if advance || time == 0 {
                        time += 1;
                    }
                    let kind = t.current().robots[r].stage.expected();
                    if let Some(last) = t.events().last() {
                        if last.time == time && kind < last.kind {
                            time += 1;
                        }
                    }
                    let mut e =
                        CycleEvent::new(time, r, kind, Point::new(x, y), LightTuple(vec![color]));
                    if kind == EventKind::Look {
                        e.snap = Some((x.to_bits()) ^ 0x55);
                    } else {
                        e.dest = Some(Point::new(y, x));
                    }
                    t.append_event(e).unwrap();
                }
                t
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn serialization_round_trips(t in arb_trace()) {
            let back = Trace::deserialize(&t.serialize()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
