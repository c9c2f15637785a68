//! Monitors for the geometric problems and the quadrilateral analysis used
//! by trapezoid formation.

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{foot_on_line, line_distance, segment_distance, Point, REL_TOL};
use crate::trace::{EventKind, RelevantTime, RobotId, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("points are not distinct")]
    NotDistinct,
    #[error("points do not form a strictly convex quadrilateral")]
    NotConvex,
    #[error("no side is strictly longer than all others")]
    NoUniqueLongestSide,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("monitor needs {expected} robots, trace has {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("invalid initial shape: {0}")]
    InvalidInitialShape(#[from] ShapeError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Satisfied,
    ViolatedAt {
        time: RelevantTime,
        clause: &'static str,
    },
    Undetermined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorVerdict {
    pub status: Status,
    pub witness: String,
}

impl MonitorVerdict {
    fn satisfied(witness: impl Into<String>) -> Self {
        MonitorVerdict {
            status: Status::Satisfied,
            witness: witness.into(),
        }
    }

    fn violated(time: RelevantTime, clause: &'static str, witness: impl Into<String>) -> Self {
        MonitorVerdict {
            status: Status::ViolatedAt { time, clause },
            witness: witness.into(),
        }
    }

    fn undetermined(witness: impl Into<String>) -> Self {
        MonitorVerdict {
            status: Status::Undetermined,
            witness: witness.into(),
        }
    }

    pub fn is_satisfied(&self) -> bool {
        self.status == Status::Satisfied
    }

    pub fn is_violated(&self) -> bool {
        matches!(self.status, Status::ViolatedAt { .. })
    }

    pub fn clause(&self) -> Option<&'static str> {
        match self.status {
            Status::ViolatedAt { clause, .. } => Some(clause),
            _ => None,
        }
    }

    pub fn time(&self) -> Option<RelevantTime> {
        match self.status {
            Status::ViolatedAt { time, .. } => Some(time),
            _ => None,
        }
    }

    pub fn status_name(&self) -> &'static str {
        match self.status {
            Status::Satisfied => "Satisfied",
            Status::ViolatedAt { .. } => "Violated",
            Status::Undetermined => "Undetermined",
        }
    }
}

impl Serialize for MonitorVerdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("status", self.status_name())?;
        if let Status::ViolatedAt { time, clause } = self.status {
            m.serialize_entry("time", &time)?;
            m.serialize_entry("clause", clause)?;
        }
        m.serialize_entry("witness", &self.witness)?;
        m.end()
    }
}

impl fmt::Display for MonitorVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.status {
            Status::ViolatedAt { time, clause } => {
                write!(f, "Violated at t={time} ({clause}): {}", self.witness)
            }
            _ => write!(f, "{}: {}", self.status_name(), self.witness),
        }
    }
}

/// Positions exposed at the start and after every relevant time.
fn samples(trace: &Trace) -> Vec<(RelevantTime, Vec<Point>)> {
    let init = trace.header().init_positions.clone();
    let mut out = vec![(0, init)];
    for (t, c) in trace.configurations() {
        out.push((t, (0..c.n()).map(|r| c.exposed_pos(r)).collect()));
    }
    out
}

/// A robot has halted when its last two completed cycles were null moves.
pub fn halted(trace: &Trace, robot: RobotId) -> bool {
    let mut begin = None;
    let mut cycles = Vec::new();
    for e in trace.events().iter().filter(|e| e.robot == robot) {
        match e.kind {
            EventKind::MoveBegin => begin = Some(e.pos),
            EventKind::MoveEnd => cycles.push(begin.take() == Some(e.pos)),
            _ => {}
        }
    }
    cycles.len() >= 2 && cycles[cycles.len() - 2..].iter().all(|null| *null)
}

fn check_arity(trace: &Trace, n: usize) -> Result<(), MonitorError> {
    if trace.n() != n {
        return Err(MonitorError::WrongArity {
            expected: n,
            got: trace.n(),
        });
    }
    Ok(())
}

/// Checks shared by the two-robot monitors: staying on the initial segment
/// and never increasing the distance.
fn segment_and_monotone(
    t: RelevantTime,
    p: &[Point],
    init: &[Point],
    prev: f64,
    tol: f64,
) -> Option<MonitorVerdict> {
    for (r, pos) in p.iter().enumerate() {
        let off = segment_distance(*pos, init[0], init[1]);
        if off > tol {
            return Some(MonitorVerdict::violated(
                t,
                "segment",
                format!(
                    "robot {r} at ({}, {}) is {off:e} off the initial segment",
                    pos.x, pos.y
                ),
            ));
        }
    }
    let d = p[0].dist(p[1]);
    if d > prev + tol {
        return Some(MonitorVerdict::violated(
            t,
            "monotone",
            format!("distance rose from {prev} to {d}"),
        ));
    }
    None
}

/// Convergence without collisions for two robots: they must stay on their
/// initial segment, never pass each other, never increase their distance,
/// and get within `eps` of each other.
pub fn monitor_mlcv(
    trace: &Trace,
    eps: f64,
    require_terminal: bool,
) -> Result<MonitorVerdict, MonitorError> {
    check_arity(trace, 2)?;
    let init = trace.header().init_positions.clone();
    let (r0, q0) = (init[0], init[1]);
    let d0 = r0.dist(q0);
    let tol = 1e-12 * d0;
    let mut prev = d0;
    let samples = samples(trace);
    for (t, p) in &samples {
        if let Some(v) = segment_and_monotone(*t, p, &init, prev, tol) {
            return Ok(v);
        }
        let (r, q) = (p[0], p[1]);
        if r0.dist(r) > r0.dist(q) + tol || q0.dist(q) > q0.dist(r) + tol {
            return Ok(MonitorVerdict::violated(
                *t,
                "crossing",
                format!(
                    "r=({}, {}) q=({}, {}): dis(r0,r)={} dis(r0,q)={} dis(q0,q)={} dis(q0,r)={}",
                    r.x,
                    r.y,
                    q.x,
                    q.y,
                    r0.dist(r),
                    r0.dist(q),
                    q0.dist(q),
                    q0.dist(r)
                ),
            ));
        }
        prev = r.dist(q);
    }
    let d = prev;
    let terminal = !require_terminal || (halted(trace, 0) && halted(trace, 1));
    if d <= eps && terminal {
        Ok(MonitorVerdict::satisfied(format!(
            "final distance {d} <= {eps}"
        )))
    } else if d <= eps {
        Ok(MonitorVerdict::undetermined(format!(
            "distance {d} but robots have not halted"
        )))
    } else {
        Ok(MonitorVerdict::undetermined(format!(
            "distance {d} > {eps} at the horizon"
        )))
    }
}

/// Gathering to a common location for two robots.
pub fn monitor_rdv(trace: &Trace, eps: f64) -> Result<MonitorVerdict, MonitorError> {
    check_arity(trace, 2)?;
    let c = samples(trace).pop().expect("initial sample").1;
    let d = c[0].dist(c[1]);
    if d <= eps && halted(trace, 0) && halted(trace, 1) {
        Ok(MonitorVerdict::satisfied(format!(
            "both halted at distance {d}"
        )))
    } else {
        Ok(MonitorVerdict::undetermined(format!(
            "distance {d}, not both halted"
        )))
    }
}

/// Two robots must get closer without ever being closer than half their
/// initial distance.
pub fn monitor_gcncl(trace: &Trace) -> Result<MonitorVerdict, MonitorError> {
    check_arity(trace, 2)?;
    let init = trace.header().init_positions.clone();
    let d0 = init[0].dist(init[1]);
    let tol = 1e-12 * d0;
    let mut prev = d0;
    for (t, p) in samples(trace) {
        if let Some(v) = segment_and_monotone(t, &p, &init, prev, tol) {
            return Ok(v);
        }
        prev = p[0].dist(p[1]);
        if prev < d0 / 2.0 - tol {
            return Ok(MonitorVerdict::violated(
                t,
                "lower-bound",
                format!("distance {prev} < d0/2 = {}", d0 / 2.0),
            ));
        }
    }
    let d = prev;
    let stopped = halted(trace, 0) && halted(trace, 1);
    if stopped && d >= d0 / 2.0 - tol && d < d0 {
        Ok(MonitorVerdict::satisfied(format!(
            "halted at distance {d} in [d0/2, d0)"
        )))
    } else if stopped {
        Ok(MonitorVerdict::undetermined(format!(
            "halted at distance {d} without getting closer"
        )))
    } else {
        Ok(MonitorVerdict::undetermined(format!(
            "distance {d}, robots have not halted"
        )))
    }
}

/// Labelled analysis of a convex quadrilateral with a unique longest side
/// CD. Labels are indices into the analysed points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrilateralAnalysis {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
    /// Foot of A on line CD.
    pub a_foot: Point,
    pub b_foot: Point,
    pub height_a: f64,
    pub height_b: f64,
    pub alpha: f64,
    pub trapezoid: bool,
}

impl QuadrilateralAnalysis {
    /// The robot that must move: A when α ≥ π/4, otherwise B.
    pub fn mover(&self) -> usize {
        if self.alpha >= FRAC_PI_4 {
            self.a
        } else {
            self.b
        }
    }

    /// Index of the other robot on the short side AB.
    pub fn partner(&self) -> usize {
        if self.mover() == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Label a convex quadrilateral: CD is the unique longest side, A is the
/// endpoint of AB farther from CD, D is adjacent to A and C to B. Equal
/// heights mark a trapezoid.
pub fn analyze_quadrilateral(points: &[Point; 4]) -> Result<QuadrilateralAnalysis, ShapeError> {
    for i in 0..4 {
        for j in i + 1..4 {
            if points[i] == points[j] {
                return Err(ShapeError::NotDistinct);
            }
        }
    }
    let hull = convex_order(points)?;
    let side = |k: usize| points[hull[k]].dist(points[hull[(k + 1) % 4]]);
    let lens: Vec<f64> = (0..4).map(side).collect();
    let (k, &longest) = lens
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .expect("four sides");
    if lens
        .iter()
        .enumerate()
        .any(|(j, l)| j != k && *l >= longest * (1.0 - REL_TOL))
    {
        return Err(ShapeError::NoUniqueLongestSide);
    }
    let (e0, e1) = (hull[k], hull[(k + 1) % 4]);
    // hull[k+2] is adjacent to e1, hull[k+3] to e0
    let (n1, n0) = (hull[(k + 2) % 4], hull[(k + 3) % 4]);
    let h1 = line_distance(points[n1], points[e0], points[e1]);
    let h0 = line_distance(points[n0], points[e0], points[e1]);
    let (a, b, c, d) = if h0 >= h1 {
        (n0, n1, e1, e0)
    } else {
        (n1, n0, e0, e1)
    };
    let (pc, pd) = (points[c], points[d]);
    let a_foot = foot_on_line(points[a], pc, pd);
    let b_foot = foot_on_line(points[b], pc, pd);
    let height_a = line_distance(points[a], pc, pd);
    let height_b = line_distance(points[b], pc, pd);
    let w = a_foot.dist(b_foot);
    let h = height_a - height_b;
    let trapezoid = h <= REL_TOL * longest;
    let alpha = w.atan2(h);
    Ok(QuadrilateralAnalysis {
        a,
        b,
        c,
        d,
        a_foot,
        b_foot,
        height_a,
        height_b,
        alpha,
        trapezoid,
    })
}

/// Indices of the points in counter-clockwise hull order, failing unless all
/// four are strict hull vertices.
fn convex_order(points: &[Point; 4]) -> Result<[usize; 4], ShapeError> {
    let cx = points.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mut idx = [0, 1, 2, 3];
    idx.sort_by(|&i, &j| {
        let ai = (points[i].y - cy).atan2(points[i].x - cx);
        let aj = (points[j].y - cy).atan2(points[j].x - cx);
        ai.total_cmp(&aj)
    });
    let scale = points
        .iter()
        .flat_map(|p| points.iter().map(move |q| p.dist(*q)))
        .fold(0.0, f64::max);
    for k in 0..4 {
        let p = points[idx[k]];
        let q = points[idx[(k + 1) % 4]];
        let r = points[idx[(k + 2) % 4]];
        if q.sub(p).cross(r.sub(q)) <= REL_TOL * scale * scale {
            return Err(ShapeError::NotConvex);
        }
    }
    Ok(idx)
}

/// Trapezoid formation. If the initial quadrilateral is a trapezoid no robot
/// may move; otherwise only the designated mover may move, along its
/// perpendicular to CD, until AB is parallel to CD.
pub fn monitor_tf(trace: &Trace, tol: f64) -> Result<MonitorVerdict, MonitorError> {
    check_arity(trace, 4)?;
    let init: [Point; 4] = trace
        .header()
        .init_positions
        .clone()
        .try_into()
        .expect("arity checked");
    let q = analyze_quadrilateral(&init)?;
    let cd = init[q.c].dist(init[q.d]);
    let samples = samples(trace);
    if q.trapezoid {
        for (t, p) in &samples {
            if let Some(r) = (0..4).find(|r| p[*r] != init[*r]) {
                return Ok(MonitorVerdict::violated(
                    *t,
                    "TF1",
                    format!("robot {r} left its initial trapezoid position"),
                ));
            }
        }
        return Ok(MonitorVerdict::satisfied("initial trapezoid unchanged"));
    }
    let mover = q.mover();
    let clause = if mover == q.a { "TF2.1" } else { "TF2.2" };
    let foot = if mover == q.a { q.a_foot } else { q.b_foot };
    for (t, p) in &samples {
        if let Some(r) = (0..4).find(|r| *r != mover && p[*r] != init[*r]) {
            return Ok(MonitorVerdict::violated(
                *t,
                clause,
                format!(
                    "robot {r} moved but only robot {mover} may (alpha={})",
                    q.alpha
                ),
            ));
        }
        let off = line_distance(p[mover], init[mover], foot);
        if off > tol * cd {
            return Ok(MonitorVerdict::violated(
                *t,
                clause,
                format!("robot {mover} left its perpendicular by {off:e}"),
            ));
        }
    }
    let last = &samples.last().expect("initial sample").1;
    let (pc, pd) = (last[q.c], last[q.d]);
    let gap = (line_distance(last[q.a], pc, pd) - line_distance(last[q.b], pc, pd)).abs();
    let parallel = gap <= tol * cd;
    if parallel && halted(trace, mover) {
        Ok(MonitorVerdict::satisfied(format!(
            "robot {mover} halted with ab parallel to CD (gap {gap:e})"
        )))
    } else if parallel {
        Ok(MonitorVerdict::undetermined(format!(
            "ab parallel to CD but robot {mover} has not halted"
        )))
    } else {
        Ok(MonitorVerdict::undetermined(format!(
            "ab not parallel to CD yet (gap {gap:e})"
        )))
    }
}
