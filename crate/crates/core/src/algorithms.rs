//! Robot algorithms as pure snapshot-to-action functions, registered by name.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{foot_on_line, line_distance, Point};
use crate::model::{LightDecl, LightUpdate, ModelClass, Snapshot};
use crate::problems::{analyze_quadrilateral, ShapeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgoError {
    #[error("expected {expected} other robots in view, got {got}")]
    ArityError { expected: usize, got: usize },
    #[error("invalid initial shape: {0}")]
    InvalidInitialShape(#[from] ShapeError),
    #[error("fewer than two occupied locations")]
    MDegenerate,
    #[error("unknown algorithm {0:?}")]
    Unknown(String),
    #[error("{0}")]
    Other(String),
}

/// What a Compute produces: a destination in the observer's frame and an
/// update to its own light.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub dest: Point,
    pub light: LightUpdate,
}

impl Action {
    pub fn stay() -> Self {
        Action {
            dest: Point::ORIGIN,
            light: LightUpdate::keep(),
        }
    }

    pub fn to(dest: Point) -> Self {
        Action {
            dest,
            light: LightUpdate::keep(),
        }
    }

    pub fn with_color(mut self, sub: usize, color: u8) -> Self {
        self.light = self.light.set(sub, color);
        self
    }
}

pub type ComputeFn = dyn Fn(&Snapshot) -> Result<Action, AlgoError> + Send + Sync;

#[derive(Clone)]
pub struct AlgorithmBinding {
    pub name: String,
    pub model: ModelClass,
    pub lights: LightDecl,
    compute: Arc<ComputeFn>,
}

impl AlgorithmBinding {
    pub fn new(
        name: impl Into<String>,
        model: ModelClass,
        lights: LightDecl,
        compute: impl Fn(&Snapshot) -> Result<Action, AlgoError> + Send + Sync + 'static,
    ) -> Self {
        AlgorithmBinding {
            name: name.into(),
            model,
            lights,
            compute: Arc::new(compute),
        }
    }

    pub fn compute(&self, snapshot: &Snapshot) -> Result<Action, AlgoError> {
        (self.compute)(snapshot)
    }
}

impl fmt::Debug for AlgorithmBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgorithmBinding")
            .field("name", &self.name)
            .field("model", &self.model)
            .field("lights", &self.lights)
            .finish_non_exhaustive()
    }
}

fn single_other(s: &Snapshot) -> Result<Point, AlgoError> {
    match s.others.as_slice() {
        [o] => Ok(o.pos),
        other => Err(AlgoError::ArityError {
            expected: 1,
            got: other.len(),
        }),
    }
}

/// Move to the midpoint between self and the only other robot.
pub fn half_move(s: &Snapshot) -> Result<Point, AlgoError> {
    Ok(single_other(s)?.scale(0.5))
}

/// Trapezoid formation rules: stay on a trapezoid; otherwise only the
/// designated mover moves, along its perpendicular to CD, to the height of
/// its partner.
pub fn tf_rules(s: &Snapshot) -> Result<Point, AlgoError> {
    if s.others.len() != 3 {
        return Err(AlgoError::ArityError {
            expected: 3,
            got: s.others.len(),
        });
    }
    let pts = [
        Point::ORIGIN,
        s.others[0].pos,
        s.others[1].pos,
        s.others[2].pos,
    ];
    let q = analyze_quadrilateral(&pts)?;
    if q.trapezoid || q.mover() != 0 {
        return Ok(Point::ORIGIN);
    }
    let (c, d) = (pts[q.c], pts[q.d]);
    let foot = foot_on_line(Point::ORIGIN, c, d);
    let up = Point::ORIGIN.sub(foot);
    let h = line_distance(pts[q.partner()], c, d);
    Ok(foot.add(up.scale(h / up.norm())))
}

/// With color c0, step a quarter of the way to the other robot and switch to
/// c1; with c1, stay.
pub fn gcncl_quarter(s: &Snapshot) -> Result<Action, AlgoError> {
    let other = single_other(s)?;
    let own = s.own_light.as_ref().map_or(0, |l| l.get(0));
    if own == 0 {
        Ok(Action::to(other.scale(0.25)).with_color(0, 1))
    } else {
        Ok(Action::stay())
    }
}

/// Stay put and show the successor of the smallest color among the others.
pub fn color_cycler(s: &Snapshot) -> Action {
    let min = s
        .others
        .iter()
        .flat_map(|o| o.lights.iter())
        .map(|l| l.get(0))
        .min()
        .unwrap_or(0);
    Action::stay().with_color(0, (min + 1) % 3)
}

/// If the other robot shows c0, move a quarter of the distance toward it and
/// show c1.
pub fn naive_quarter_fcom(s: &Snapshot) -> Result<Action, AlgoError> {
    let other = single_other(s)?;
    let o = &s.others[0];
    if o.lights.iter().any(|l| l.get(0) == 0) {
        Ok(Action::to(other.scale(0.25)).with_color(0, 1))
    } else {
        Ok(Action::stay())
    }
}

/// tf_rules, but a robot that wants to move first waits `k` activations,
/// counting them in its own light.
pub fn tf_rules_waiting(s: &Snapshot, k: u8) -> Result<Action, AlgoError> {
    let dest = tf_rules(s)?;
    let waited = s.own_light.as_ref().map_or(0, |l| l.get(0));
    if dest == Point::ORIGIN {
        Ok(Action::stay().with_color(0, 0))
    } else if waited < k {
        Ok(Action::stay().with_color(0, waited + 1))
    } else {
        Ok(Action::to(dest).with_color(0, 0))
    }
}

fn one_color() -> LightDecl {
    LightDecl::single("color", &["c0"])
}

pub const ALGORITHM_NAMES: [&str; 12] = [
    "half_move",
    "half_move_fcom",
    "half_move_fsta",
    "tf_rules",
    "tf_rules_fsta",
    "tf_rules_wait3",
    "gcncl_quarter",
    "color_cycler",
    "naive_quarter_fcom",
    "idle",
    "idle_fcom",
    "idle_fsta",
];

/// Look up an algorithm by name.
pub fn registry(name: &str) -> Result<AlgorithmBinding, AlgoError> {
    use ModelClass::*;
    let b = match name {
        "half_move" => AlgorithmBinding::new(name, Oblot, LightDecl::none(), |s| {
            half_move(s).map(Action::to)
        }),
        "half_move_fcom" => {
            AlgorithmBinding::new(name, Fcom, one_color(), |s| half_move(s).map(Action::to))
        }
        "half_move_fsta" => {
            AlgorithmBinding::new(name, Fsta, one_color(), |s| half_move(s).map(Action::to))
        }
        "tf_rules" => AlgorithmBinding::new(name, Oblot, LightDecl::none(), |s| {
            tf_rules(s).map(Action::to)
        }),
        "tf_rules_fsta" => {
            AlgorithmBinding::new(name, Fsta, one_color(), |s| tf_rules(s).map(Action::to))
        }
        "tf_rules_wait3" => AlgorithmBinding::new(
            name,
            Fsta,
            LightDecl::single("waited", &["w0", "w1", "w2", "w3"]),
            |s| tf_rules_waiting(s, 3),
        ),
        "gcncl_quarter" => AlgorithmBinding::new(
            name,
            Fsta,
            LightDecl::single("color", &["c0", "c1"]),
            gcncl_quarter,
        ),
        "color_cycler" => AlgorithmBinding::new(
            name,
            Fcom,
            LightDecl::single("color", &["c0", "c1", "c2"]),
            |s| Ok(color_cycler(s)),
        ),
        "naive_quarter_fcom" => AlgorithmBinding::new(
            name,
            Fcom,
            LightDecl::single("color", &["c0", "c1"]),
            naive_quarter_fcom,
        ),
        "idle" => AlgorithmBinding::new(name, Oblot, LightDecl::none(), |_| Ok(Action::stay())),
        "idle_fcom" => AlgorithmBinding::new(name, Fcom, one_color(), |_| Ok(Action::stay())),
        "idle_fsta" => AlgorithmBinding::new(name, Fsta, one_color(), |_| Ok(Action::stay())),
        _ => return Err(AlgoError::Unknown(name.to_string())),
    };
    Ok(b)
}
