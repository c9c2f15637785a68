//! Scripted adversaries that defeat specific algorithm classes, plus the
//! name registry shared with the generic strategies.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algorithms::{Action, AlgorithmBinding};
use crate::engine::{
    builtin_adversaries, Adversary, Decision, EngineError, EngineView, FrameSpec, SchedulerClass,
    Step,
};
use crate::geometry::{Handedness, Point};
use crate::model::{LightTuple, Observed, Scenario, Snapshot};
use crate::problems::analyze_quadrilateral;
use crate::trace::{EventKind, RobotId, Stage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("script does not apply: {0}")]
    NotApplicable(String),
    #[error("the algorithm never moves for any color (fails convergence)")]
    FZero,
    #[error("no robot moves on the periodic color sequence (fails convergence)")]
    AllZeroF,
    #[error("target resisted: {0}")]
    TargetResisted(String),
    #[error("no attractive color is reachable (fails liveness)")]
    NeverAttractive,
    #[error("iteration cap of {0} reached")]
    CapExceeded(usize),
    #[error("incompatible with the run: {0}")]
    Incompatible(String),
}

pub const SCRIPTED_KINDS: [&str; 6] = [
    "mlcv-oblot-m",
    "mlcv-fcom-m",
    "mlcv-fsta-m",
    "tf-async",
    "tf-fsta-lc",
    "gcncl-fcom-s",
];

/// Any adversary by name: the generic strategies and the scripted ones.
/// `bound` is the color or state bound of scripts that take one; by default
/// it is the size of the algorithm's light state space.
pub fn scripted_adversary(
    kind: &str,
    seed: u64,
    bound: Option<usize>,
) -> Result<Box<dyn Adversary>, EngineError> {
    Ok(match kind {
        "mlcv-oblot-m" => Box::new(MlcvOblotM::new(seed)),
        "mlcv-fcom-m" => Box::new(MlcvFcomM::new(seed)),
        "mlcv-fsta-m" => Box::new(MlcvFstaM::new(seed, bound)),
        "tf-async" => Box::new(TfAsync::new(seed)),
        "tf-fsta-lc" => Box::new(TfFstaLc::new(seed, bound)),
        "gcncl-fcom-s" => Box::new(GcnclFcomS::new(seed)),
        other => return builtin_adversaries(other, seed),
    })
}

/// The class a scripted adversary's schedules belong to.
pub fn target_class(kind: &str) -> Option<SchedulerClass> {
    Some(match kind {
        "mlcv-oblot-m" | "mlcv-fcom-m" | "mlcv-fsta-m" => SchedulerClass::MAtomic,
        "tf-async" => SchedulerClass::Asynch,
        "tf-fsta-lc" => SchedulerClass::LcAtomic,
        "gcncl-fcom-s" => SchedulerClass::Ssynch,
        _ => return None,
    })
}

/// Trapezoid formation instance with α = π/4 exactly: A=(2,6), B=(4,4),
/// C=(7,0), D=(0,0).
pub fn tf_quarter_instance() -> Scenario {
    Scenario::new(vec![
        Point::new(2.0, 6.0),
        Point::new(4.0, 4.0),
        Point::new(7.0, 0.0),
        Point::ORIGIN,
    ])
}

/// Same layout with B lowered so α is just below π/4 and B is the mover.
pub fn tf_below_quarter_instance() -> Scenario {
    Scenario::new(vec![
        Point::new(2.0, 6.0),
        Point::new(4.0, 3.75),
        Point::new(7.0, 0.0),
        Point::ORIGIN,
    ])
}

fn check_class(view: &EngineView<'_>, target: SchedulerClass, n: usize) -> Option<Decision> {
    if !target.is_within(view.class) {
        return Some(Decision::Abort(AdversaryError::Incompatible(format!(
            "script produces {target} schedules, run is {}",
            view.class
        ))));
    }
    if view.n() != n {
        return Some(Decision::Abort(AdversaryError::NotApplicable(format!(
            "needs {n} robots, got {}",
            view.n()
        ))));
    }
    None
}

/// Dry-run the algorithm for a robot whose opponent sits at unit distance
/// showing `other`, while its own light is `own`.
fn probe(
    algo: &AlgorithmBinding,
    other: &LightTuple,
    own: &LightTuple,
) -> Result<Action, AdversaryError> {
    let lights = if algo.model.sees_others_lights() {
        vec![other.clone()]
    } else {
        Vec::new()
    };
    let s = Snapshot {
        observer: 0,
        others: vec![Observed {
            pos: Point::new(1.0, 0.0),
            lights,
        }],
        own_light: algo.model.sees_own_light().then(|| own.clone()),
    };
    algo.compute(&s)
        .map_err(|e| AdversaryError::NotApplicable(e.to_string()))
}

/// Fraction of the distance a robot moves, f(c, d) / d.
fn fraction(
    algo: &AlgorithmBinding,
    other: &LightTuple,
    own: &LightTuple,
) -> Result<f64, AdversaryError> {
    Ok(probe(algo, other, own)?.dest.norm())
}

fn distance(view: &EngineView<'_>) -> f64 {
    view.config.exposed_pos(0).dist(view.config.exposed_pos(1))
}

/// A held move of length `held` would carry its robot past the other one.
/// The margin keeps a tie in exact arithmetic from releasing on rounding.
fn overshoots(view: &EngineView<'_>, held: f64) -> bool {
    distance(view) < held * (1.0 - 1e-9)
}

fn pending_length(view: &EngineView<'_>, r: RobotId) -> Option<f64> {
    match view.stage(r) {
        Stage::Computed { dest } => Some(view.config.robots[r].pos.dist(dest)),
        _ => None,
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.0..TAU)
}

/// Frame with the opponent at unit distance.
fn unit_frame(rng: &mut ChaCha8Rng, view: &EngineView<'_>) -> FrameSpec {
    let d = distance(view);
    FrameSpec {
        rotation: random_rotation(rng),
        unit: if d > 0.0 { d } else { 1.0 },
        handedness: Handedness::Ccw,
    }
}

/// Convergence against oblivious robots under M_ATOMIC: both robots look,
/// robot 1's move is held back while robot 0 keeps cycling, and the held
/// move is released once it is longer than the remaining distance.
pub struct MlcvOblotM {
    frames: [FrameSpec; 2],
    stage: u8,
    cap: usize,
    pumped: usize,
}

impl MlcvOblotM {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = [0, 1].map(|_| FrameSpec {
            rotation: random_rotation(&mut rng),
            ..FrameSpec::IDENTITY
        });
        MlcvOblotM {
            frames,
            stage: 0,
            cap: 1000,
            pumped: 0,
        }
    }
}

impl Adversary for MlcvOblotM {
    fn name(&self) -> String {
        "mlcv-oblot-m".into()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        if let Some(d) = check_class(view, SchedulerClass::MAtomic, 2) {
            return d;
        }
        let [f0, f1] = self.frames;
        match self.stage {
            0 => {
                self.stage = 1;
                Decision::Fire(
                    Step::new()
                        .look(0, f0)
                        .look(1, f1)
                        .compute(0)
                        .compute(1)
                        .do_move(0),
                )
            }
            1 => {
                let held = pending_length(view, 1).unwrap_or(0.0);
                if held == 0.0 {
                    return Decision::Abort(AdversaryError::NotApplicable(
                        "the held robot computed a null move".into(),
                    ));
                }
                if overshoots(view, held) {
                    self.stage = 2;
                    return Decision::Fire(Step::new().do_move(1));
                }
                if self.pumped > 0 && self.last_move_null(view) {
                    return Decision::Abort(AdversaryError::NotApplicable(
                        "the active robot makes no progress".into(),
                    ));
                }
                self.pumped += 1;
                if self.pumped > self.cap {
                    return Decision::Abort(AdversaryError::CapExceeded(self.cap));
                }
                Decision::Fire(Step::new().cycle(0, f0))
            }
            _ => Decision::Stop,
        }
    }
}

impl MlcvOblotM {
    /// Robot 0's latest completed move went nowhere.
    fn last_move_null(&self, view: &EngineView<'_>) -> bool {
        let ev = view.trace.events();
        let me = ev
            .iter()
            .rev()
            .find(|e| e.robot == 0 && e.kind == EventKind::MoveEnd);
        let mb = ev
            .iter()
            .rev()
            .find(|e| e.robot == 0 && e.kind == EventKind::MoveBegin);
        matches!((mb, me), (Some(b), Some(e)) if b.pos == e.pos)
    }
}

/// Convergence against FCOM robots under M_ATOMIC with variable
/// disorientation. Every Look sees the opponent at unit distance, so a
/// robot's move is a fixed fraction F(c) of the distance for the color c it
/// sees.
pub struct MlcvFcomM {
    rng: ChaCha8Rng,
    stage: u8,
    pumped: usize,
    cap: usize,
}

impl MlcvFcomM {
    pub fn new(seed: u64) -> Self {
        MlcvFcomM {
            rng: ChaCha8Rng::seed_from_u64(seed),
            stage: 0,
            pumped: 0,
            cap: 1000,
        }
    }
}

impl Adversary for MlcvFcomM {
    fn name(&self) -> String {
        "mlcv-fcom-m".into()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        if let Some(d) = check_class(view, SchedulerClass::MAtomic, 2) {
            return d;
        }
        let algo = view.algorithm;
        match self.stage {
            0 => {
                let tuples = algo.lights.all_tuples();
                let mut any = false;
                for c in &tuples {
                    match fraction(algo, c, c) {
                        Ok(f) => any |= f > 0.0,
                        Err(e) => return Decision::Abort(e),
                    }
                }
                if !any {
                    return Decision::Abort(AdversaryError::FZero);
                }
                let seen = view.config.robots[1].light.clone();
                let own = view.config.robots[0].light.clone();
                let f = match fraction(algo, &seen, &own) {
                    Ok(f) => f,
                    Err(e) => return Decision::Abort(e),
                };
                let fr0 = unit_frame(&mut self.rng, view);
                let fr1 = unit_frame(&mut self.rng, view);
                if f > 0.5 {
                    self.stage = 3;
                    return Decision::Fire(Step::new().cycle(0, fr0).cycle(1, fr1));
                }
                if f == 0.0 {
                    return Decision::Abort(AdversaryError::NotApplicable(
                        "the held robot would not move on the initial color".into(),
                    ));
                }
                self.stage = 1;
                Decision::Fire(Step::new().look(0, fr0).compute(0))
            }
            1 => {
                let held = pending_length(view, 0).unwrap_or(0.0);
                if overshoots(view, held) {
                    self.stage = 3;
                    return Decision::Fire(Step::new().do_move(0));
                }
                self.pumped += 1;
                if self.pumped > self.cap {
                    return Decision::Abort(AdversaryError::CapExceeded(self.cap));
                }
                let fr = unit_frame(&mut self.rng, view);
                Decision::Fire(Step::new().cycle(1, fr))
            }
            _ => Decision::Stop,
        }
    }
}

/// Activations of robot 1 the FCOM script needs while robot 0 is held, for
/// a fraction F in (0, 1/2].
pub fn fcom_pump_count(f: f64) -> usize {
    (f.ln() / (1.0 - f).ln()).floor() as usize + 1
}

/// Convergence against FSTA robots under M_ATOMIC. Robots see only their
/// own color, so the script walks the pair of colors, crossing the robots
/// when their fractions sum past 1 and otherwise moving them one at a time,
/// until the pair repeats. On the period it holds one robot's move and
/// pumps the other.
pub struct MlcvFstaM {
    rng: ChaCha8Rng,
    bound: Option<usize>,
    seen: Vec<(LightTuple, LightTuple)>,
    stage: u8,
    pumped: usize,
    held: RobotId,
}

impl MlcvFstaM {
    pub fn new(seed: u64, color_bound: Option<usize>) -> Self {
        MlcvFstaM {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bound: color_bound,
            seen: Vec::new(),
            stage: 0,
            pumped: 0,
            held: 0,
        }
    }
}

impl Adversary for MlcvFstaM {
    fn name(&self) -> String {
        "mlcv-fsta-m".into()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        if let Some(d) = check_class(view, SchedulerClass::MAtomic, 2) {
            return d;
        }
        let algo = view.algorithm;
        let bound = self
            .bound
            .unwrap_or(algo.lights.state_space() as usize)
            .max(1);
        let cap = 10 * bound * bound;
        let colors = |r: RobotId| view.config.latest_light(r).clone();
        let f = |r: RobotId| fraction(algo, &colors(1 - r), &colors(r));
        match self.stage {
            // walking the color pairs, one pair per two steps
            0 => {
                let pair = (colors(0), colors(1));
                if let Some(start) = self.seen.iter().position(|p| *p == pair) {
                    let mut any = false;
                    for (c0, c1) in &self.seen[start..] {
                        let f0 = fraction(algo, c1, c0);
                        let f1 = fraction(algo, c0, c1);
                        match (f0, f1) {
                            (Ok(a), Ok(b)) => any |= a > 0.0 || b > 0.0,
                            (Err(e), _) | (_, Err(e)) => return Decision::Abort(e),
                        }
                    }
                    if !any {
                        return Decision::Abort(AdversaryError::AllZeroF);
                    }
                    let (f0, f1) = match (f(0), f(1)) {
                        (Ok(a), Ok(b)) => (a, b),
                        (Err(e), _) | (_, Err(e)) => return Decision::Abort(e),
                    };
                    if f0 == 0.0 && f1 == 0.0 {
                        // not on a moving pair yet: advance along the period
                        let a = unit_frame(&mut self.rng, view);
                        self.stage = 1;
                        return Decision::Fire(Step::new().cycle(0, a));
                    }
                    self.held = if f0 > 0.0 { 0 } else { 1 };
                    self.stage = 2;
                    let fr = unit_frame(&mut self.rng, view);
                    return Decision::Fire(Step::new().look(self.held, fr).compute(self.held));
                }
                if self.seen.len() > cap {
                    return Decision::Abort(AdversaryError::CapExceeded(cap));
                }
                self.seen.push(pair);
                let (f0, f1) = match (f(0), f(1)) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => return Decision::Abort(e),
                };
                let (a, b) = (
                    unit_frame(&mut self.rng, view),
                    unit_frame(&mut self.rng, view),
                );
                if f0 + f1 > 1.0 {
                    self.stage = 4;
                    return Decision::Fire(Step::new().cycle(0, a).cycle(1, b));
                }
                self.stage = 1;
                Decision::Fire(Step::new().cycle(0, a))
            }
            1 => {
                self.stage = 0;
                let fr = unit_frame(&mut self.rng, view);
                Decision::Fire(Step::new().cycle(1, fr))
            }
            2 => {
                let held = pending_length(view, self.held).unwrap_or(0.0);
                if overshoots(view, held) {
                    self.stage = 4;
                    return Decision::Fire(Step::new().do_move(self.held));
                }
                self.pumped += 1;
                if self.pumped > cap {
                    return Decision::Abort(AdversaryError::CapExceeded(cap));
                }
                let fr = unit_frame(&mut self.rng, view);
                Decision::Fire(Step::new().cycle(1 - self.held, fr))
            }
            _ => Decision::Stop,
        }
    }
}

/// Activates the designated trapezoid mover, then lets its partner look
/// while the mover is halfway along its move. If the partner then moves,
/// its move is carried out.
pub struct TfAsync {
    stage: u8,
    roles: Option<(RobotId, RobotId)>,
}

impl TfAsync {
    pub fn new(_seed: u64) -> Self {
        TfAsync {
            stage: 0,
            roles: None,
        }
    }
}

fn tf_roles(view: &EngineView<'_>) -> Result<(RobotId, RobotId), AdversaryError> {
    let pts: [Point; 4] = view
        .trace
        .header()
        .init_positions
        .clone()
        .try_into()
        .map_err(|_| AdversaryError::NotApplicable("needs 4 robots".into()))?;
    let q =
        analyze_quadrilateral(&pts).map_err(|e| AdversaryError::NotApplicable(e.to_string()))?;
    if q.trapezoid {
        return Err(AdversaryError::NotApplicable(
            "initial configuration is already a trapezoid".into(),
        ));
    }
    Ok((q.mover(), q.partner()))
}

fn computed_null(view: &EngineView<'_>, r: RobotId) -> bool {
    pending_length(view, r) == Some(0.0)
}

impl Adversary for TfAsync {
    fn name(&self) -> String {
        "tf-async".into()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        if let Some(d) = check_class(view, SchedulerClass::Asynch, 4) {
            return d;
        }
        let (m, p) = match self.roles {
            Some(r) => r,
            None => match tf_roles(view) {
                Ok(r) => *self.roles.insert(r),
                Err(e) => return Decision::Abort(e),
            },
        };
        let id = FrameSpec::IDENTITY;
        match self.stage {
            0 => {
                self.stage = 1;
                Decision::Fire(Step::new().look(m, id).compute(m))
            }
            1 => {
                if computed_null(view, m) {
                    return Decision::Abort(AdversaryError::TargetResisted(format!(
                        "mover {m} computed a null move"
                    )));
                }
                self.stage = 2;
                Decision::Fire(Step::new().move_begin(m))
            }
            2 => {
                self.stage = 3;
                Decision::Fire(Step::new().look(p, id).show(m, 0.5).compute(p))
            }
            3 => {
                if computed_null(view, p) {
                    return Decision::Abort(AdversaryError::TargetResisted(format!(
                        "robot {p} computed a null move on the mid-move view"
                    )));
                }
                self.stage = 4;
                Decision::Fire(Step::new().do_move(p).move_end(m))
            }
            _ => Decision::Stop,
        }
    }
}

/// LC_ATOMIC variant for finite-state robots: the mover is activated until
/// it commits a move, which is then held mid-way while its partner is
/// activated up to `state_bound` times on the same view.
pub struct TfFstaLc {
    bound: Option<usize>,
    stage: u8,
    mover_tries: usize,
    activations: usize,
    colors: Vec<LightTuple>,
    roles: Option<(RobotId, RobotId)>,
}

impl TfFstaLc {
    pub fn new(_seed: u64, state_bound: Option<usize>) -> Self {
        TfFstaLc {
            bound: state_bound,
            stage: 0,
            mover_tries: 0,
            activations: 0,
            colors: Vec::new(),
            roles: None,
        }
    }
}

impl Adversary for TfFstaLc {
    fn name(&self) -> String {
        "tf-fsta-lc".into()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        if let Some(d) = check_class(view, SchedulerClass::LcAtomic, 4) {
            return d;
        }
        let (m, p) = match self.roles {
            Some(r) => r,
            None => match tf_roles(view) {
                Ok(r) => *self.roles.insert(r),
                Err(e) => return Decision::Abort(e),
            },
        };
        let bound = self
            .bound
            .unwrap_or(view.algorithm.lights.state_space() as usize)
            .max(1);
        let id = FrameSpec::IDENTITY;
        match self.stage {
            0 => {
                self.stage = 1;
                Decision::Fire(Step::new().look(m, id).compute(m))
            }
            1 => {
                if computed_null(view, m) {
                    self.mover_tries += 1;
                    if self.mover_tries >= bound {
                        return Decision::Abort(AdversaryError::TargetResisted(format!(
                            "mover {m} stayed for {bound} activations"
                        )));
                    }
                    self.stage = 0;
                    return Decision::Fire(Step::new().do_move(m));
                }
                self.stage = 2;
                Decision::Fire(Step::new().move_begin(m))
            }
            // partner looks on the mid-move view
            2 => {
                if self.activations >= bound {
                    return Decision::Abort(AdversaryError::TargetResisted(format!(
                        "robot {p} stayed for {bound} activations, colors {:?}",
                        self.colors
                    )));
                }
                self.activations += 1;
                self.colors.push(view.config.latest_light(p).clone());
                self.stage = 3;
                Decision::Fire(Step::new().look(p, id).show(m, 0.5).compute(p))
            }
            3 => {
                let moving = !computed_null(view, p);
                self.stage = if moving { 4 } else { 2 };
                let step = Step::new().do_move(p);
                Decision::Fire(if moving { step.move_end(m) } else { step })
            }
            _ => Decision::Stop,
        }
    }
}

/// Against FCOM robots under SSYNCH: while the color a robot sees is
/// attractive, only robot 0 is activated, each time seeing robot 1 at unit
/// distance, until the distance drops below half the initial one. Robot 1
/// is then activated once.
pub struct GcnclFcomS {
    rng: ChaCha8Rng,
    seen: Vec<(LightTuple, LightTuple)>,
    stage: u8,
    pumped: usize,
}

impl GcnclFcomS {
    pub fn new(seed: u64) -> Self {
        GcnclFcomS {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seen: Vec::new(),
            stage: 0,
            pumped: 0,
        }
    }
}

impl Adversary for GcnclFcomS {
    fn name(&self) -> String {
        "gcncl-fcom-s".into()
    }

    fn next_step(&mut self, view: &EngineView<'_>) -> Decision {
        if let Some(d) = check_class(view, SchedulerClass::Ssynch, 2) {
            return d;
        }
        let algo = view.algorithm;
        let bound = (algo.lights.state_space() as usize).max(1);
        let cap = 10 * bound * bound;
        let d0 = {
            let p = &view.trace.header().init_positions;
            p[0].dist(p[1])
        };
        let light = |r: RobotId| view.config.robots[r].light.clone();
        match self.stage {
            0 => {
                if distance(view) < d0 / 2.0 {
                    self.stage = 1;
                    let fr = unit_frame(&mut self.rng, view);
                    return Decision::Fire(Step::new().cycle(1, fr));
                }
                let attractive = match fraction(algo, &light(1), &light(0)) {
                    Ok(f) => f > 0.0,
                    Err(e) => return Decision::Abort(e),
                };
                let fr = unit_frame(&mut self.rng, view);
                if attractive {
                    self.pumped += 1;
                    if self.pumped > cap {
                        return Decision::Abort(AdversaryError::CapExceeded(cap));
                    }
                    return Decision::Fire(Step::new().cycle(0, fr));
                }
                let pair = (light(0), light(1));
                if self.seen.contains(&pair) {
                    return Decision::Abort(AdversaryError::NeverAttractive);
                }
                self.seen.push(pair);
                let fr1 = unit_frame(&mut self.rng, view);
                Decision::Fire(Step::new().cycle(0, fr).cycle(1, fr1))
            }
            _ => Decision::Stop,
        }
    }
}
