//! Robot capability models, lights, and snapshot construction.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::{to_local, LocalFrame, Point};
use crate::trace::{Configuration, RobotId, Stage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("robot {0} has no outstanding Look")]
    NoOutstandingLook(RobotId),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("light error: {0}")]
    Light(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelClass {
    Oblot,
    Fsta,
    Fcom,
    Lumi,
}

impl ModelClass {
    pub const ALL: [ModelClass; 4] = [
        ModelClass::Oblot,
        ModelClass::Fsta,
        ModelClass::Fcom,
        ModelClass::Lumi,
    ];

    pub fn sees_own_light(self) -> bool {
        matches!(self, ModelClass::Fsta | ModelClass::Lumi)
    }

    pub fn sees_others_lights(self) -> bool {
        matches!(self, ModelClass::Fcom | ModelClass::Lumi)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelClass::Oblot => "OBLOT",
            ModelClass::Fsta => "FSTA",
            ModelClass::Fcom => "FCOM",
            ModelClass::Lumi => "LUMI",
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelClass {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelClass::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

/// One named sub-light and its finite color set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubLight {
    pub name: String,
    pub colors: Vec<String>,
}

/// The declared lights of an algorithm; empty for light-less robots.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LightDecl {
    pub subs: Vec<SubLight>,
}

impl LightDecl {
    pub fn none() -> Self {
        LightDecl::default()
    }

    pub fn single(name: &str, colors: &[&str]) -> Self {
        LightDecl::none().with(name, colors)
    }

    pub fn with(mut self, name: &str, colors: &[&str]) -> Self {
        self.subs.push(SubLight {
            name: name.to_string(),
            colors: colors.iter().map(|c| c.to_string()).collect(),
        });
        self
    }

    pub fn len(&self) -> usize {
        self.subs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subs.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.subs.iter().position(|s| s.name == name)
    }

    /// Number of distinct light tuples.
    pub fn state_space(&self) -> u64 {
        self.subs.iter().map(|s| s.colors.len() as u64).product()
    }

    /// Every sub-light at the first color of its set.
    pub fn initial(&self) -> LightTuple {
        LightTuple(vec![0; self.subs.len()])
    }

    pub fn contains(&self, l: &LightTuple) -> bool {
        l.0.len() == self.subs.len()
            && l.0
                .iter()
                .zip(&self.subs)
                .all(|(v, s)| (*v as usize) < s.colors.len())
    }

    /// All tuples, in lexicographic order.
    pub fn all_tuples(&self) -> Vec<LightTuple> {
        let mut out = vec![LightTuple(Vec::new())];
        for s in &self.subs {
            out = out
                .into_iter()
                .flat_map(|t| {
                    (0..s.colors.len()).map(move |c| {
                        let mut v = t.0.clone();
                        v.push(c as u8);
                        LightTuple(v)
                    })
                })
                .collect();
        }
        out
    }

    pub fn to_json(&self, l: &LightTuple) -> Value {
        let mut m = Map::new();
        for (s, v) in self.subs.iter().zip(&l.0) {
            m.insert(s.name.clone(), Value::String(s.colors[*v as usize].clone()));
        }
        Value::Object(m)
    }

    pub fn from_json(&self, v: &Value) -> Result<LightTuple, ModelError> {
        let obj = v
            .as_object()
            .ok_or_else(|| ModelError::Light("light must be an object".into()))?;
        let names: BTreeMap<&str, &str> = obj
            .iter()
            .map(|(k, v)| v.as_str().map(|s| (k.as_str(), s)))
            .collect::<Option<_>>()
            .ok_or_else(|| ModelError::Light("colors must be strings".into()))?;
        self.from_names(&names)
    }

    /// Build a tuple from color names; missing sub-lights take their first color.
    pub fn from_names(&self, names: &BTreeMap<&str, &str>) -> Result<LightTuple, ModelError> {
        for k in names.keys() {
            if self.index(k).is_none() {
                return Err(ModelError::Light(format!("undeclared sub-light {k:?}")));
            }
        }
        let mut out = Vec::with_capacity(self.subs.len());
        for s in &self.subs {
            let v =
                match names.get(s.name.as_str()) {
                    None => 0,
                    Some(c) => s.colors.iter().position(|x| x == c).ok_or_else(|| {
                        ModelError::Light(format!("color {c:?} not in {:?}", s.name))
                    })?,
                };
            out.push(v as u8);
        }
        Ok(LightTuple(out))
    }
}

/// A light value: one color index per declared sub-light.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LightTuple(pub Vec<u8>);

impl LightTuple {
    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }
}

/// Sub-light assignments produced by a Compute; unassigned sub-lights keep
/// their value, which lets a robot set a light it cannot see.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LightUpdate(pub Vec<(usize, u8)>);

impl LightUpdate {
    pub fn keep() -> Self {
        LightUpdate::default()
    }

    pub fn set(mut self, sub: usize, value: u8) -> Self {
        self.0.retain(|(i, _)| *i != sub);
        self.0.push((sub, value));
        self
    }

    pub fn replace(l: &LightTuple) -> Self {
        LightUpdate(l.0.iter().enumerate().map(|(i, v)| (i, *v)).collect())
    }

    pub fn apply(&self, l: &LightTuple) -> LightTuple {
        let mut out = l.clone();
        for &(i, v) in &self.0 {
            out.0[i] = v;
        }
        out
    }
}

/// Robots seen at one location. Co-located robots collapse into a single
/// entry; `lights` is the set of their visible lights (empty when the model
/// hides other robots' lights).
#[derive(Debug, Clone, PartialEq)]
pub struct Observed {
    pub pos: Point,
    pub lights: Vec<LightTuple>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub observer: RobotId,
    pub others: Vec<Observed>,
    pub own_light: Option<LightTuple>,
}

impl Snapshot {
    /// The entry for other robots sharing the observer's location.
    pub fn colocated(&self) -> Option<&Observed> {
        self.others.iter().find(|o| o.pos == Point::ORIGIN)
    }

    /// A snapshot with the given other-robot entries and no lights.
    pub fn plain(others: &[Point]) -> Self {
        Snapshot {
            observer: 0,
            others: others
                .iter()
                .map(|p| Observed {
                    pos: *p,
                    lights: Vec::new(),
                })
                .collect(),
            own_light: None,
        }
    }
}

pub fn build_snapshot(
    config: &Configuration,
    observer: RobotId,
    frame: &LocalFrame,
    model: ModelClass,
) -> Snapshot {
    build_snapshot_with(config, observer, frame, model, false)
}

/// Snapshot construction; `early_lights` exposes colors still in the pending
/// buffer (used only to test that verifiers notice a missing delay).
pub(crate) fn build_snapshot_with(
    config: &Configuration,
    observer: RobotId,
    frame: &LocalFrame,
    model: ModelClass,
    early_lights: bool,
) -> Snapshot {
    let light_of = |i: usize| {
        if early_lights {
            config.latest_light(i).clone()
        } else {
            config.robots[i].light.clone()
        }
    };
    let mut groups: Vec<(Point, Vec<LightTuple>)> = Vec::new();
    for i in 0..config.robots.len() {
        if i == observer {
            continue;
        }
        let p = config.exposed_pos(i);
        let slot = match groups.iter().position(|g| g.0 == p) {
            Some(k) => k,
            None => {
                groups.push((p, Vec::new()));
                groups.len() - 1
            }
        };
        if model.sees_others_lights() {
            groups[slot].1.push(light_of(i));
        }
    }
    let mut others: Vec<Observed> = groups
        .into_iter()
        .map(|(p, mut lights)| {
            lights.sort();
            lights.dedup();
            Observed {
                pos: to_local(frame, p),
                lights,
            }
        })
        .collect();
    for o in &mut others {
        if o.pos.x == 0.0 && o.pos.y == 0.0 {
            o.pos = Point::ORIGIN;
        }
    }
    others.sort_by(|a, b| {
        a.pos
            .x
            .total_cmp(&b.pos.x)
            .then(a.pos.y.total_cmp(&b.pos.y))
    });
    let own_light = model.sees_own_light().then(|| light_of(observer));
    Snapshot {
        observer,
        others,
        own_light,
    }
}

/// Record a Compute: the new light waits in the pending buffer until the next
/// relevant time, and the destination is kept for the Move.
pub fn commit_compute(
    config: &mut Configuration,
    robot: RobotId,
    destination: Point,
    new_light: LightTuple,
    time: u64,
) -> Result<(), ModelError> {
    let r = config
        .robots
        .get_mut(robot)
        .ok_or(ModelError::NoOutstandingLook(robot))?;
    if r.stage != Stage::Looked {
        return Err(ModelError::NoOutstandingLook(robot));
    }
    r.pending_light = Some(new_light);
    r.stage = Stage::Computed { dest: destination };
    config.time = config.time.max(time);
    Ok(())
}

/// Initial placement of a run, loaded from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub positions: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lights: Option<LightDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_colors: Option<Vec<BTreeMap<String, String>>>,
}

impl Scenario {
    pub fn new(positions: Vec<Point>) -> Self {
        Scenario {
            n: positions.len(),
            positions,
            model: None,
            lights: None,
            initial_colors: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let sc: Scenario =
            serde_json::from_str(s).map_err(|e| ModelError::Scenario(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n < 2 {
            return Err(ModelError::Scenario("need at least 2 robots".into()));
        }
        if self.positions.len() != self.n {
            return Err(ModelError::Scenario(format!(
                "n={} but {} positions",
                self.n,
                self.positions.len()
            )));
        }
        if let Some(c) = &self.initial_colors {
            if c.len() != self.n {
                return Err(ModelError::Scenario(
                    "initial_colors must list one entry per robot".into(),
                ));
            }
        }
        Ok(())
    }

    /// Initial lights under `decl`, checking any declaration the file carries.
    pub fn initial_lights(&self, decl: &LightDecl) -> Result<Vec<LightTuple>, ModelError> {
        if let Some(own) = &self.lights {
            if own != decl {
                return Err(ModelError::Scenario(
                    "light declaration does not match the algorithm".into(),
                ));
            }
        }
        match &self.initial_colors {
            None => Ok(vec![decl.initial(); self.n]),
            Some(cs) => cs
                .iter()
                .map(|m| {
                    decl.from_names(&m.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect())
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Handedness;
    use proptest::prelude::*;

    fn two_robots(decl: &LightDecl, l0: u8, l1: u8) -> Configuration {
        let mut a = decl.initial();
        let mut b = decl.initial();
        a.0[0] = l0;
        b.0[0] = l1;
        Configuration::new(&[Point::ORIGIN, Point::new(1.0, 0.0)], &[a, b])
    }

    fn decl3() -> LightDecl {
        LightDecl::single("color", &["c0", "c1", "c2"])
    }

    #[test]
    fn oblot_hides_all_lights() {
        let cfg = two_robots(&decl3(), 2, 1);
        let s = build_snapshot(
            &cfg,
            0,
            &LocalFrame::identity_at(Point::ORIGIN),
            ModelClass::Oblot,
        );
        assert_eq!(
            s.others,
            vec![Observed {
                pos: Point::new(1.0, 0.0),
                lights: vec![]
            }]
        );
        assert_eq!(s.own_light, None);
    }

    #[test]
    fn fcom_sees_only_others() {
        let cfg = two_robots(&decl3(), 2, 1);
        let s = build_snapshot(
            &cfg,
            0,
            &LocalFrame::identity_at(Point::ORIGIN),
            ModelClass::Fcom,
        );
        assert_eq!(s.others[0].lights, vec![LightTuple(vec![1])]);
        assert_eq!(s.own_light, None);
    }

    #[test]
    fn fsta_sees_only_own() {
        let cfg = two_robots(&decl3(), 2, 1);
        let s = build_snapshot(
            &cfg,
            0,
            &LocalFrame::identity_at(Point::ORIGIN),
            ModelClass::Fsta,
        );
        assert!(s.others[0].lights.is_empty());
        assert_eq!(s.own_light, Some(LightTuple(vec![2])));
    }

    #[test]
    fn colocated_robots_collapse_into_a_set() {
        let d = decl3();
        let lights = vec![
            LightTuple(vec![0]),
            LightTuple(vec![1]),
            LightTuple(vec![1]),
            LightTuple(vec![2]),
        ];
        let pos = [
            Point::ORIGIN,
            Point::ORIGIN,
            Point::ORIGIN,
            Point::new(2.0, 0.0),
        ];
        let cfg = Configuration::new(&pos, &lights);
        let s = build_snapshot(
            &cfg,
            0,
            &LocalFrame::identity_at(Point::ORIGIN),
            ModelClass::Lumi,
        );
        assert_eq!(s.others.len(), 2);
        let here = s.colocated().unwrap();
        assert_eq!(here.lights, vec![LightTuple(vec![1])]);
        assert!(d.contains(&here.lights[0]));
    }

    #[test]
    fn commit_delays_color_by_one_time() {
        let d = decl3();
        let mut cfg = two_robots(&d, 0, 0);
        cfg.robots[1].stage = Stage::Looked;
        commit_compute(&mut cfg, 1, Point::new(1.0, 0.0), LightTuple(vec![2]), 5).unwrap();
        let f = LocalFrame::identity_at(Point::ORIGIN);
        assert_eq!(
            build_snapshot(&cfg, 0, &f, ModelClass::Fcom).others[0].lights,
            vec![LightTuple(vec![0])]
        );
        cfg.promote();
        assert_eq!(
            build_snapshot(&cfg, 0, &f, ModelClass::Fcom).others[0].lights,
            vec![LightTuple(vec![2])]
        );
    }

    #[test]
    fn two_commits_at_one_time_expose_together() {
        let d = decl3();
        let mut cfg = two_robots(&d, 0, 0);
        for r in 0..2 {
            cfg.robots[r].stage = Stage::Looked;
            let here = cfg.robots[r].pos;
            commit_compute(&mut cfg, r, here, LightTuple(vec![1]), 3).unwrap();
        }
        assert!(cfg.robots.iter().all(|r| r.light == LightTuple(vec![0])));
        cfg.promote();
        assert!(cfg.robots.iter().all(|r| r.light == LightTuple(vec![1])));
    }

    #[test]
    fn null_commit_changes_only_bookkeeping() {
        let d = decl3();
        let mut cfg = two_robots(&d, 1, 0);
        cfg.robots[0].stage = Stage::Looked;
        commit_compute(&mut cfg, 0, Point::ORIGIN, LightTuple(vec![1]), 1).unwrap();
        cfg.promote();
        assert_eq!(cfg.robots[0].light, LightTuple(vec![1]));
        assert_eq!(cfg.robots[0].pos, Point::ORIGIN);
    }

    #[test]
    fn commit_without_look_fails() {
        let mut cfg = two_robots(&decl3(), 0, 0);
        assert_eq!(
            commit_compute(&mut cfg, 0, Point::ORIGIN, LightTuple(vec![1]), 1),
            Err(ModelError::NoOutstandingLook(0))
        );
    }

    #[test]
    fn light_json_round_trip_and_errors() {
        let d = LightDecl::single("color", &["A", "B"]).with("mode", &["x", "y", "z"]);
        assert_eq!(d.state_space(), 6);
        assert_eq!(d.all_tuples().len(), 6);
        let l = LightTuple(vec![1, 2]);
        assert_eq!(d.from_json(&d.to_json(&l)).unwrap(), l);
        assert!(d.from_json(&serde_json::json!({"color": "C"})).is_err());
        assert!(d.from_json(&serde_json::json!({"hue": "A"})).is_err());
    }

    #[test]
    fn scenario_parses_and_validates() {
        let s = Scenario::from_json(
            r#"{"n":2,"positions":[[0,0],[1,0]],"model":"FSTA",
               "lights":[{"name":"color","colors":["A","B"]}],
               "initial_colors":[{"color":"B"},{}]}"#,
        )
        .unwrap();
        let d = LightDecl::single("color", &["A", "B"]);
        assert_eq!(
            s.initial_lights(&d).unwrap(),
            vec![LightTuple(vec![1]), LightTuple(vec![0])]
        );
        assert!(Scenario::from_json(r#"{"n":3,"positions":[[0,0],[1,0]]}"#).is_err());
        assert!(Scenario::from_json(r#"{"n":1,"positions":[[0,0]]}"#).is_err());
    }

    fn random_config() -> impl Strategy<Value = (Vec<Point>, Vec<u8>)> {
        (2usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(
                    (-5i32..5, -5i32..5).prop_map(|(x, y)| Point::new(x as f64, y as f64)),
                    n,
                ),
                prop::collection::vec(0u8..3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn model_filter_rows((pos, ls) in random_config(), rot in 0.0..std::f64::consts::TAU, lu in -2.0..2.0f64) {
            let lights: Vec<LightTuple> = ls.iter().map(|c| LightTuple(vec![*c])).collect();
            let cfg = Configuration::new(&pos, &lights);
            let f = LocalFrame::new(pos[0], rot, 2f64.powf(lu), Handedness::Ccw).unwrap();
            for m in ModelClass::ALL {
                let s = build_snapshot(&cfg, 0, &f, m);
                prop_assert_eq!(s.own_light.is_some(), m.sees_own_light());
                let any_light = s.others.iter().any(|o| !o.lights.is_empty());
                prop_assert_eq!(any_light, m.sees_others_lights());
                // positions are the to_local images of the others' positions
                for (i, p) in pos.iter().enumerate().skip(1) {
                    let q = to_local(&f, *p);
                    let q = if q.x == 0.0 && q.y == 0.0 { Point::ORIGIN } else { q };
                    prop_assert!(s.others.iter().any(|o| o.pos == q), "robot {} missing", i);
                }
            }
        }

        #[test]
        fn oblot_ignores_lights((pos, ls) in random_config(), shift in 1u8..3) {
            let a: Vec<LightTuple> = ls.iter().map(|c| LightTuple(vec![*c])).collect();
            let b: Vec<LightTuple> = ls.iter().map(|c| LightTuple(vec![(*c + shift) % 3])).collect();
            let f = LocalFrame::identity_at(pos[0]);
            let sa = build_snapshot(&Configuration::new(&pos, &a), 0, &f, ModelClass::Oblot);
            let sb = build_snapshot(&Configuration::new(&pos, &b), 0, &f, ModelClass::Oblot);
            prop_assert_eq!(sa, sb);
        }
    }
}
