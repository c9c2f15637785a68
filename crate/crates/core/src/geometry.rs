//! Planar points, per-robot local frames, and the chirality-based circular
//! ordering used to arrange occupied locations into a ring.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for parallelism and equality tests.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("fewer than 2 distinct locations")]
    DegenerateRing,
    #[error("invalid frame: {0}")]
    InvalidFrame(&'static str),
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[allow(clippy::should_implement_trait)]
impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(
            x.is_finite() && y.is_finite(),
            "non-finite point ({x}, {y})"
        );
        Point { x, y }
    }

    pub fn try_new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() {
            Ok(Point { x, y })
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    /// Point at fraction `t` of the way from `self` to `o`.
    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn midpoint(self, o: Point) -> Point {
        Point::new((self.x + o.x) / 2.0, (self.y + o.y) / 2.0)
    }

    pub fn rotate(self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl TryFrom<[f64; 2]> for Point {
    type Error = GeometryError;
    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Point::try_new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Handedness {
    Ccw,
    Cw,
}

impl Handedness {
    pub fn sign(self) -> f64 {
        match self {
            Handedness::Ccw => 1.0,
            Handedness::Cw => -1.0,
        }
    }
}

impl TryFrom<i8> for Handedness {
    type Error = GeometryError;
    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Handedness::Ccw),
            -1 => Ok(Handedness::Cw),
            _ => Err(GeometryError::InvalidFrame("handedness must be +1 or -1")),
        }
    }
}

impl From<Handedness> for i8 {
    fn from(h: Handedness) -> i8 {
        match h {
            Handedness::Ccw => 1,
            Handedness::Cw => -1,
        }
    }
}

/// A robot's private coordinate system at one Look.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub origin: Point,
    pub rotation: f64,
    pub unit: f64,
    pub handedness: Handedness,
}

impl LocalFrame {
    pub fn new(
        origin: Point,
        rotation: f64,
        unit: f64,
        handedness: Handedness,
    ) -> Result<Self, GeometryError> {
        if !(unit > 0.0 && unit.is_finite()) {
            return Err(GeometryError::InvalidFrame(
                "unit must be positive and finite",
            ));
        }
        if !rotation.is_finite() {
            return Err(GeometryError::InvalidFrame("rotation must be finite"));
        }
        Ok(LocalFrame {
            origin,
            rotation,
            unit,
            handedness,
        })
    }

    pub fn identity_at(origin: Point) -> Self {
        LocalFrame {
            origin,
            rotation: 0.0,
            unit: 1.0,
            handedness: Handedness::Ccw,
        }
    }

    pub fn to_local(&self, p: Point) -> Point {
        to_local(self, p)
    }

    pub fn to_global(&self, p: Point) -> Point {
        to_global(self, p)
    }
}

pub fn to_local(frame: &LocalFrame, p: Point) -> Point {
    let v = p.sub(frame.origin).rotate(-frame.rotation);
    let v = Point::new(v.x, v.y * frame.handedness.sign());
    v.scale(1.0 / frame.unit)
}

pub fn to_global(frame: &LocalFrame, p: Point) -> Point {
    let v = p.scale(frame.unit);
    let v = Point::new(v.x, v.y * frame.handedness.sign());
    v.rotate(frame.rotation).add(frame.origin)
}

/// Distinct locations in circular order; `suc`/`pred` walk the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    locations: Vec<Point>,
}

impl Ring {
    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn suc(&self, i: usize) -> usize {
        (i + 1) % self.locations.len()
    }

    pub fn pred(&self, i: usize) -> usize {
        (i + self.locations.len() - 1) % self.locations.len()
    }

    /// Index of a location, by exact coordinate equality.
    pub fn index_of(&self, p: Point) -> Option<usize> {
        self.locations.iter().position(|q| *q == p)
    }

    /// The cyclic sequence rotated so that it starts at `start`.
    pub fn rotated_from(&self, start: usize) -> Vec<Point> {
        let m = self.locations.len();
        (0..m).map(|k| self.locations[(start + k) % m]).collect()
    }
}

/// Arrange distinct locations by angle around their centroid.
///
/// Counterclockwise for [`Handedness::Ccw`], clockwise otherwise. Points at
/// the same angle (within [`REL_TOL`] radians) are ordered by increasing
/// distance from the centroid. A location sitting on the centroid is placed
/// right after the location that opens the widest angular gap, which keeps
/// the result invariant under rotation, translation and uniform scaling.
pub fn circular_order(points: &[Point], handedness: Handedness) -> Result<Ring, GeometryError> {
    let mut pts: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if !pts.contains(p) {
            pts.push(*p);
        }
    }
    if pts.len() < 2 {
        return Err(GeometryError::DegenerateRing);
    }
    let m = pts.len() as f64;
    let c = Point::new(
        pts.iter().map(|p| p.x).sum::<f64>() / m,
        pts.iter().map(|p| p.y).sum::<f64>() / m,
    );
    let radius = |p: &Point| p.dist(c);
    let spread = pts.iter().map(radius).fold(0.0_f64, f64::max);
    let sign = handedness.sign();

    let mut center: Option<Point> = None;
    let mut polar: Vec<(f64, f64, Point)> = Vec::with_capacity(pts.len());
    for p in &pts {
        let r = radius(p);
        if r <= REL_TOL * spread && center.is_none() {
            center = Some(*p);
            continue;
        }
        let v = p.sub(c);
        let a = (sign * v.y).atan2(v.x).rem_euclid(TAU);
        polar.push((a, r, *p));
    }
    polar.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Regroup near-equal angles and order each group by radius.
    let mut i = 0;
    while i < polar.len() {
        let mut j = i + 1;
        while j < polar.len() && polar[j].0 - polar[j - 1].0 <= REL_TOL {
            j += 1;
        }
        polar[i..j].sort_by(|a, b| a.1.total_cmp(&b.1));
        i = j;
    }

    let mut locations: Vec<Point> = polar.iter().map(|e| e.2).collect();
    if let Some(cp) = center {
        let k = polar.len();
        let gap = |i: usize| {
            if k == 1 {
                TAU
            } else {
                (polar[(i + 1) % k].0 - polar[i].0).rem_euclid(TAU)
            }
        };
        let mut best = 0;
        for i in 1..k {
            if gap(i) > gap(best) + REL_TOL {
                best = i;
            }
        }
        locations.insert(best + 1, cp);
    }
    Ok(Ring { locations })
}

/// Signed area of a polygon given in order (positive when counterclockwise).
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].cross(poly[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

/// Distance from `p` to the infinite line through `a` and `b`.
pub fn line_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b.sub(a);
    d.cross(p.sub(a)).abs() / d.norm()
}

/// Orthogonal projection of `p` onto the line through `a` and `b`.
pub fn foot_on_line(p: Point, a: Point, b: Point) -> Point {
    let d = b.sub(a);
    let t = p.sub(a).dot(d) / d.dot(d);
    a.add(d.scale(t))
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b.sub(a);
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a.add(d.scale(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn frame(ox: f64, oy: f64, rot: f64, unit: f64, hand: Handedness) -> LocalFrame {
        LocalFrame::new(Point::new(ox, oy), rot, unit, hand).unwrap()
    }

    #[test]
    fn to_local_examples() {
        let id = LocalFrame::identity_at(Point::ORIGIN);
        assert_eq!(to_local(&id, Point::new(3.0, 4.0)), Point::new(3.0, 4.0));
        let f = frame(1.0, 0.0, 0.0, 2.0, Handedness::Ccw);
        assert_eq!(to_local(&f, Point::new(3.0, 0.0)), Point::new(1.0, 0.0));
        let half = frame(0.0, 0.0, PI, 1.0, Handedness::Ccw);
        let p = to_local(&half, Point::new(1.0, 0.0));
        assert!((p.x + 1.0).abs() < 1e-15 && p.y.abs() < 1e-15);
    }

    #[test]
    fn to_global_examples() {
        let f = frame(1.0, 0.0, 0.0, 2.0, Handedness::Ccw);
        assert_eq!(to_global(&f, Point::new(1.0, 0.0)), Point::new(3.0, 0.0));
        let id = LocalFrame::identity_at(Point::ORIGIN);
        assert_eq!(to_global(&id, Point::ORIGIN), Point::ORIGIN);
    }

    #[test]
    fn reflection_flips_y() {
        let f = frame(0.0, 0.0, 0.0, 1.0, Handedness::Cw);
        assert_eq!(to_local(&f, Point::new(0.0, 2.0)), Point::new(0.0, -2.0));
    }

    #[test]
    fn frame_rejects_bad_unit() {
        assert!(LocalFrame::new(Point::ORIGIN, 0.0, 0.0, Handedness::Ccw).is_err());
        assert!(LocalFrame::new(Point::ORIGIN, 0.0, -1.0, Handedness::Ccw).is_err());
        assert!(LocalFrame::new(Point::ORIGIN, f64::NAN, 1.0, Handedness::Ccw).is_err());
    }

    #[test]
    fn point_json_rejects_non_finite() {
        assert!(serde_json::from_str::<Point>("[1.0, 2.5]").is_ok());
        assert!(serde_json::from_str::<Point>("[1e400, 0]").is_err());
    }

    #[test]
    fn ring_of_axis_points() {
        let pts = [
            Point::new(0.0, 1.0),
            Point::new(-1.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, -1.0),
        ];
        let ring = circular_order(&pts, Handedness::Ccw).unwrap();
        assert_eq!(
            ring.locations(),
            &[
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
                Point::new(-1.0, 0.0),
                Point::new(0.0, -1.0)
            ]
        );
        assert_eq!(ring.suc(3), 0);
        assert_eq!(ring.pred(0), 3);
    }

    #[test]
    fn clockwise_reverses_ring() {
        let pts = [
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(-1.0, 0.0),
        ];
        let ccw = circular_order(&pts, Handedness::Ccw).unwrap();
        let cw = circular_order(&pts, Handedness::Cw).unwrap();
        let i = cw.index_of(ccw.locations()[0]).unwrap();
        assert_eq!(cw.locations()[cw.pred(i)], ccw.locations()[1]);
    }

    #[test]
    fn two_points_form_a_ring() {
        let ring = circular_order(&[Point::ORIGIN, Point::new(1.0, 0.0)], Handedness::Ccw).unwrap();
        assert_eq!(ring.len(), 2);
        assert_eq!(ring.suc(0), ring.pred(0));
    }

    #[test]
    fn degenerate_ring() {
        assert_eq!(
            circular_order(&[Point::ORIGIN], Handedness::Ccw),
            Err(GeometryError::DegenerateRing)
        );
        assert_eq!(
            circular_order(&[Point::ORIGIN, Point::ORIGIN], Handedness::Ccw),
            Err(GeometryError::DegenerateRing)
        );
    }

    #[test]
    fn equal_angles_sorted_by_radius() {
        // centroid (1, 0): (2,0) and (3,0) share angle 0
        let pts = [
            Point::new(3.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(-1.0, 1.0),
            Point::new(0.0, -1.0),
        ];
        let ring = circular_order(&pts, Handedness::Ccw).unwrap();
        let a = ring.index_of(Point::new(2.0, 0.0)).unwrap();
        assert_eq!(ring.locations()[ring.suc(a)], Point::new(3.0, 0.0));
    }

    #[test]
    fn centroid_point_goes_after_widest_gap() {
        // Square corners plus its center; the gaps tie, so the first gap wins.
        let pts = [
            Point::ORIGIN,
            Point::new(1.0, 1.0),
            Point::new(-1.0, 1.0),
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
        ];
        let ring = circular_order(&pts, Handedness::Ccw).unwrap();
        assert_eq!(ring.len(), 5);
        assert!(ring.index_of(Point::ORIGIN).is_some());
        // Irregular fan: widest gap opens at (1,0) going to (-1, 0.2).
        let pts = [
            Point::new(1.0, 0.0),
            Point::new(-1.0, 0.2),
            Point::new(0.5, -0.1),
            Point::new(-0.5, -0.1),
        ];
        let c = Point::new(0.0, 0.0);
        let mut all = pts.to_vec();
        all.push(c);
        let ring = circular_order(&all, Handedness::Ccw).unwrap();
        let i = ring.index_of(Point::new(1.0, 0.0)).unwrap();
        assert_eq!(ring.locations()[ring.suc(i)], c);
    }

    /// Independent ordering oracle: pick the start point, then repeatedly take
    /// the point with the smallest positive turn around the centroid.
    fn oracle_cycle(pts: &[Point]) -> Vec<usize> {
        let m = pts.len() as f64;
        let c = Point::new(
            pts.iter().map(|p| p.x).sum::<f64>() / m,
            pts.iter().map(|p| p.y).sum::<f64>() / m,
        );
        let ang = |p: Point| {
            let v = p.sub(c);
            v.y.atan2(v.x)
        };
        let mut order = vec![0usize];
        while order.len() < pts.len() {
            let cur = ang(pts[*order.last().unwrap()]);
            let next = (0..pts.len())
                .filter(|i| !order.contains(i))
                .min_by(|&i, &j| {
                    let di = (ang(pts[i]) - cur).rem_euclid(TAU);
                    let dj = (ang(pts[j]) - cur).rem_euclid(TAU);
                    di.total_cmp(&dj)
                })
                .unwrap();
            order.push(next);
        }
        order
    }

    fn cycle_indices(ring: &Ring, pts: &[Point]) -> Vec<usize> {
        let start = ring.index_of(pts[0]).unwrap();
        ring.rotated_from(start)
            .iter()
            .map(|p| pts.iter().position(|q| q == p).unwrap())
            .collect()
    }

    fn well_spread(pts: &[Point]) -> bool {
        let m = pts.len() as f64;
        let c = Point::new(
            pts.iter().map(|p| p.x).sum::<f64>() / m,
            pts.iter().map(|p| p.y).sum::<f64>() / m,
        );
        let mut angs: Vec<f64> = pts
            .iter()
            .map(|p| p.sub(c))
            .map(|v| v.y.atan2(v.x))
            .collect();
        if pts.iter().any(|p| p.dist(c) < 1e-3) {
            return false;
        }
        angs.sort_by(f64::total_cmp);
        angs.windows(2).all(|w| w[1] - w[0] > 1e-6) && (angs[0] + TAU - angs[angs.len() - 1]) > 1e-6
    }

    fn point_set() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 2..=8)
            .prop_map(|v| {
                v.into_iter()
                    .map(|(x, y)| Point::new(x, y))
                    .collect::<Vec<_>>()
            })
            .prop_filter("well spread", |v| well_spread(v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip_within_1e12(ox in -50.0..50.0f64, oy in -50.0..50.0f64, rot in 0.0..TAU,
                                  lu in -4.0..4.0f64, refl in any::<bool>(),
                                  px in -50.0..50.0f64, py in -50.0..50.0f64) {
            let hand = if refl { Handedness::Cw } else { Handedness::Ccw };
            let f = frame(ox, oy, rot, 2f64.powf(lu), hand);
            let p = Point::new(px, py);
            let q = to_global(&f, to_local(&f, p));
            prop_assert!(q.dist(p) <= 1e-12, "{p:?} -> {q:?}");
            prop_assert_eq!(to_local(&f, f.origin), Point::ORIGIN);
        }

        #[test]
        fn ring_matches_oracle_and_is_similarity_invariant(pts in point_set(), rot in 0.0..TAU,
                                                           tx in -1e3..1e3f64, ty in -1e3..1e3f64,
                                                           ls in -4.0..4.0f64) {
            let ring = circular_order(&pts, Handedness::Ccw).unwrap();
            prop_assert_eq!(cycle_indices(&ring, &pts), oracle_cycle(&pts));
            let s = 2f64.powf(ls);
            let moved: Vec<Point> = pts.iter().map(|p| p.rotate(rot).scale(s).add(Point::new(tx, ty))).collect();
            let ring2 = circular_order(&moved, Handedness::Ccw).unwrap();
            prop_assert_eq!(cycle_indices(&ring2, &moved), cycle_indices(&ring, &pts));
        }

        #[test]
        fn chirality_gives_consistent_orientation(pts in prop::collection::vec(0.0..TAU, 3..=8), r in 1.0..10.0f64) {
            // points on a circle are in convex position
            let mut angs = pts.clone();
            angs.sort_by(f64::total_cmp);
            angs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            prop_assume!(angs.len() >= 3);
            let poly: Vec<Point> = angs.iter().map(|a| Point::new(r * a.cos(), r * a.sin())).collect();
            let ring = circular_order(&poly, Handedness::Ccw).unwrap();
            prop_assert!(signed_area(ring.locations()) > 0.0);
        }
    }
}
