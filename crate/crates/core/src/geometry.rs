//! Planar rigid motions, polygons and contact primitives.
//!
//! Everything here is a pure function of immutable values. Block outlines are
//! rectilinear and usually non-convex, so collision queries work on
//! [`CompoundPolygon`]s: an outline plus the convex parts it decomposes into.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Penetration depths at or below this are treated as touching.
pub const CONTACT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Counterclockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Shortest angular distance, in [0, π].
pub fn ang_dist(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

/// An element of SE(2): a block pose or a relative offset between frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    /// Builds a pose, normalizing the heading.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    #[inline]
    pub fn translation(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Maps a point from this frame into the parent frame.
    #[inline]
    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotate(self.theta) + self.translation()
    }

    /// `self ∘ other`: the frame `other` expressed through `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let t = self.apply(other.translation());
        Pose2::new(t.x, t.y, self.theta + other.theta)
    }

    pub fn inverse(&self) -> Pose2 {
        let t = (-self.translation()).rotate(-self.theta);
        Pose2::new(t.x, t.y, -self.theta)
    }

    /// Pose of `other` in the frame of `self`.
    pub fn relative_to_self(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }
}

pub fn compose(p: &Pose2, q: &Pose2) -> Pose2 {
    p.compose(q)
}

pub fn invert(p: &Pose2) -> Pose2 {
    p.inverse()
}

/// `compose(invert(a), b)`, so that `compose(a, relative_pose(a, b)) == b`.
pub fn relative_pose(a: &Pose2, b: &Pose2) -> Pose2 {
    a.relative_to_self(b)
}

/// Simple polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    /// Axis-aligned rectangle centred at `center`.
    pub fn rect(center: Vec2, width: f64, height: f64) -> Self {
        let (hw, hh) = (width / 2.0, height / 2.0);
        Self::new(vec![
            Vec2::new(center.x - hw, center.y - hh),
            Vec2::new(center.x + hw, center.y - hh),
            Vec2::new(center.x + hw, center.y + hh),
            Vec2::new(center.x - hw, center.y + hh),
        ])
    }

    /// Shoelace signed area; positive for counterclockwise order.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.vertices[i].cross(self.vertices[(i + 1) % n]);
        }
        acc / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let w = p.cross(q);
            a += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Vec2::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    /// Even-odd rule; points on the boundary may go either way.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    pub fn transformed(&self, pose: &Pose2) -> Polygon {
        Polygon::new(self.vertices.iter().map(|&v| pose.apply(v)).collect())
    }
}

pub fn transform_polygon(p: &Pose2, poly: &Polygon) -> Polygon {
    poly.transformed(p)
}

/// Andrew's monotone chain. Returns the hull counterclockwise without
/// collinear points; fewer than three points when the input is degenerate.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Area of the convex hull; zero for collinear or fewer than three points.
pub fn convex_hull_area(points: &[Vec2]) -> f64 {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return 0.0;
    }
    Polygon::new(hull).area()
}

/// A rectilinear outline together with its convex decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundPolygon {
    pub outline: Polygon,
    pub parts: Vec<Polygon>,
}

impl CompoundPolygon {
    pub fn convex(poly: Polygon) -> Self {
        Self {
            parts: vec![poly.clone()],
            outline: poly,
        }
    }

    pub fn transformed(&self, pose: &Pose2) -> CompoundPolygon {
        CompoundPolygon {
            outline: self.outline.transformed(pose),
            parts: self.parts.iter().map(|p| p.transformed(pose)).collect(),
        }
    }

    pub fn translated(&self, d: Vec2) -> CompoundPolygon {
        self.transformed(&Pose2::new(d.x, d.y, 0.0))
    }

    pub fn area(&self) -> f64 {
        self.parts.iter().map(Polygon::area).sum()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.parts.iter().any(|part| part.contains(p))
    }
}

/// Result of a penetration query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Translation that separates the second body from the first.
    pub mtv: Vec2,
    pub contact: Vec2,
}

impl Contact {
    pub fn depth(&self) -> f64 {
        self.mtv.norm()
    }
}

fn project(poly: &[Vec2], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in poly {
        let d = v.dot(axis);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Midpoint of the vertices of `poly` that are extreme along `dir`.
fn support_mid(poly: &[Vec2], dir: Vec2) -> Vec2 {
    let best = poly
        .iter()
        .map(|v| v.dot(dir))
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (1.0 + best.abs());
    let (mut acc, mut n) = (Vec2::ZERO, 0.0);
    for v in poly {
        if v.dot(dir) >= best - tol {
            acc = acc + *v;
            n += 1.0;
        }
    }
    acc * (1.0 / n)
}

/// Separating-axis test on two convex polygons.
fn convex_overlap(a: &[Vec2], b: &[Vec2]) -> Option<Contact> {
    let mut best_depth = f64::INFINITY;
    let mut best_axis = Vec2::ZERO;
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let edge = poly[(i + 1) % n] - poly[i];
            let len = edge.norm();
            if len == 0.0 {
                continue;
            }
            let axis = Vec2::new(edge.y / len, -edge.x / len);
            let (amin, amax) = project(a, axis);
            let (bmin, bmax) = project(b, axis);
            let depth = (amax - bmin).min(bmax - amin);
            if depth <= CONTACT_EPS {
                return None;
            }
            if depth < best_depth {
                best_depth = depth;
                // orient so that moving b along the axis separates it from a
                best_axis = if amax - bmin < bmax - amin { axis } else { -axis };
            }
        }
    }
    let pa = support_mid(a, best_axis);
    let pb = support_mid(b, -best_axis);
    Some(Contact {
        mtv: best_axis * best_depth,
        contact: (pa + pb) * 0.5,
    })
}

/// Minimum translation that moves `b` out of `a`, resolved over the deepest
/// pair of convex parts. `None` when the interiors are disjoint.
pub fn polygon_overlap(a: &CompoundPolygon, b: &CompoundPolygon) -> Option<Contact> {
    let mut best: Option<Contact> = None;
    for pa in &a.parts {
        for pb in &b.parts {
            if let Some(c) = convex_overlap(&pa.vertices, &pb.vertices) {
                if best.map_or(true, |bc| c.depth() > bc.depth()) {
                    best = Some(c);
                }
            }
        }
    }
    best
}

fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
    a + ab * t
}

fn circle_convex(center: Vec2, radius: f64, poly: &[Vec2]) -> Option<Contact> {
    let n = poly.len();
    // signed distance to the supporting line of each edge; all negative inside
    let mut inside = true;
    let mut max_sd = f64::NEG_INFINITY;
    let mut max_normal = Vec2::ZERO;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let e = b - a;
        let normal = Vec2::new(e.y, -e.x) * (1.0 / e.norm());
        let sd = (center - a).dot(normal);
        if sd > 0.0 {
            inside = false;
        }
        if sd > max_sd {
            max_sd = sd;
            max_normal = normal;
        }
    }
    if inside {
        // push the polygon so the face closest to the center clears the circle
        let depth = radius - max_sd;
        return Some(Contact {
            mtv: -max_normal * depth,
            contact: center,
        });
    }
    let mut closest = poly[0];
    let mut best = f64::INFINITY;
    for i in 0..n {
        let q = closest_on_segment(center, poly[i], poly[(i + 1) % n]);
        let d = (q - center).norm_sq();
        if d < best {
            best = d;
            closest = q;
        }
    }
    let dist = best.sqrt();
    let depth = radius - dist;
    if depth <= CONTACT_EPS || dist == 0.0 {
        return None;
    }
    let dir = (closest - center) * (1.0 / dist);
    Some(Contact {
        mtv: dir * depth,
        contact: closest,
    })
}

/// Penetration of a disc into a compound polygon; the returned translation
/// moves the polygon clear of the disc.
pub fn circle_overlap(center: Vec2, radius: f64, shape: &CompoundPolygon) -> Option<Contact> {
    let mut best: Option<Contact> = None;
    for part in &shape.parts {
        if let Some(c) = circle_convex(center, radius, &part.vertices) {
            if best.map_or(true, |bc| c.depth() > bc.depth()) {
                best = Some(c);
            }
        }
    }
    best
}

/// Earliest fraction `t` in `[0, 1]` of the segment `start → end` at which a
/// disc of `radius` moving along it first touches `shape`.
pub fn swept_disc_contact(start: Vec2, end: Vec2, radius: f64, shape: &CompoundPolygon) -> Option<f64> {
    let d = end - start;
    let mut best: Option<f64> = None;
    let mut keep = |t: f64| {
        if (0.0..=1.0).contains(&t) && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    };
    for part in &shape.parts {
        let poly = &part.vertices;
        let n = poly.len();
        let dist = if part.contains(start) {
            0.0
        } else {
            (0..n)
                .map(|i| (closest_on_segment(start, poly[i], poly[(i + 1) % n]) - start).norm())
                .fold(f64::INFINITY, f64::min)
        };
        if dist <= radius {
            return Some(0.0);
        }
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let e = b - a;
            let normal = Vec2::new(e.y, -e.x) * (1.0 / e.norm());
            // the edge pushed out by the radius
            let a2 = a + normal * radius;
            let den = d.cross(e);
            if den.abs() > 1e-15 {
                let w = a2 - start;
                let t = w.cross(e) / den;
                let u = w.cross(d) / den;
                if (0.0..=1.0).contains(&u) {
                    keep(t);
                }
            }
            // rounded corner at a
            let f = start - a;
            let (qa, qb, qc) = (d.dot(d), 2.0 * f.dot(d), f.dot(f) - radius * radius);
            let disc = qb * qb - 4.0 * qa * qc;
            if qa > 0.0 && disc >= 0.0 {
                keep((-qb - disc.sqrt()) / (2.0 * qa));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn pose_close(a: &Pose2, b: &Pose2) -> bool {
        close(a.x, b.x, 1e-9) && close(a.y, b.y, 1e-9) && ang_dist(a.theta, b.theta) <= 1e-9
    }

    #[test]
    fn compose_examples() {
        let q = Pose2::new(0.3, -0.2, 1.1);
        assert!(pose_close(&compose(&Pose2::IDENTITY, &q), &q));
        let r = compose(&Pose2::new(1.0, 0.0, PI / 2.0), &Pose2::new(0.0, 1.0, 0.0));
        assert!(pose_close(&r, &Pose2::new(0.0, 0.0, PI / 2.0)));
        let p = Pose2::new(0.7, 0.1, -2.5);
        assert!(pose_close(&compose(&p, &invert(&p)), &Pose2::IDENTITY));
    }

    #[test]
    fn invert_examples() {
        assert!(pose_close(&invert(&Pose2::IDENTITY), &Pose2::IDENTITY));
        assert!(pose_close(&invert(&Pose2::new(1.0, 0.0, 0.0)), &Pose2::new(-1.0, 0.0, 0.0)));
        assert!(pose_close(
            &invert(&Pose2::new(0.0, 0.0, PI / 2.0)),
            &Pose2::new(0.0, 0.0, -PI / 2.0)
        ));
    }

    #[test]
    fn relative_pose_examples() {
        let p = Pose2::new(0.2, 0.4, 0.9);
        assert!(pose_close(&relative_pose(&p, &p), &Pose2::IDENTITY));
        assert!(pose_close(&relative_pose(&Pose2::IDENTITY, &p), &p));
        let r = relative_pose(&Pose2::new(1.0, 1.0, 0.0), &Pose2::new(2.0, 1.0, 0.0));
        assert!(pose_close(&r, &Pose2::new(1.0, 0.0, 0.0)));
    }

    #[test]
    fn theta_is_normalized() {
        assert!(close(Pose2::new(0.0, 0.0, 3.0 * PI).theta, PI, 1e-12));
        assert!(close(Pose2::new(0.0, 0.0, -PI).theta, PI, 1e-12));
        assert!(close(normalize_angle(2.0 * PI), 0.0, 1e-12));
    }

    #[test]
    fn ang_dist_examples() {
        assert!(close(ang_dist(0.0, 2.0 * PI), 0.0, 1e-12));
        assert!(close(ang_dist(PI - 0.1, -PI + 0.1), 0.2, 1e-12));
        assert_eq!(ang_dist(0.3, 0.3), 0.0);
    }

    #[test]
    fn transform_polygon_examples() {
        let sq = Polygon::rect(Vec2::ZERO, 1.0, 1.0);
        assert_eq!(transform_polygon(&Pose2::IDENTITY, &sq), sq);
        let rot = transform_polygon(&Pose2::new(0.0, 0.0, PI / 2.0), &sq);
        for v in &rot.vertices {
            assert!(sq.vertices.iter().any(|w| (*v - *w).norm() < 1e-12));
        }
        let p = Pose2::new(0.4, -1.2, 0.77);
        assert!(close(transform_polygon(&p, &sq).area(), sq.area(), 1e-9));
    }

    #[test]
    fn hull_area_examples() {
        let sq = Polygon::rect(Vec2::new(0.075, 0.075), 0.15, 0.15);
        assert!(close(convex_hull_area(&sq.vertices), 0.0225, 1e-12));
        let mut pts = Polygon::rect(Vec2::new(0.5, 0.5), 1.0, 1.0).vertices;
        pts.push(Vec2::new(0.3, 0.6));
        assert!(close(convex_hull_area(&pts), 1.0, 1e-12));
        let line: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64, 2.0 * i as f64)).collect();
        assert_eq!(convex_hull_area(&line), 0.0);
        assert_eq!(convex_hull_area(&line[..2]), 0.0);
    }

    #[test]
    fn overlap_disjoint_and_offset_squares() {
        let a = CompoundPolygon::convex(Polygon::rect(Vec2::ZERO, 1.0, 1.0));
        let far = a.translated(Vec2::new(2.0, 0.0));
        assert!(polygon_overlap(&a, &far).is_none());
        let b = a.translated(Vec2::new(0.9, 0.0));
        let c = polygon_overlap(&a, &b).unwrap();
        assert!((c.mtv - Vec2::new(0.1, 0.0)).norm() < 1e-12);
        assert!(polygon_overlap(&a, &a.translated(Vec2::new(1.0, 0.0))).is_none());
    }

    #[test]
    fn circle_overlap_pushes_away() {
        let a = CompoundPolygon::convex(Polygon::rect(Vec2::ZERO, 1.0, 1.0));
        let c = circle_overlap(Vec2::new(-0.55, 0.0), 0.1, &a).unwrap();
        assert!((c.mtv - Vec2::new(0.05, 0.0)).norm() < 1e-12);
        assert!(circle_overlap(Vec2::new(-0.7, 0.0), 0.1, &a).is_none());
        // centre inside: polygon moves so the nearest face clears the disc
        let c = circle_overlap(Vec2::new(-0.4, 0.0), 0.1, &a).unwrap();
        assert!((c.mtv - Vec2::new(0.2, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn swept_disc_first_touch() {
        let a = CompoundPolygon::convex(Polygon::rect(Vec2::ZERO, 1.0, 1.0));
        let t = swept_disc_contact(Vec2::new(-2.0, 0.2), Vec2::new(0.0, 0.2), 0.5, &a).unwrap();
        assert!(close(t, 0.5, 1e-12), "{t}");
        // rounded corner: centre reaches distance r from (0.5, 0.5)
        let t = swept_disc_contact(Vec2::new(0.9, 2.0), Vec2::new(0.9, 0.0), 0.5, &a).unwrap();
        let y = 0.5 + (0.25f64 - 0.16).sqrt();
        assert!(close(t, (2.0 - y) / 2.0, 1e-12), "{t}");
        assert_eq!(swept_disc_contact(Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), 0.1, &a), Some(0.0));
        assert_eq!(swept_disc_contact(Vec2::new(0.55, 0.0), Vec2::new(3.0, 0.0), 0.1, &a), Some(0.0));
        assert!(swept_disc_contact(Vec2::new(-2.0, 0.7), Vec2::new(2.0, 0.7), 0.1, &a).is_none());
        assert!(swept_disc_contact(Vec2::new(-2.0, 0.0), Vec2::new(-1.0, 0.0), 0.1, &a).is_none());
    }
}
