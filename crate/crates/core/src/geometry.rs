//! Planar geometry: vectors, oriented boxes, polygons and ray queries.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or displacement in the road plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `angle` (radians, counter-clockwise from +x).
    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    /// Rotates counter-clockwise by `angle` radians about the origin.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// An oriented rectangle: a vehicle footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Self {
            center,
            heading,
            length,
            width,
        }
    }

    /// Unit axes (longitudinal, lateral).
    pub fn axes(&self) -> [Vec2; 2] {
        let f = Vec2::from_angle(self.heading);
        [f, f.perp()]
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let [f, l] = self.axes();
        let hf = f * (self.length * 0.5);
        let hl = l * (self.width * 0.5);
        [
            self.center + hf + hl,
            self.center - hf + hl,
            self.center - hf - hl,
            self.center + hf - hl,
        ]
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    fn half_extent_on(&self, axis: Vec2) -> f64 {
        let [f, l] = self.axes();
        0.5 * self.length * f.dot(axis).abs() + 0.5 * self.width * l.dot(axis).abs()
    }

    /// Separating-axis overlap test over the four face normals. Touching
    /// boxes count as overlapping.
    pub fn overlaps(&self, other: &Obb) -> bool {
        let d = other.center - self.center;
        let reach = self.circumradius() + other.circumradius();
        if d.dot(d) > reach * reach {
            return false;
        }
        let [a0, a1] = self.axes();
        let [b0, b1] = other.axes();
        for axis in [a0, a1, b0, b1] {
            let sep = d.dot(axis).abs();
            if sep > self.half_extent_on(axis) + other.half_extent_on(axis) {
                return false;
            }
        }
        true
    }

    /// True if `p` lies inside or on the boundary.
    pub fn contains(&self, p: Vec2) -> bool {
        let [f, l] = self.axes();
        let d = p - self.center;
        d.dot(f).abs() <= 0.5 * self.length && d.dot(l).abs() <= 0.5 * self.width
    }

    /// Euclidean distance between the two rectangles; zero when they overlap.
    pub fn distance_to(&self, other: &Obb) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let ca = self.corners();
        let cb = other.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let (a0, a1) = (ca[i], ca[(i + 1) % 4]);
            let (b0, b1) = (cb[i], cb[(i + 1) % 4]);
            for j in 0..4 {
                best = best.min(point_segment_distance(cb[j], a0, a1));
                best = best.min(point_segment_distance(ca[j], b0, b1));
            }
        }
        best
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Distance along the ray `origin + t·dir` (dir unit) to segment `ab`, if hit.
pub fn ray_segment_hit(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let seg = b - a;
    let denom = dir.cross(seg);
    if denom.abs() < 1e-12 {
        return None;
    }
    let ao = a - origin;
    let t = ao.cross(seg) / denom;
    let u = ao.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Proper or touching intersection of segments `p0p1` and `q0q1`.
pub fn segments_intersect(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> bool {
    fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
        (b - a).cross(c - a)
    }
    fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
        p.x >= a.x.min(b.x) - 1e-12
            && p.x <= a.x.max(b.x) + 1e-12
            && p.y >= a.y.min(b.y) - 1e-12
            && p.y <= a.y.max(b.y) + 1e-12
    }
    let d1 = orient(q0, q1, p0);
    let d2 = orient(q0, q1, p1);
    let d3 = orient(p0, p1, q0);
    let d4 = orient(p0, p1, q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q0, q1, p0))
        || (d2 == 0.0 && on_segment(q0, q1, p1))
        || (d3 == 0.0 && on_segment(p0, p1, q0))
        || (d4 == 0.0 && on_segment(p0, p1, q1))
}

/// Closed polygon given by its vertex ring (last vertex implicitly joins the first).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// At least three vertices and no two non-adjacent edges touch.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            if edges[i].0 == edges[i].1 {
                return false;
            }
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(edges[i].0, edges[i].1, edges[j].0, edges[j].1) {
                    return false;
                }
            }
        }
        true
    }

    /// True if segment `ab` touches any polygon edge.
    pub fn crosses_boundary(&self, a: Vec2, b: Vec2) -> bool {
        self.edges().any(|(p, q)| segments_intersect(a, b, p, q))
    }

    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Arc-length parameterized polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

/// Nearest-point query result on a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the nearest point.
    pub s: f64,
    /// Signed lateral offset, positive to the left of travel direction.
    pub lateral: f64,
    /// Tangent heading at the nearest point.
    pub heading: f64,
    pub distance: f64,
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += p.distance(points[i - 1]);
            }
            cumulative.push(acc);
        }
        Self { points, cumulative }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn segment_heading(&self, i: usize) -> f64 {
        (self.points[i + 1] - self.points[i]).angle()
    }

    /// Point and tangent heading at arc length `s`, clamped to the ends.
    pub fn sample(&self, s: f64) -> (Vec2, f64) {
        let n = self.points.len();
        if n == 1 {
            return (self.points[0], 0.0);
        }
        let s = s.clamp(0.0, self.length());
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let seg_len = self.cumulative[i + 1] - self.cumulative[i];
        let t = if seg_len > 0.0 {
            (s - self.cumulative[i]) / seg_len
        } else {
            0.0
        };
        let p = self.points[i] + (self.points[i + 1] - self.points[i]) * t;
        (p, self.segment_heading(i))
    }

    /// Nearest point on the polyline; ties resolve to the smallest arc length.
    pub fn project(&self, p: Vec2) -> Projection {
        if self.points.len() == 1 {
            let d = p.distance(self.points[0]);
            return Projection {
                s: 0.0,
                lateral: 0.0,
                heading: 0.0,
                distance: d,
            };
        }
        let mut best = Projection {
            s: 0.0,
            lateral: 0.0,
            heading: 0.0,
            distance: f64::INFINITY,
        };
        for i in 0..self.points.len() - 1 {
            let a = self.points[i];
            let b = self.points[i + 1];
            let ab = b - a;
            let len2 = ab.dot(ab);
            if len2 == 0.0 {
                continue;
            }
            let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
            let q = a + ab * t;
            let d = p.distance(q);
            if d < best.distance {
                let len = len2.sqrt();
                best = Projection {
                    s: self.cumulative[i] + t * len,
                    lateral: ab.cross(p - a) / len,
                    heading: ab.angle(),
                    distance: d,
                };
            }
        }
        best
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.project(p).distance
    }
}

/// Rounds to the 1e-6 grid used by the canonical scenario file format.
pub fn quantize(x: f64) -> f64 {
    let q: f64 = format!("{x:.6}").parse().unwrap_or(x);
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// Quantizes a heading and keeps it inside (−π, π].
pub fn quantize_heading(h: f64) -> f64 {
    let q = quantize(normalize_angle(h));
    if q > PI {
        quantize(q - 2.0 * PI)
    } else if q <= -PI {
        quantize(q + 2.0 * PI)
    } else {
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-9);
        assert!((normalize_angle(0.5 + 4.0 * PI) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn quantized_heading_stays_in_range() {
        let q = quantize_heading(PI);
        assert!(q <= PI && q > -PI);
        let q = quantize_heading(-PI + 1e-9);
        assert!(q <= PI && q > -PI);
    }

    #[test]
    fn obb_identical_overlap_and_far_apart() {
        let a = Obb::new(Vec2::ZERO, 0.3, 4.5, 2.0);
        assert!(a.overlaps(&a));
        let b = Obb::new(Vec2::new(10.0, 0.0), 0.3, 4.5, 2.0);
        assert!(!a.overlaps(&b));
        assert!((a.distance_to(&b) - 0.0).abs() > 1.0);
    }

    #[test]
    fn obb_distance_axis_aligned() {
        let a = Obb::new(Vec2::ZERO, 0.0, 4.0, 2.0);
        let b = Obb::new(Vec2::new(5.0, 0.0), 0.0, 4.0, 2.0);
        assert!((a.distance_to(&b) - 1.0).abs() < 1e-12);
        let c = Obb::new(Vec2::new(0.0, 3.5), 0.0, 4.0, 2.0);
        assert!((a.distance_to(&c) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn polygon_simple_and_contains() {
        let sq = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(4.0, 4.0),
            Vec2::new(0.0, 4.0),
        ]);
        assert!(sq.is_simple());
        assert!(sq.contains(Vec2::new(1.0, 1.0)));
        assert!(!sq.contains(Vec2::new(5.0, 1.0)));
        let bow = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 4.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(0.0, 4.0),
        ]);
        assert!(!bow.is_simple());
    }

    #[test]
    fn polyline_projection_and_sampling() {
        let pl = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)]);
        assert_eq!(pl.length(), 20.0);
        let pr = pl.project(Vec2::new(4.0, 1.0));
        assert!((pr.s - 4.0).abs() < 1e-12);
        assert!((pr.lateral - 1.0).abs() < 1e-12);
        let (p, h) = pl.sample(15.0);
        assert!((p.x - 10.0).abs() < 1e-12 && (p.y - 5.0).abs() < 1e-12);
        assert!((h - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ray_hits_segment() {
        let t = ray_segment_hit(
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Vec2::new(5.0, -1.0),
            Vec2::new(5.0, 1.0),
        );
        assert_eq!(t, Some(5.0));
        let miss = ray_segment_hit(
            Vec2::ZERO,
            Vec2::new(-1.0, 0.0),
            Vec2::new(5.0, -1.0),
            Vec2::new(5.0, 1.0),
        );
        assert_eq!(miss, None);
    }
}
