//! Planar geometry primitives shared across the crate.
//!
//! Coordinates live in a local planar frame measured in meters.

use serde::{Deserialize, Serialize};

pub const TAU: f64 = std::f64::consts::TAU;

/// A point in the local planar frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing of `other` as seen from `self`, in [0, 2π).
    pub fn bearing_to(&self, other: Point) -> f64 {
        normalize_angle((other.y - self.y).atan2(other.x - self.x))
    }

    /// The point `dist` meters away along `angle`.
    pub fn offset(&self, angle: f64, dist: f64) -> Point {
        Point::new(self.x + dist * angle.cos(), self.y + dist * angle.sin())
    }

    /// Linear interpolation; t=0 is self, t=1 is other.
    pub fn lerp(&self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Map an angle into [0, 2π).
pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a % TAU;
    if a < 0.0 {
        a += TAU;
    }
    a
}

/// Absolute angular difference, wrapped into [0, π].
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    d.min(TAU - d)
}

/// Distance from `p` to the closed segment `(a, b)`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    p.distance(project_onto_segment(p, a, b).0)
}

/// Closest point on segment `(a, b)` to `p`, plus the parameter t in [0, 1].
pub fn project_onto_segment(p: Point, a: Point, b: Point) -> (Point, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len_sq = dx * dx + dy * dy;
    if len_sq == 0.0 {
        return (a, 0.0);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0);
    (a.lerp(b, t), t)
}

/// True when segments (a, b) and (c, d) properly intersect or overlap.
///
/// Touching at a shared endpoint does not count: road segments meeting at a
/// vertex is the normal planar case.
pub fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let shares_endpoint = |p: Point, q: Point| p.distance(q) < 1e-9;
    if shares_endpoint(a, c) || shares_endpoint(a, d) || shares_endpoint(b, c) || shares_endpoint(b, d)
    {
        return false;
    }

    let orient = |p: Point, q: Point, r: Point| -> f64 {
        (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    };
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }

    let on_segment = |p: Point, q: Point, r: Point| -> bool {
        orient(p, q, r).abs() < 1e-9
            && r.x >= p.x.min(q.x) - 1e-9
            && r.x <= p.x.max(q.x) + 1e-9
            && r.y >= p.y.min(q.y) - 1e-9
            && r.y <= p.y.max(q.y) + 1e-9
    };
    on_segment(a, b, c) || on_segment(a, b, d) || on_segment(c, d, a) || on_segment(c, d, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_wrapping() {
        assert!((normalize_angle(-0.1) - (TAU - 0.1)).abs() < 1e-12);
        assert!((angle_difference(0.05, TAU - 0.05) - 0.1).abs() < 1e-12);
        assert_eq!(angle_difference(1.0, 1.0), 0.0);
    }

    #[test]
    fn segment_projection() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(10.0, 0.0);
        assert_eq!(point_segment_distance(Point::new(5.0, 3.0), a, b), 3.0);
        assert_eq!(point_segment_distance(Point::new(-4.0, 0.0), a, b), 4.0);
        let (q, t) = project_onto_segment(Point::new(2.5, 1.0), a, b);
        assert_eq!((q.x, q.y), (2.5, 0.0));
        assert!((t - 0.25).abs() < 1e-12);
    }

    #[test]
    fn crossing_detection() {
        let p = Point::new;
        assert!(segments_cross(p(0., 0.), p(2., 2.), p(0., 2.), p(2., 0.)));
        // Shared endpoint is not a crossing.
        assert!(!segments_cross(p(0., 0.), p(2., 2.), p(2., 2.), p(4., 0.)));
        assert!(!segments_cross(p(0., 0.), p(1., 0.), p(0., 1.), p(1., 1.)));
        // Collinear overlap counts.
        assert!(segments_cross(p(0., 0.), p(3., 0.), p(1., 0.), p(4., 0.)));
    }
}
