//! Planar geometry for polygonal domains with holes: membership tests,
//! segment visibility, and geodesic (shortest-path) distances.
//!
//! Predicates use double precision with an absolute epsilon of `1e-12` on
//! cross products; exact arithmetic is not attempted. This is a known
//! limitation for inputs at extreme coordinate scales.

mod geodesic;
mod polygon;
mod visibility;

pub use geodesic::{geodesic_distance, GeodesicEngine};
pub use polygon::PolygonDomain;
pub use visibility::segment_in_domain;

use serde::{Deserialize, Serialize};

/// Tolerance for classifying cross products as zero.
pub(crate) const ORIENT_EPS: f64 = 1e-12;

/// A point in the plane. Coordinates must be finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite(), "non-finite coordinate");
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Euclidean distance to `other`.
    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

/// Signed cross product of (a - o) x (b - o).
pub(crate) fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Sign of the cross product under `ORIENT_EPS`: -1, 0, or 1.
pub(crate) fn orient_sign(o: Point2, a: Point2, b: Point2) -> i8 {
    let c = cross(o, a, b);
    if c > ORIENT_EPS {
        1
    } else if c < -ORIENT_EPS {
        -1
    } else {
        0
    }
}

/// Distance from point `p` to the closed segment `ab`.
pub(crate) fn dist_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(&a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(&Point2::new(a.x + t * dx, a.y + t * dy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_orientation() {
        let o = Point2::new(0.0, 0.0);
        let a = Point2::new(1.0, 0.0);
        let b = Point2::new(0.0, 1.0);
        assert!(cross(o, a, b) > 0.0);
        assert_eq!(orient_sign(o, a, b), 1);
        assert_eq!(orient_sign(o, b, a), -1);
        assert_eq!(orient_sign(o, a, Point2::new(2.0, 0.0)), 0);
    }

    #[test]
    fn point_segment_distance() {
        let a = Point2::new(0.0, 0.0);
        let b = Point2::new(2.0, 0.0);
        assert!((dist_point_segment(Point2::new(1.0, 1.0), a, b) - 1.0).abs() < 1e-15);
        assert!((dist_point_segment(Point2::new(-1.0, 0.0), a, b) - 1.0).abs() < 1e-15);
        assert_eq!(dist_point_segment(Point2::new(1.0, 0.0), a, b), 0.0);
    }
}
