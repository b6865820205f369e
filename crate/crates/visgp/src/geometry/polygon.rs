//! Polygonal domains: an outer ring plus optional hole rings.

use super::{dist_point_segment, orient_sign, Point2};
use crate::error::{Error, Result};

/// A planar region bounded by a simple outer ring minus a set of hole rings.
///
/// Rings are stored without a closing duplicate vertex and are normalized on
/// construction: outer counterclockwise, holes clockwise. Rings may touch at
/// isolated vertices (weakly simple), which is how pinched domains such as
/// two squares joined at a corner are represented; edges must not cross
/// transversally.
///
/// Points within `boundary_tolerance` of any ring edge count as inside, so
/// observations digitized exactly on a shoreline are not rejected. The
/// default tolerance is `1e-9` times the domain diameter.
#[derive(Debug, Clone)]
pub struct PolygonDomain {
    outer: Vec<Point2>,
    holes: Vec<Vec<Point2>>,
    boundary_tolerance: f64,
    diameter: f64,
}

impl PolygonDomain {
    /// Builds a domain from raw rings, validating and normalizing them.
    pub fn new(outer: Vec<Point2>, holes: Vec<Vec<Point2>>) -> Result<Self> {
        let mut outer = clean_ring(outer, "outer")?;
        if signed_area(&outer) < 0.0 {
            outer.reverse();
        }
        let mut fixed_holes = Vec::with_capacity(holes.len());
        for (hi, hole) in holes.into_iter().enumerate() {
            let mut hole = clean_ring(hole, &format!("hole {hi}"))?;
            if signed_area(&hole) > 0.0 {
                hole.reverse();
            }
            fixed_holes.push(hole);
        }

        let diameter = ring_diameter(&outer);
        let dom = Self {
            outer,
            holes: fixed_holes,
            boundary_tolerance: 1e-9 * diameter,
            diameter,
        };
        dom.validate()?;
        Ok(dom)
    }

    /// Overrides the boundary tolerance (domain units).
    pub fn with_boundary_tolerance(mut self, tol: f64) -> Self {
        assert!(tol >= 0.0 && tol.is_finite());
        self.boundary_tolerance = tol;
        self
    }

    pub fn outer(&self) -> &[Point2] {
        &self.outer
    }

    pub fn holes(&self) -> &[Vec<Point2>] {
        &self.holes
    }

    pub fn boundary_tolerance(&self) -> f64 {
        self.boundary_tolerance
    }

    /// Greatest distance between two outer-ring vertices.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Axis-aligned bounding box of the outer ring.
    pub fn bbox(&self) -> (Point2, Point2) {
        let mut lo = Point2 {
            x: f64::INFINITY,
            y: f64::INFINITY,
        };
        let mut hi = Point2 {
            x: f64::NEG_INFINITY,
            y: f64::NEG_INFINITY,
        };
        for p in &self.outer {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// All rings, outer first.
    pub fn rings(&self) -> impl Iterator<Item = &[Point2]> {
        std::iter::once(self.outer.as_slice()).chain(self.holes.iter().map(|r| r.as_slice()))
    }

    /// All ring edges as (start, end) pairs.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.rings()
            .flat_map(|ring| (0..ring.len()).map(move |i| (ring[i], ring[(i + 1) % ring.len()])))
    }

    /// All ring vertices.
    pub fn vertices(&self) -> impl Iterator<Item = Point2> + '_ {
        self.rings().flatten().copied()
    }

    /// Membership test: inside the outer ring and outside all holes, with
    /// points within `boundary_tolerance` of any ring edge counted inside.
    pub fn contains(&self, p: Point2) -> bool {
        if !p.is_finite() {
            return false;
        }
        if self.on_boundary(p) {
            return true;
        }
        if !point_in_ring(p, &self.outer) {
            return false;
        }
        !self.holes.iter().any(|h| point_in_ring(p, h))
    }

    /// True when `p` lies within `boundary_tolerance` of some ring edge.
    pub fn on_boundary(&self, p: Point2) -> bool {
        self.edges()
            .any(|(a, b)| dist_point_segment(p, a, b) <= self.boundary_tolerance)
    }

    fn validate(&self) -> Result<()> {
        // No transversal crossings within or across rings; touching at
        // vertices is allowed.
        let rings: Vec<&[Point2]> = self.rings().collect();
        for (ri, ring_a) in rings.iter().enumerate() {
            for (rj, ring_b) in rings.iter().enumerate().skip(ri) {
                if edges_cross(ring_a, ring_b, ri == rj) {
                    return Err(Error::InvalidInput(format!(
                        "ring {ri} and ring {rj} have crossing edges"
                    )));
                }
            }
        }
        // Holes must sit inside the outer ring and stay out of each other.
        for (hi, hole) in self.holes.iter().enumerate() {
            if !hole
                .iter()
                .all(|v| point_in_ring_or_on(*v, &self.outer, self.boundary_tolerance))
            {
                return Err(Error::InvalidInput(format!(
                    "hole {hi} is not inside the outer ring"
                )));
            }
            for (hj, other) in self.holes.iter().enumerate() {
                if hi != hj && point_strictly_in_ring(hole[0], other, self.boundary_tolerance) {
                    return Err(Error::InvalidInput(format!("holes {hi} and {hj} overlap")));
                }
            }
        }
        Ok(())
    }
}

fn clean_ring(mut ring: Vec<Point2>, label: &str) -> Result<Vec<Point2>> {
    if ring.len() >= 2 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "{label} ring needs at least 3 distinct vertices"
        )));
    }
    if ring.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{label} ring has non-finite coordinates"
        )));
    }
    for i in 0..ring.len() {
        let j = (i + 1) % ring.len();
        if ring[i] == ring[j] {
            return Err(Error::InvalidInput(format!(
                "{label} ring has a zero-length edge at vertex {i}"
            )));
        }
    }
    Ok(ring)
}

/// Shoelace signed area: positive for counterclockwise rings.
pub(crate) fn signed_area(ring: &[Point2]) -> f64 {
    let mut acc = 0.0;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

fn ring_diameter(ring: &[Point2]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..ring.len() {
        for j in (i + 1)..ring.len() {
            best = best.max(ring[i].dist(&ring[j]));
        }
    }
    best.max(f64::MIN_POSITIVE)
}

/// Even-odd crossing test against a single ring (strict interior reading;
/// boundary behavior is handled by the caller's tolerance pass).
pub(crate) fn point_in_ring(p: Point2, ring: &[Point2]) -> bool {
    let mut inside = false;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        if (a.y > p.y) != (b.y > p.y) {
            let x_int = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_int {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_in_ring_or_on(p: Point2, ring: &[Point2], tol: f64) -> bool {
    point_in_ring(p, ring)
        || (0..ring.len())
            .any(|i| dist_point_segment(p, ring[i], ring[(i + 1) % ring.len()]) <= tol)
}

fn point_strictly_in_ring(p: Point2, ring: &[Point2], tol: f64) -> bool {
    point_in_ring(p, ring)
        && !(0..ring.len())
            .any(|i| dist_point_segment(p, ring[i], ring[(i + 1) % ring.len()]) <= tol)
}

/// True when any edge of `a` crosses an edge of `b` transversally.
fn edges_cross(a: &[Point2], b: &[Point2], same_ring: bool) -> bool {
    for i in 0..a.len() {
        let (a1, a2) = (a[i], a[(i + 1) % a.len()]);
        for j in 0..b.len() {
            if same_ring {
                // Skip identical and adjacent edges of the same ring.
                if j <= i {
                    continue;
                }
                let adjacent = j == i + 1 || (i == 0 && j == a.len() - 1);
                if adjacent {
                    continue;
                }
            }
            let (b1, b2) = (b[j], b[(j + 1) % b.len()]);
            let o1 = orient_sign(a1, a2, b1);
            let o2 = orient_sign(a1, a2, b2);
            let o3 = orient_sign(b1, b2, a1);
            let o4 = orient_sign(b1, b2, a2);
            if o1 * o2 < 0 && o3 * o4 < 0 {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
pub(crate) fn unit_square() -> PolygonDomain {
    PolygonDomain::new(
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ],
        vec![],
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_exterior_and_boundary() {
        let sq = unit_square();
        assert!(sq.contains(Point2::new(0.5, 0.5)));
        assert!(!sq.contains(Point2::new(2.0, 0.0)));
        // Boundary point treated as inside under the tolerance.
        let sq = sq.with_boundary_tolerance(1e-9);
        assert!(sq.contains(Point2::new(1.0, 0.5)));
    }

    #[test]
    fn hole_excludes_points() {
        let dom = PolygonDomain::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(4.0, 0.0),
                Point2::new(4.0, 4.0),
                Point2::new(0.0, 4.0),
            ],
            vec![vec![
                Point2::new(1.0, 1.0),
                Point2::new(3.0, 1.0),
                Point2::new(3.0, 3.0),
                Point2::new(1.0, 3.0),
            ]],
        )
        .unwrap();
        assert!(!dom.contains(Point2::new(2.0, 2.0)));
        assert!(dom.contains(Point2::new(0.5, 0.5)));
        // On the hole edge: inside by tolerance.
        assert!(dom.contains(Point2::new(1.0, 2.0)));
    }

    #[test]
    fn orientation_normalized() {
        let dom = PolygonDomain::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(0.0, 1.0),
                Point2::new(1.0, 1.0),
                Point2::new(1.0, 0.0),
            ],
            vec![],
        )
        .unwrap();
        assert!(signed_area(dom.outer()) > 0.0);
    }

    #[test]
    fn rejects_self_crossing_ring() {
        let bowtie = PolygonDomain::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(2.0, 2.0),
                Point2::new(2.0, 0.0),
                Point2::new(0.0, 2.0),
            ],
            vec![],
        );
        assert!(bowtie.is_err());
    }

    #[test]
    fn rejects_tiny_ring() {
        assert!(
            PolygonDomain::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)], vec![]).is_err()
        );
    }

    #[test]
    fn accepts_closed_geojson_style_ring() {
        let dom = PolygonDomain::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
                Point2::new(0.0, 0.0),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(dom.outer().len(), 4);
    }

    #[test]
    fn pinched_ring_is_allowed() {
        // Two unit squares sharing the corner (0, 0).
        let dom = crate::simulate::make_figure_eight();
        assert!(dom.contains(Point2::new(-0.5, -0.5)));
        assert!(dom.contains(Point2::new(0.5, 0.5)));
        assert!(!dom.contains(Point2::new(-0.5, 0.5)));
        assert!(!dom.contains(Point2::new(0.5, -0.5)));
    }
}
