//! Shortest-path ("as the fish swims") distances inside a polygonal domain.
//!
//! Shortest paths in a polygon with holes are polylines whose interior
//! vertices are polygon vertices, so the classical construction suffices:
//! build the visibility graph over the ring vertices, run all-pairs shortest
//! paths once, and answer queries by trying every pair of entry/exit
//! vertices. Query points connected by a straight in-domain segment get the
//! exact Euclidean distance.

use super::{segment_in_domain, Point2, PolygonDomain};
use crate::error::{Error, Result};

/// Precomputed vertex-to-vertex shortest paths for one domain. Build once,
/// query many times.
pub struct GeodesicEngine<'a> {
    dom: &'a PolygonDomain,
    nodes: Vec<Point2>,
    /// Symmetric all-pairs distances among `nodes`; `INFINITY` = unreachable.
    dist: Vec<f64>,
}

impl<'a> GeodesicEngine<'a> {
    pub fn new(dom: &'a PolygonDomain) -> Self {
        let mut nodes: Vec<Point2> = Vec::new();
        for v in dom.vertices() {
            if !nodes.contains(&v) {
                nodes.push(v);
            }
        }
        let n = nodes.len();
        let mut dist = vec![f64::INFINITY; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if segment_in_domain(nodes[i], nodes[j], dom).unwrap_or(false) {
                    let d = nodes[i].dist(&nodes[j]);
                    dist[i * n + j] = d;
                    dist[j * n + i] = d;
                }
            }
        }
        // Floyd-Warshall; symmetry is preserved because updates use the
        // commutative sum of symmetric entries.
        for k in 0..n {
            for i in 0..n {
                let dik = dist[i * n + k];
                if !dik.is_finite() {
                    continue;
                }
                for j in 0..n {
                    let cand = dik + dist[k * n + j];
                    if cand < dist[i * n + j] {
                        dist[i * n + j] = cand;
                    }
                }
            }
        }
        Self { dom, nodes, dist }
    }

    pub fn domain(&self) -> &PolygonDomain {
        self.dom
    }

    /// Distances from `p` to every graph node visible from it.
    fn node_links(&self, p: Point2) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        for (i, v) in self.nodes.iter().enumerate() {
            if segment_in_domain(p, *v, self.dom)? {
                out.push((i, p.dist(v)));
            }
        }
        Ok(out)
    }

    /// Geodesic distance between two points of the domain.
    pub fn distance(&self, a: Point2, b: Point2) -> Result<f64> {
        if segment_in_domain(a, b, self.dom)? {
            return Ok(a.dist(&b));
        }
        let la = self.node_links(a)?;
        let lb = self.node_links(b)?;
        self.combine(&la, &lb)
    }

    /// Geodesic distances from one source to many targets, reusing the
    /// source's visibility links.
    pub fn distances_from(&self, src: Point2, targets: &[Point2]) -> Result<Vec<f64>> {
        if !self.dom.contains(src) {
            return Err(Error::InvalidInput("source outside domain".into()));
        }
        let ls = self.node_links(src)?;
        let one = |t: &Point2| -> Result<f64> {
            if segment_in_domain(src, *t, self.dom)? {
                return Ok(src.dist(t));
            }
            let lt = self.node_links(*t)?;
            self.combine(&ls, &lt)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            targets.par_iter().map(one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            targets.iter().map(one).collect()
        }
    }

    fn combine(&self, la: &[(usize, f64)], lb: &[(usize, f64)]) -> Result<f64> {
        let n = self.nodes.len();
        let mut best = f64::INFINITY;
        for &(i, da) in la {
            for &(j, db) in lb {
                let through = self.dist[i * n + j];
                if through.is_finite() {
                    // (da + db) first keeps the sum symmetric in (a, b).
                    let cand = (da + db) + through;
                    if cand < best {
                        best = cand;
                    }
                }
            }
        }
        if best.is_finite() {
            Ok(best)
        } else {
            Err(Error::Unreachable)
        }
    }
}

/// One-off geodesic distance. Builds a throwaway engine; use
/// [`GeodesicEngine`] for repeated queries on the same domain.
pub fn geodesic_distance(a: Point2, b: Point2, dom: &PolygonDomain) -> Result<f64> {
    GeodesicEngine::new(dom).distance(a, b)
}
