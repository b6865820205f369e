//! Visibility graphs over observation sites, chordal completion, and
//! perfectly ordered clique decompositions.

mod bitmatrix;
mod chordal;
mod cliques;

pub use bitmatrix::BitMatrix;
pub use chordal::{chordal_completion, decompose, perfect_ordering, ChordalGraph};
pub use cliques::bron_kerbosch;

use crate::error::{Error, Result};
use crate::geometry::{segment_in_domain, GeodesicEngine, Point2, PolygonDomain};
use serde::{Deserialize, Serialize};

/// Symmetric adjacency over observation sites: an edge means the straight
/// segment between the two sites lies inside the domain (and, when a
/// threshold `d_max` is set, that the sites are within that distance).
#[derive(Debug, Clone)]
pub struct VisibilityGraph {
    points: Vec<Point2>,
    d_max: Option<f64>,
    adj: BitMatrix,
}

impl VisibilityGraph {
    /// Builds the (optionally distance-thresholded) visibility graph.
    /// Pair tests run as a parallel map when the `parallel` feature is on.
    pub fn build(points: &[Point2], dom: &PolygonDomain, d_max: Option<f64>) -> Result<Self> {
        let outside: Vec<usize> = (0..points.len())
            .filter(|&i| !dom.contains(points[i]))
            .collect();
        if !outside.is_empty() {
            return Err(Error::PointsOutsideDomain { indices: outside });
        }
        let n = points.len();
        let test_pair = |i: usize, j: usize| -> bool {
            if let Some(dm) = d_max {
                if points[i].dist(&points[j]) > dm {
                    return false;
                }
            }
            segment_in_domain(points[i], points[j], dom).unwrap_or(false)
        };

        let rows: Vec<Vec<usize>>;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            rows = (0..n)
                .into_par_iter()
                .map(|i| ((i + 1)..n).filter(|&j| test_pair(i, j)).collect())
                .collect();
        }
        #[cfg(not(feature = "parallel"))]
        {
            rows = (0..n)
                .map(|i| ((i + 1)..n).filter(|&j| test_pair(i, j)).collect())
                .collect();
        }

        let mut adj = BitMatrix::new(n);
        for (i, row) in rows.iter().enumerate() {
            for &j in row {
                adj.set_sym(i, j);
            }
        }
        Ok(Self {
            points: points.to_vec(),
            d_max,
            adj,
        })
    }

    /// Complete graph over the given points (the Euclidean baseline that
    /// ignores the domain).
    pub fn complete(points: &[Point2]) -> Self {
        let n = points.len();
        let mut adj = BitMatrix::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                adj.set_sym(i, j);
            }
        }
        Self {
            points: points.to_vec(),
            d_max: None,
            adj,
        }
    }

    /// Reassembles a graph from a cached adjacency matrix.
    pub fn from_parts(points: Vec<Point2>, d_max: Option<f64>, adj: BitMatrix) -> Result<Self> {
        if adj.n() != points.len() {
            return Err(Error::InvalidInput(format!(
                "adjacency size {} does not match {} points",
                adj.n(),
                points.len()
            )));
        }
        Ok(Self { points, d_max, adj })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn d_max(&self) -> Option<f64> {
        self.d_max
    }

    pub fn adjacency(&self) -> &BitMatrix {
        &self.adj
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.adj.get(i, j)
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.adj.row_indices(i)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj.row_count(i)
    }

    /// Edges as (i, j) pairs with i < j.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for j in self.adj.row_indices_from(i, i + 1) {
                out.push((i, j));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n()).map(|i| self.adj.row_count(i)).sum::<usize>() / 2
    }
}

/// A perfectly ordered clique decomposition of a (completed) visibility
/// graph: maximal cliques `K_1..K_c` with separators `S_i = K_i ∩ (K_1 ∪ …
/// ∪ K_{i-1})` satisfying the running-intersection property, plus the edges
/// the completion introduced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChordalDecomposition {
    pub cliques: Vec<Vec<usize>>,
    pub separators: Vec<Vec<usize>>,
    pub added_edges: Vec<(usize, usize)>,
}

impl ChordalDecomposition {
    /// Number of vertices covered by the cliques.
    pub fn vertex_count(&self) -> usize {
        self.cliques
            .iter()
            .flatten()
            .copied()
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Checks the running-intersection property directly from the defining
    /// identity: every separator must be contained in some earlier clique.
    pub fn verify_running_intersection(&self) -> bool {
        if self.cliques.len() != self.separators.len() {
            return false;
        }
        if !self.separators.first().is_none_or(|s| s.is_empty()) {
            return false;
        }
        let mut seen: Vec<Vec<usize>> = Vec::new();
        for (k, s) in self.cliques.iter().zip(&self.separators) {
            let union: std::collections::BTreeSet<usize> = seen.iter().flatten().copied().collect();
            let expect: Vec<usize> = k.iter().copied().filter(|v| union.contains(v)).collect();
            if expect != *s {
                return false;
            }
            if !s.is_empty() && !seen.iter().any(|c| s.iter().all(|v| c.contains(v))) {
                return false;
            }
            seen.push(k.clone());
        }
        true
    }
}

/// Diagnostics for one completion-added edge.
#[derive(Debug, Clone, Serialize)]
pub struct AddedEdgeDiag {
    pub i: usize,
    pub j: usize,
    pub euclidean: f64,
    pub geodesic: f64,
    pub ratio: f64,
}

/// Report on the geometric distortion introduced by chordal completion.
#[derive(Debug, Clone, Serialize)]
pub struct CompletionReport {
    pub added_edges: usize,
    pub flagged: usize,
    pub edges: Vec<AddedEdgeDiag>,
}

impl CompletionReport {
    pub fn summary(&self) -> String {
        if self.added_edges == 0 {
            return "chordal completion added no edges".to_string();
        }
        let ratios: Vec<f64> = self.edges.iter().map(|e| e.ratio).collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        format!(
            "chordal completion added {} edge(s); geodesic/euclidean ratio mean {:.3}, max {:.3}; {} flagged (> 1.5)",
            self.added_edges, mean, max, self.flagged
        )
    }
}

/// Ratio of geodesic to Euclidean distance for every completion-added edge;
/// ratios above 1.5 are flagged as geometry-distorting.
pub fn completion_diagnostics(
    decomp: &ChordalDecomposition,
    g: &VisibilityGraph,
    dom: &PolygonDomain,
) -> Result<CompletionReport> {
    let engine = GeodesicEngine::new(dom);
    let mut edges = Vec::with_capacity(decomp.added_edges.len());
    let mut flagged = 0;
    for &(i, j) in &decomp.added_edges {
        let euclidean = g.points()[i].dist(&g.points()[j]);
        let geodesic = engine.distance(g.points()[i], g.points()[j])?;
        let ratio = if euclidean > 0.0 {
            geodesic / euclidean
        } else {
            1.0
        };
        if ratio > 1.5 {
            flagged += 1;
        }
        edges.push(AddedEdgeDiag {
            i,
            j,
            euclidean,
            geodesic,
            ratio,
        });
    }
    Ok(CompletionReport {
        added_edges: edges.len(),
        flagged,
        edges,
    })
}
