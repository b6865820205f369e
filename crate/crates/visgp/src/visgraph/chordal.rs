//! Chordal completion by maximum-cardinality-search fill-in and perfect
//! ordering of the maximal cliques.
//!
//! Completion runs the elimination game along the reverse of an MCS visit
//! order, recording fill edges. On an already-chordal graph this adds
//! nothing. Ties in MCS break toward the lowest vertex index so that
//! decompositions are deterministic.

use super::{BitMatrix, ChordalDecomposition, VisibilityGraph};
use crate::error::{Error, Result};

/// A chordal supergraph of a visibility graph, with the fill edges recorded.
#[derive(Debug, Clone)]
pub struct ChordalGraph {
    n: usize,
    adj: BitMatrix,
    added_edges: Vec<(usize, usize)>,
}

impl ChordalGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &BitMatrix {
        &self.adj
    }

    pub fn added_edges(&self) -> &[(usize, usize)] {
        &self.added_edges
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.adj.get(i, j)
    }

    /// Wraps an adjacency that is believed to already be chordal.
    pub fn from_adjacency(adj: BitMatrix) -> Self {
        Self {
            n: adj.n(),
            adj,
            added_edges: Vec::new(),
        }
    }
}

/// Maximum-cardinality-search visit order; ties break to the lowest index.
/// Works across disconnected graphs (a fresh component starts at the lowest
/// unvisited index).
fn mcs_visit_order(adj: &BitMatrix, n: usize) -> Vec<usize> {
    let mut weight = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = usize::MAX;
        let mut best_w = 0;
        for v in 0..n {
            if !visited[v] && (best == usize::MAX || weight[v] > best_w) {
                best = v;
                best_w = weight[v];
            }
        }
        visited[best] = true;
        order.push(best);
        for u in adj.row_indices(best) {
            if !visited[u] {
                weight[u] += 1;
            }
        }
    }
    order
}

/// Elimination-game fill-in along `elim_order`; returns the completed
/// adjacency and the added edges.
fn fill_in(adj: &BitMatrix, elim_order: &[usize]) -> (BitMatrix, Vec<(usize, usize)>) {
    let n = adj.n();
    let mut work = adj.clone();
    let mut eliminated = vec![false; n];
    let mut added = Vec::new();
    for &v in elim_order {
        let later: Vec<usize> = work
            .row_indices(v)
            .into_iter()
            .filter(|&u| !eliminated[u])
            .collect();
        for (ai, &a) in later.iter().enumerate() {
            for &b in &later[ai + 1..] {
                if !work.get(a, b) {
                    work.set_sym(a, b);
                    added.push((a.min(b), a.max(b)));
                }
            }
        }
        eliminated[v] = true;
    }
    (work, added)
}

/// Completes a visibility graph to a chordal supergraph. Already-chordal
/// inputs come back unchanged (`added_edges` empty).
pub fn chordal_completion(g: &VisibilityGraph) -> ChordalGraph {
    let n = g.n();
    let visit = mcs_visit_order(g.adjacency(), n);
    let elim: Vec<usize> = visit.iter().rev().copied().collect();
    let (adj, added_edges) = fill_in(g.adjacency(), &elim);
    ChordalGraph {
        n,
        adj,
        added_edges,
    }
}

/// Whether the reverse-MCS elimination of `adj` is perfect (zero fill),
/// i.e. whether the graph is chordal.
fn is_chordal(adj: &BitMatrix, n: usize) -> bool {
    let visit = mcs_visit_order(adj, n);
    let elim: Vec<usize> = visit.iter().rev().copied().collect();
    let mut eliminated = vec![false; n];
    for &v in &elim {
        let later: Vec<usize> = adj
            .row_indices(v)
            .into_iter()
            .filter(|&u| !eliminated[u])
            .collect();
        for (ai, &a) in later.iter().enumerate() {
            for &b in &later[ai + 1..] {
                if !adj.get(a, b) {
                    return false;
                }
            }
        }
        eliminated[v] = true;
    }
    true
}

/// Connected components of an adjacency matrix, as a vertex -> component map.
fn components(adj: &BitMatrix, n: usize) -> Vec<usize> {
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(v) = stack.pop() {
            for u in adj.row_indices(v) {
                if comp[u] == usize::MAX {
                    comp[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Enumerates the maximal cliques of a chordal graph from a perfect
/// elimination order and arranges them (per connected component) in an
/// order satisfying the running-intersection property. Each component's
/// first clique gets the empty separator.
pub fn perfect_ordering(cg: &ChordalGraph) -> Result<ChordalDecomposition> {
    let n = cg.n();
    if n == 0 {
        return Ok(ChordalDecomposition {
            cliques: vec![],
            separators: vec![],
            added_edges: cg.added_edges.clone(),
        });
    }
    if !is_chordal(&cg.adj, n) {
        return Err(Error::NotChordal);
    }

    // Candidate cliques: v plus its not-yet-eliminated neighbors, along the
    // perfect elimination order.
    let visit = mcs_visit_order(&cg.adj, n);
    let elim: Vec<usize> = visit.iter().rev().copied().collect();
    let mut eliminated = vec![false; n];
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for &v in &elim {
        let mut c: Vec<usize> = cg
            .adj
            .row_indices(v)
            .into_iter()
            .filter(|&u| !eliminated[u])
            .collect();
        c.push(v);
        c.sort_unstable();
        eliminated[v] = true;
        candidates.push(c);
    }
    candidates.dedup();
    candidates.sort_unstable();
    candidates.dedup();

    // Drop candidates strictly contained in another.
    let masks: Vec<Vec<u64>> = candidates.iter().map(|c| to_mask(c, n)).collect();
    let mut maximal: Vec<Vec<usize>> = Vec::new();
    let mut maximal_masks: Vec<Vec<u64>> = Vec::new();
    'outer: for (i, c) in candidates.iter().enumerate() {
        for (j, other) in candidates.iter().enumerate() {
            if i != j
                && c.len() <= other.len()
                && BitMatrix::row_is_subset(&masks[i], &masks[j])
                && c != other
            {
                continue 'outer;
            }
        }
        maximal.push(c.clone());
        maximal_masks.push(masks[i].clone());
    }

    // Greedy maximum-intersection ordering per component (Prim's algorithm
    // on the junction tree), which yields running intersection for chordal
    // graphs.
    let comp = components(&cg.adj, n);
    let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_comp: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for (ci, c) in maximal.iter().enumerate() {
        by_comp[comp[c[0]]].push(ci);
    }

    let words = n.div_ceil(64);
    let mut cliques = Vec::with_capacity(maximal.len());
    let mut separators = Vec::with_capacity(maximal.len());
    for group in by_comp {
        let mut remaining = group;
        let mut union = vec![0u64; words];
        let mut first = true;
        while !remaining.is_empty() {
            let pick_pos = if first {
                // Deterministic start: the clique with the lowest minimum
                // vertex.
                remaining
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &ci)| maximal[ci][0])
                    .map(|(pos, _)| pos)
                    .unwrap()
            } else {
                remaining
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, &ci)| {
                        let inter = intersect_count(&maximal_masks[ci], &union);
                        // Tie-break toward the lower clique index by packing
                        // it (negated) into the key.
                        (inter, usize::MAX - ci)
                    })
                    .map(|(pos, _)| pos)
                    .unwrap()
            };
            let ci = remaining.swap_remove(pick_pos);
            let k = &maximal[ci];
            let sep: Vec<usize> = k
                .iter()
                .copied()
                .filter(|&v| union[v / 64] >> (v % 64) & 1 == 1)
                .collect();
            if !first && !sep.is_empty() {
                let sep_mask = to_mask(&sep, n);
                let contained = cliques
                    .iter()
                    .any(|k: &Vec<usize>| BitMatrix::row_is_subset(&sep_mask, &to_mask(k, n)));
                if !contained {
                    return Err(Error::NotChordal);
                }
            }
            for &v in k {
                union[v / 64] |= 1 << (v % 64);
            }
            cliques.push(k.clone());
            separators.push(sep);
            first = false;
        }
    }

    Ok(ChordalDecomposition {
        cliques,
        separators,
        added_edges: cg.added_edges.clone(),
    })
}

/// Completion followed by perfect ordering.
pub fn decompose(g: &VisibilityGraph) -> Result<ChordalDecomposition> {
    perfect_ordering(&chordal_completion(g))
}

fn to_mask(set: &[usize], n: usize) -> Vec<u64> {
    let mut m = vec![0u64; n.div_ceil(64)];
    for &v in set {
        m[v / 64] |= 1 << (v % 64);
    }
    m
}

fn intersect_count(a: &[u64], b: &[u64]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x & y).count_ones() as usize)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> VisibilityGraph {
        let pts: Vec<Point2> = (0..n).map(|i| Point2::new(i as f64, 0.0)).collect();
        let mut adj = BitMatrix::new(n);
        for &(i, j) in edges {
            adj.set_sym(i, j);
        }
        VisibilityGraph::from_parts(pts, None, adj).unwrap()
    }

    #[test]
    fn four_cycle_needs_exactly_one_chord() {
        let g = graph_from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let cg = chordal_completion(&g);
        assert_eq!(cg.added_edges().len(), 1);
        let d = perfect_ordering(&cg).unwrap();
        assert!(d.verify_running_intersection());
        assert_eq!(d.cliques.len(), 2);
        assert!(d.cliques.iter().all(|c| c.len() == 3));
    }

    #[test]
    fn trees_are_already_chordal() {
        let g = graph_from_edges(6, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)]);
        let cg = chordal_completion(&g);
        assert!(cg.added_edges().is_empty());
        let d = perfect_ordering(&cg).unwrap();
        assert_eq!(d.cliques.len(), 5);
        assert!(d.verify_running_intersection());
    }

    #[test]
    fn complete_graph_single_clique() {
        let edges: Vec<(usize, usize)> = (0..5)
            .flat_map(|i| ((i + 1)..5).map(move |j| (i, j)))
            .collect();
        let g = graph_from_edges(5, &edges);
        let d = decompose(&g).unwrap();
        assert_eq!(d.cliques, vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(d.separators, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn path_graph_textbook_decomposition() {
        let g = graph_from_edges(3, &[(0, 1), (1, 2)]);
        let d = decompose(&g).unwrap();
        assert_eq!(d.cliques.len(), 2);
        assert!(d.cliques.contains(&vec![0, 1]));
        assert!(d.cliques.contains(&vec![1, 2]));
        assert_eq!(d.separators[0], Vec::<usize>::new());
        assert_eq!(d.separators[1], vec![1]);
    }

    #[test]
    fn two_triangles_share_an_edge() {
        // Matches a brute-force maximal-clique enumeration for n = 4.
        let g = graph_from_edges(4, &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]);
        let brute = super::super::bron_kerbosch(4, |i, j| g.is_edge(i, j));
        let d = decompose(&g).unwrap();
        assert!(d.added_edges.is_empty());
        let mut got = d.cliques.clone();
        got.sort();
        let mut want = brute;
        want.sort();
        assert_eq!(got, want);
        assert_eq!(d.separators[1].len(), 2);
    }

    #[test]
    fn completion_is_idempotent() {
        let g = graph_from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let cg = chordal_completion(&g);
        assert!(!cg.added_edges().is_empty());
        let g2 =
            VisibilityGraph::from_parts(g.points().to_vec(), None, cg.adjacency().clone()).unwrap();
        let cg2 = chordal_completion(&g2);
        assert!(cg2.added_edges().is_empty());
    }

    #[test]
    fn disconnected_components_decompose_independently() {
        let g = graph_from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5)]);
        let d = decompose(&g).unwrap();
        assert!(d.verify_running_intersection());
        // Two component-initial cliques with empty separators.
        assert_eq!(d.separators.iter().filter(|s| s.is_empty()).count(), 2);
        // Vertex-count identity per connected chordal component:
        // sum |K| - sum |S| = n.
        let k_sum: usize = d.cliques.iter().map(Vec::len).sum();
        let s_sum: usize = d.separators.iter().map(Vec::len).sum();
        assert_eq!(k_sum - s_sum, 6);
    }

    #[test]
    fn non_chordal_adjacency_is_rejected_by_perfect_ordering() {
        let g = graph_from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let cg = ChordalGraph::from_adjacency(g.adjacency().clone());
        assert!(matches!(perfect_ordering(&cg), Err(Error::NotChordal)));
    }

    #[test]
    fn every_input_edge_is_inside_some_clique() {
        let g = graph_from_edges(
            8,
            &[
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 0),
                (2, 4),
                (4, 5),
                (5, 6),
                (6, 4),
                (6, 7),
            ],
        );
        let d = decompose(&g).unwrap();
        for (i, j) in g.edges() {
            assert!(
                d.cliques.iter().any(|c| c.contains(&i) && c.contains(&j)),
                "edge ({i},{j}) not covered"
            );
        }
    }
}
