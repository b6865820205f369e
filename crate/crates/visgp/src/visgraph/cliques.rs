//! Bron-Kerbosch maximal-clique enumeration with pivoting.
//!
//! Used where no chordal structure is available: IPS updates on arbitrary
//! graphs and neighbor-set selection among prediction candidates. The
//! recursion order is deterministic, so callers get reproducible clique
//! lists.

/// All maximal cliques of the graph on `0..n` induced by `is_edge`, each
/// sorted ascending; the list is sorted lexicographically.
pub fn bron_kerbosch(n: usize, is_edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let words = n.div_ceil(64);
    let mut adj = vec![vec![0u64; words]; n];
    for (i, row) in adj.iter_mut().enumerate() {
        for j in (0..n).filter(|&j| j != i) {
            if is_edge(i, j) {
                row[j / 64] |= 1 << (j % 64);
            }
        }
    }
    let mut p = vec![0u64; words];
    for v in 0..n {
        p[v / 64] |= 1 << (v % 64);
    }
    let mut out = Vec::new();
    let mut r = Vec::new();
    expand(&adj, &mut r, p, vec![0u64; words], &mut out);
    out.sort();
    out
}

fn expand(
    adj: &[Vec<u64>],
    r: &mut Vec<usize>,
    mut p: Vec<u64>,
    mut x: Vec<u64>,
    out: &mut Vec<Vec<usize>>,
) {
    if is_empty(&p) && is_empty(&x) {
        let mut clique = r.clone();
        clique.sort_unstable();
        out.push(clique);
        return;
    }
    // Pivot: vertex of P ∪ X with the most neighbors in P.
    let pivot = iter_bits(&p)
        .chain(iter_bits(&x))
        .max_by_key(|&u| count_and(&adj[u], &p))
        .unwrap();
    let candidates: Vec<usize> = iter_bits(&p)
        .filter(|&v| adj[pivot][v / 64] >> (v % 64) & 1 == 0)
        .collect();
    for v in candidates {
        r.push(v);
        let p_next = and(&p, &adj[v]);
        let x_next = and(&x, &adj[v]);
        expand(adj, r, p_next, x_next, out);
        r.pop();
        p[v / 64] &= !(1 << (v % 64));
        x[v / 64] |= 1 << (v % 64);
    }
}

fn is_empty(m: &[u64]) -> bool {
    m.iter().all(|&w| w == 0)
}

fn and(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn count_and(a: &[u64], b: &[u64]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x & y).count_ones() as usize)
        .sum()
}

fn iter_bits(m: &[u64]) -> impl Iterator<Item = usize> + '_ {
    m.iter().enumerate().flat_map(|(wi, &word)| {
        let mut w = word;
        std::iter::from_fn(move || {
            if w == 0 {
                None
            } else {
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            }
        })
    })
}
