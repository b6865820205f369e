//! Kriging at new sites with clique-constrained neighbor sets.
//!
//! Neighbors of a prediction site must be visible from the site and pairwise
//! visible among themselves, so that the covariances used by the kriging
//! equations are all Euclidean. Three strategies are exposed: nearest clique
//! (greedy nearest neighbors until completeness would break), maximum
//! precision (the maximal clique among the k nearest candidates with the
//! smallest conditional variance), and precision weighting (disjoint cliques
//! combined by their conditional precisions).

use crate::covariance::{cholesky_with_jitter, CovarianceModel};
use crate::error::{Error, Result};
use crate::geometry::{segment_in_domain, Point2, PolygonDomain};
use crate::visgraph::{bron_kerbosch, VisibilityGraph};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    NearestClique,
    MaxPrecision,
    PrecisionWeighted,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Strategy::NearestClique => "nearest_clique",
            Strategy::MaxPrecision => "max_precision",
            Strategy::PrecisionWeighted => "precision_weighted",
        };
        f.write_str(s)
    }
}

/// An ordered neighbor set for one prediction site; indices refer to the
/// observation list and are pairwise visible.
#[derive(Debug, Clone)]
pub struct NeighborSet {
    pub site: Point2,
    pub indices: Vec<usize>,
    pub strategy: Strategy,
    pub requested: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    pub neighbor_count: usize,
    pub strategy: Strategy,
}

/// Everything prediction needs from a completed fit: the training data and
/// the plug-in parameter estimates.
#[derive(Debug, Clone)]
pub struct KrigingContext<'a> {
    pub points: &'a [Point2],
    pub y: &'a DVector<f64>,
    pub x: &'a DMatrix<f64>,
    pub model: CovarianceModel,
    pub beta: DVector<f64>,
}

impl<'a> KrigingContext<'a> {
    pub fn new(
        points: &'a [Point2],
        y: &'a DVector<f64>,
        x: &'a DMatrix<f64>,
        model: CovarianceModel,
        beta: DVector<f64>,
    ) -> Result<Self> {
        if y.len() != points.len() || x.nrows() != points.len() || x.ncols() != beta.len() {
            return Err(Error::InvalidInput(
                "kriging context dimension mismatch".into(),
            ));
        }
        model.validate()?;
        Ok(Self {
            points,
            y,
            x,
            model,
            beta,
        })
    }
}

fn z_quantile(level: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "interval level {level} outside (0, 1)"
        )));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.inverse_cdf(0.5 * (1.0 + level)))
}

/// Observations visible from `s`, sorted by Euclidean distance with ties
/// broken by ascending index. `dom = None` disables the visibility
/// constraint (the Euclidean baseline).
pub fn visible_candidates(
    s: Point2,
    g: &VisibilityGraph,
    dom: Option<&PolygonDomain>,
) -> Result<Vec<usize>> {
    let mut cands: Vec<(f64, usize)> = Vec::new();
    for (i, p) in g.points().iter().enumerate() {
        let visible = match dom {
            Some(d) => segment_in_domain(s, *p, d)?,
            None => true,
        };
        if visible {
            cands.push((s.dist(p), i));
        }
    }
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(cands.into_iter().map(|(_, i)| i).collect())
}

/// Nearest-clique strategy: append visible candidates in distance order
/// while the set stays pairwise visible; stop at the first violation or at
/// `k` neighbors.
pub fn neighbors_nearest_clique(
    s: Point2,
    g: &VisibilityGraph,
    dom: Option<&PolygonDomain>,
    k: usize,
) -> Result<NeighborSet> {
    let cands = visible_candidates(s, g, dom)?;
    if cands.is_empty() {
        return Err(Error::NoVisibleNeighbors);
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k.min(cands.len()));
    for i in cands {
        if chosen.len() >= k {
            break;
        }
        if chosen.iter().all(|&j| g.is_edge(i, j)) {
            chosen.push(i);
        } else {
            break;
        }
    }
    Ok(NeighborSet {
        site: s,
        indices: chosen,
        strategy: Strategy::NearestClique,
        requested: k,
    })
}

/// Maximum-precision strategy: among the maximal cliques of the visibility
/// subgraph on the k nearest visible candidates, pick the one minimizing the
/// conditional predictive variance `C(s,s) - C(s,Q) C(Q,Q)^-1 C(Q,s)`.
pub fn neighbors_max_precision(
    s: Point2,
    g: &VisibilityGraph,
    dom: Option<&PolygonDomain>,
    k: usize,
    model: &CovarianceModel,
) -> Result<NeighborSet> {
    let cands = visible_candidates(s, g, dom)?;
    if cands.is_empty() {
        return Err(Error::NoVisibleNeighbors);
    }
    let cands = &cands[..cands.len().min(k)];
    let cliques = bron_kerbosch(cands.len(), |a, b| g.is_edge(cands[a], cands[b]));
    let mut best: Option<(f64, Vec<usize>)> = None;
    for clique in cliques {
        let q: Vec<usize> = clique.iter().map(|&a| cands[a]).collect();
        let var = conditional_variance(s, &q, g.points(), model)?;
        if best.as_ref().is_none_or(|(v, _)| var < *v) {
            best = Some((var, q));
        }
    }
    let (_, indices) = best.expect("at least one clique exists");
    Ok(NeighborSet {
        site: s,
        indices,
        strategy: Strategy::MaxPrecision,
        requested: k,
    })
}

/// Conditional variance of the (nugget-free) field at `s` given sites `q`.
fn conditional_variance(
    s: Point2,
    q: &[usize],
    points: &[Point2],
    model: &CovarianceModel,
) -> Result<f64> {
    let m = q.len();
    let mut c_qq = DMatrix::zeros(m, m);
    let mut c_sq = DVector::zeros(m);
    for (a, &i) in q.iter().enumerate() {
        c_qq[(a, a)] = model.sigma2;
        for (b, &j) in q.iter().enumerate().skip(a + 1) {
            let v = model.cov_value(points[i].dist(&points[j]));
            c_qq[(a, b)] = v;
            c_qq[(b, a)] = v;
        }
        c_sq[a] = model.cov_value(s.dist(&points[i]));
    }
    let (chol, _) = cholesky_with_jitter(&c_qq, model.sigma2)?;
    Ok((model.sigma2 - c_sq.dot(&chol.solve(&c_sq))).max(0.0))
}

/// Universal-kriging prediction at `s` from a fixed neighbor set, with a
/// Gaussian `level` interval. The covariance includes the nugget, so the
/// interval targets the observable response.
pub fn predict_at(
    s: Point2,
    x_s: &DVector<f64>,
    neighbors: &NeighborSet,
    ctx: &KrigingContext,
    level: f64,
) -> Result<Prediction> {
    if neighbors.indices.is_empty() {
        return Err(Error::NoVisibleNeighbors);
    }
    let (mean, variance) = kriging_moments(s, x_s, &neighbors.indices, ctx)?;
    let z = z_quantile(level)?;
    let half = z * variance.sqrt();
    Ok(Prediction {
        mean,
        variance,
        lower: mean - half,
        upper: mean + half,
        neighbor_count: neighbors.indices.len(),
        strategy: neighbors.strategy,
    })
}

fn kriging_moments(
    s: Point2,
    x_s: &DVector<f64>,
    indices: &[usize],
    ctx: &KrigingContext,
) -> Result<(f64, f64)> {
    let m = indices.len();
    let model = &ctx.model;
    let marginal = model.sigma2 + model.tau2;
    let mut sig_nn = DMatrix::zeros(m, m);
    let mut sig_sn = DVector::zeros(m);
    let mut resid = DVector::zeros(m);
    for (a, &i) in indices.iter().enumerate() {
        sig_nn[(a, a)] = marginal;
        for (b, &j) in indices.iter().enumerate().skip(a + 1) {
            let v = model.cov_value(ctx.points[i].dist(&ctx.points[j]));
            sig_nn[(a, b)] = v;
            sig_nn[(b, a)] = v;
        }
        // The nugget contributes to the cross-covariance only when the site
        // coincides exactly with an observation.
        let mut c = model.cov_value(s.dist(&ctx.points[i]));
        if s == ctx.points[i] {
            c += model.tau2;
        }
        sig_sn[a] = c;
        resid[a] = ctx.y[i] - ctx.x.row(i).transpose().dot(&ctx.beta);
    }
    let (chol, _) = cholesky_with_jitter(&sig_nn, model.sigma2)?;
    let alpha = chol.solve(&resid);
    let weights = chol.solve(&sig_sn);
    let mean = x_s.dot(&ctx.beta) + sig_sn.dot(&alpha);
    let variance = (marginal - sig_sn.dot(&weights)).max(0.0);
    Ok((mean, variance))
}

/// Precision-weighted prediction: extract disjoint cliques from the k
/// nearest visible candidates greedily (largest first), krige each, and
/// combine by conditional precision. The combined variance `1 / sum K` treats
/// the clique predictors as independent and is approximate.
pub fn predict_precision_weighted(
    s: Point2,
    x_s: &DVector<f64>,
    g: &VisibilityGraph,
    dom: Option<&PolygonDomain>,
    k: usize,
    ctx: &KrigingContext,
    level: f64,
) -> Result<Prediction> {
    let cands = visible_candidates(s, g, dom)?;
    if cands.is_empty() {
        return Err(Error::NoVisibleNeighbors);
    }
    let mut remaining: Vec<usize> = cands[..cands.len().min(k)].to_vec();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    while !remaining.is_empty() {
        let cliques = bron_kerbosch(remaining.len(), |a, b| {
            g.is_edge(remaining[a], remaining[b])
        });
        let mut largest: &Vec<usize> = &cliques[0];
        for c in &cliques[1..] {
            if c.len() > largest.len() {
                largest = c;
            }
        }
        let group: Vec<usize> = largest.iter().map(|&a| remaining[a]).collect();
        remaining.retain(|i| !group.contains(i));
        groups.push(group);
    }

    let mut weight_sum = 0.0;
    let mut mean_acc = 0.0;
    let mut total_neighbors = 0;
    for group in &groups {
        let (mean, variance) = kriging_moments(s, x_s, group, ctx)?;
        total_neighbors += group.len();
        if variance <= f64::EPSILON {
            // Exact interpolation: this clique determines the prediction.
            return Ok(Prediction {
                mean,
                variance: 0.0,
                lower: mean,
                upper: mean,
                neighbor_count: group.len(),
                strategy: Strategy::PrecisionWeighted,
            });
        }
        let w = 1.0 / variance;
        weight_sum += w;
        mean_acc += w * mean;
    }
    let mean = mean_acc / weight_sum;
    let variance = 1.0 / weight_sum;
    let z = z_quantile(level)?;
    let half = z * variance.sqrt();
    Ok(Prediction {
        mean,
        variance,
        lower: mean - half,
        upper: mean + half,
        neighbor_count: total_neighbors,
        strategy: Strategy::PrecisionWeighted,
    })
}

/// Prediction from the prior alone (no visible neighbors); opt-in fallback.
pub fn prior_prediction(
    x_s: &DVector<f64>,
    ctx: &KrigingContext,
    level: f64,
) -> Result<Prediction> {
    let mean = x_s.dot(&ctx.beta);
    let variance = ctx.model.sigma2 + ctx.model.tau2;
    let z = z_quantile(level)?;
    let half = z * variance.sqrt();
    Ok(Prediction {
        mean,
        variance,
        lower: mean - half,
        upper: mean + half,
        neighbor_count: 0,
        strategy: Strategy::NearestClique,
    })
}

/// Prior (unconditional) variance of the process at `s` assembled from the
/// kriging identity: `B(s) L(N,N) B(s)' + F(s)` with `L` the
/// covariance-selection matrix over the observation sites. Marginal
/// stationarity makes this `sigma2 + tau2` everywhere.
pub fn marginal_variance_at(
    s: Point2,
    g: &VisibilityGraph,
    dom: Option<&PolygonDomain>,
    model: &CovarianceModel,
    k: usize,
    l: &DMatrix<f64>,
) -> Result<f64> {
    // Sites in V read their variance straight off the diagonal.
    for (i, p) in g.points().iter().enumerate() {
        if s == *p {
            return Ok(l[(i, i)]);
        }
    }
    let nb = neighbors_nearest_clique(s, g, dom, k)?;
    let m = nb.indices.len();
    let marginal = model.sigma2 + model.tau2;
    let mut sig_nn = DMatrix::zeros(m, m);
    let mut sig_sn = DVector::zeros(m);
    let mut l_nn = DMatrix::zeros(m, m);
    for (a, &i) in nb.indices.iter().enumerate() {
        sig_nn[(a, a)] = marginal;
        l_nn[(a, a)] = l[(i, i)];
        for (b, &j) in nb.indices.iter().enumerate().skip(a + 1) {
            let v = model.cov_value(g.points()[i].dist(&g.points()[j]));
            sig_nn[(a, b)] = v;
            sig_nn[(b, a)] = v;
            l_nn[(a, b)] = l[(i, j)];
            l_nn[(b, a)] = l[(j, i)];
        }
        sig_sn[a] = model.cov_value(s.dist(&g.points()[i]));
    }
    let (chol, _) = cholesky_with_jitter(&sig_nn, model.sigma2)?;
    let b = chol.solve(&sig_sn); // B(s)'
    let f = marginal - sig_sn.dot(&b);
    Ok((&l_nn * &b).dot(&b) + f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::cov_matrix;
    use crate::simulate::make_u_domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn convex_box() -> PolygonDomain {
        PolygonDomain::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(10.0, 0.0),
                Point2::new(10.0, 10.0),
                Point2::new(0.0, 10.0),
            ],
            vec![],
        )
        .unwrap()
    }

    fn scatter(n: usize, seed: u64, dom: &PolygonDomain) -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = dom.bbox();
        let mut pts = Vec::new();
        while pts.len() < n {
            let p = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if dom.contains(p) {
                pts.push(p);
            }
        }
        pts
    }

    #[test]
    fn nearest_clique_is_plain_knn_in_convex_domain() {
        let dom = convex_box();
        let pts = scatter(20, 1, &dom);
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        let s = Point2::new(5.0, 5.0);
        let nb = neighbors_nearest_clique(s, &g, Some(&dom), 6).unwrap();
        assert_eq!(nb.indices.len(), 6);
        let mut by_dist: Vec<usize> = (0..20).collect();
        by_dist.sort_by(|&a, &b| {
            s.dist(&pts[a])
                .partial_cmp(&s.dist(&pts[b]))
                .unwrap()
                .then(a.cmp(&b))
        });
        assert_eq!(nb.indices, by_dist[..6].to_vec());
    }

    #[test]
    fn fewer_visible_than_requested_returns_all() {
        let dom = make_u_domain();
        // Observations only deep in the left arm.
        let pts = vec![
            Point2::new(-5.0, -5.0),
            Point2::new(-4.5, -4.0),
            Point2::new(-5.5, -3.0),
        ];
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        let s = Point2::new(-5.0, -5.5);
        let nb = neighbors_nearest_clique(s, &g, Some(&dom), 10).unwrap();
        assert_eq!(nb.indices.len(), 3);
    }

    #[test]
    fn no_visible_neighbors_is_an_error() {
        let dom = make_u_domain();
        let pts = vec![Point2::new(-5.0, -5.0), Point2::new(-4.5, -4.0)];
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        // Right arm bottom cannot see the left arm around the notch.
        let s = Point2::new(5.0, -5.0);
        assert!(matches!(
            neighbors_nearest_clique(s, &g, Some(&dom), 5),
            Err(Error::NoVisibleNeighbors)
        ));
    }

    #[test]
    fn candidate_across_notch_is_excluded() {
        let dom = make_u_domain();
        // Site in the left arm near the notch; one tempting candidate right
        // across the notch, one farther candidate in the same arm.
        let pts = vec![Point2::new(4.2, 1.0), Point2::new(-4.5, -1.5)];
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        let s = Point2::new(-4.2, 1.0);
        let nb = neighbors_nearest_clique(s, &g, Some(&dom), 2).unwrap();
        assert_eq!(
            nb.indices,
            vec![1],
            "cross-notch candidate must be excluded"
        );
    }

    #[test]
    fn max_precision_in_convex_domain_takes_full_set() {
        let dom = convex_box();
        let pts = scatter(15, 2, &dom);
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        let model = CovarianceModel::exponential(1.0, 0.3, 0.1).unwrap();
        let s = Point2::new(4.0, 6.0);
        let nb = neighbors_max_precision(s, &g, Some(&dom), 7, &model).unwrap();
        assert_eq!(
            nb.indices.len(),
            7,
            "single maximal clique = the full k set"
        );
        let nb1 = neighbors_max_precision(s, &g, Some(&dom), 1, &model).unwrap();
        let nc1 = neighbors_nearest_clique(s, &g, Some(&dom), 1).unwrap();
        assert_eq!(
            nb1.indices, nc1.indices,
            "k=1 is the nearest visible neighbor"
        );
    }

    #[test]
    fn max_precision_prefers_informative_clique() {
        // Site just inside the left arm near the notch corner: it sees both
        // down the arm and along the top bar, but arm points and bar points
        // cannot see each other, giving two disjoint candidate cliques.
        let dom = make_u_domain();
        let pts = vec![
            Point2::new(-4.5, -2.0),
            Point2::new(-4.2, -3.0),
            Point2::new(2.0, 2.6),
            Point2::new(3.0, 3.0),
        ];
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        assert!(g.is_edge(0, 1) && g.is_edge(2, 3));
        assert!(!g.is_edge(0, 2) && !g.is_edge(1, 3));
        let model = CovarianceModel::exponential(1.0, 0.4, 0.05).unwrap();
        let s = Point2::new(-4.05, 2.05);
        let nb = neighbors_max_precision(s, &g, Some(&dom), 4, &model).unwrap();
        // Direct variance computation on both cliques confirms the choice.
        let v_near = conditional_variance(s, &[0, 1], &pts, &model).unwrap();
        let v_far = conditional_variance(s, &[2, 3], &pts, &model).unwrap();
        assert!(v_near < v_far);
        let mut got = nb.indices.clone();
        got.sort_unstable();
        assert_eq!(got, vec![0, 1]);
    }

    #[test]
    fn interpolation_at_observed_site_without_nugget() {
        let dom = convex_box();
        let pts = scatter(8, 3, &dom);
        let model = CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let y = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let x = DMatrix::from_element(8, 1, 1.0);
        let ctx = KrigingContext::new(&pts, &y, &x, model, DVector::from_element(1, 0.0)).unwrap();
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        let s = pts[3];
        let nb = neighbors_nearest_clique(s, &g, Some(&dom), 8).unwrap();
        let pred = predict_at(s, &DVector::from_element(1, 1.0), &nb, &ctx, 0.95).unwrap();
        assert!((pred.mean - y[3]).abs() < 1e-8);
        assert!(pred.variance < 1e-10);
    }

    #[test]
    fn matches_dense_universal_kriging_oracle() {
        let dom = convex_box();
        let pts = scatter(12, 4, &dom);
        let model = CovarianceModel::exponential(1.3, 0.4, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let y = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let x = DMatrix::from_fn(12, 2, |_, c| {
            if c == 0 {
                1.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let beta = DVector::from_vec(vec![0.4, -0.3]);
        let ctx = KrigingContext::new(&pts, &y, &x, model, beta.clone()).unwrap();
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        let s = Point2::new(3.3, 6.1);
        let x_s = DVector::from_vec(vec![1.0, 0.25]);
        let nb = neighbors_nearest_clique(s, &g, Some(&dom), 12).unwrap();
        assert_eq!(nb.indices.len(), 12);
        let pred = predict_at(s, &x_s, &nb, &ctx, 0.95).unwrap();

        // Textbook oracle computed from the dense matrices directly.
        let sigma = cov_matrix(&pts, &ctx.model, true);
        let chol = nalgebra::Cholesky::new(sigma).unwrap();
        let c_s = DVector::from_fn(12, |i, _| ctx.model.cov_value(s.dist(&pts[i])));
        let resid = &y - &x * &beta;
        let mean = x_s.dot(&beta) + c_s.dot(&chol.solve(&resid));
        let var = ctx.model.sigma2 + ctx.model.tau2 - c_s.dot(&chol.solve(&c_s));
        assert!((pred.mean - mean).abs() < 1e-9);
        assert!((pred.variance - var).abs() < 1e-9);
    }

    #[test]
    fn precision_weighting_combines_cliques() {
        let dom = make_u_domain();
        // Arm clique and bar clique, both visible from a site at the inner
        // notch corner but not from each other.
        let pts = vec![
            Point2::new(-4.5, -2.0),
            Point2::new(-4.2, -3.0),
            Point2::new(2.0, 2.6),
            Point2::new(3.0, 3.0),
        ];
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        let model = CovarianceModel::exponential(1.0, 0.3, 0.1).unwrap();
        let y = DVector::from_vec(vec![1.0, 1.2, -0.8, -1.0]);
        let x = DMatrix::from_element(4, 1, 1.0);
        let ctx = KrigingContext::new(&pts, &y, &x, model, DVector::from_element(1, 0.0)).unwrap();
        let s = Point2::new(-4.05, 2.05);
        let x_s = DVector::from_element(1, 1.0);
        let pw = predict_precision_weighted(s, &x_s, &g, Some(&dom), 4, &ctx, 0.95).unwrap();
        // The combined mean lies between the two clique means.
        let left = predict_at(
            s,
            &x_s,
            &NeighborSet {
                site: s,
                indices: vec![0, 1],
                strategy: Strategy::PrecisionWeighted,
                requested: 4,
            },
            &ctx,
            0.95,
        )
        .unwrap();
        let right = predict_at(
            s,
            &x_s,
            &NeighborSet {
                site: s,
                indices: vec![2, 3],
                strategy: Strategy::PrecisionWeighted,
                requested: 4,
            },
            &ctx,
            0.95,
        )
        .unwrap();
        let lo = left.mean.min(right.mean);
        let hi = left.mean.max(right.mean);
        assert!(pw.mean >= lo - 1e-12 && pw.mean <= hi + 1e-12);
        // Hand-combined precision weighting agrees.
        let k1 = 1.0 / left.variance;
        let k2 = 1.0 / right.variance;
        assert!((pw.mean - (k1 * left.mean + k2 * right.mean) / (k1 + k2)).abs() < 1e-10);
        assert!((pw.variance - 1.0 / (k1 + k2)).abs() < 1e-12);
    }

    #[test]
    fn equal_precision_cliques_average_their_means() {
        // Mirror-symmetric pairs, severed into two cliques by the distance
        // threshold: equal conditional precisions, so the combined mean is
        // the simple average of the clique means.
        let dom = convex_box();
        let pts = vec![
            Point2::new(1.0, 5.0),
            Point2::new(1.5, 5.0),
            Point2::new(9.0, 5.0),
            Point2::new(8.5, 5.0),
        ];
        let g = VisibilityGraph::build(&pts, &dom, Some(2.0)).unwrap();
        assert!(g.is_edge(0, 1) && g.is_edge(2, 3) && !g.is_edge(0, 2));
        let model = CovarianceModel::exponential(1.0, 0.3, 0.1).unwrap();
        let y = DVector::from_vec(vec![1.0, 0.8, -0.4, -0.2]);
        let x = DMatrix::from_element(4, 1, 1.0);
        let ctx = KrigingContext::new(&pts, &y, &x, model, DVector::from_element(1, 0.0)).unwrap();
        let s = Point2::new(5.0, 5.0);
        let x_s = DVector::from_element(1, 1.0);
        let pw = predict_precision_weighted(s, &x_s, &g, Some(&dom), 4, &ctx, 0.95).unwrap();
        let left = kriging_moments(s, &x_s, &[0, 1], &ctx).unwrap();
        let right = kriging_moments(s, &x_s, &[2, 3], &ctx).unwrap();
        assert!((left.1 - right.1).abs() < 1e-12, "symmetric variances");
        assert!((pw.mean - 0.5 * (left.0 + right.0)).abs() < 1e-10);
    }

    #[test]
    fn single_clique_precision_weighting_reduces_to_predict_at() {
        let dom = convex_box();
        let pts = scatter(8, 6, &dom);
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        let model = CovarianceModel::exponential(1.0, 0.4, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let y = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let x = DMatrix::from_element(8, 1, 1.0);
        let ctx = KrigingContext::new(&pts, &y, &x, model, DVector::from_element(1, 0.1)).unwrap();
        let s = Point2::new(5.0, 5.0);
        let x_s = DVector::from_element(1, 1.0);
        let pw = predict_precision_weighted(s, &x_s, &g, Some(&dom), 5, &ctx, 0.95).unwrap();
        let nb = neighbors_nearest_clique(s, &g, Some(&dom), 5).unwrap();
        let direct = predict_at(s, &x_s, &nb, &ctx, 0.95).unwrap();
        assert!((pw.mean - direct.mean).abs() < 1e-10);
        assert!((pw.variance - direct.variance).abs() < 1e-12);
    }

    #[test]
    fn interval_width_grows_with_level() {
        let dom = convex_box();
        let pts = scatter(10, 7, &dom);
        let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
        let model = CovarianceModel::exponential(1.0, 0.4, 0.1).unwrap();
        let y = DVector::from_element(10, 0.5);
        let x = DMatrix::from_element(10, 1, 1.0);
        let ctx = KrigingContext::new(&pts, &y, &x, model, DVector::from_element(1, 0.0)).unwrap();
        let s = Point2::new(2.0, 2.0);
        let x_s = DVector::from_element(1, 1.0);
        let nb = neighbors_nearest_clique(s, &g, Some(&dom), 5).unwrap();
        let mut prev = 0.0;
        for level in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let p = predict_at(s, &x_s, &nb, &ctx, level).unwrap();
            let width = p.upper - p.lower;
            assert!(width > prev);
            assert!(p.lower <= p.mean && p.mean <= p.upper);
            prev = width;
        }
        assert!(z_quantile(1.2).is_err());
    }

    #[test]
    fn prior_fallback_prediction() {
        let dom = convex_box();
        let pts = scatter(4, 8, &dom);
        let model = CovarianceModel::exponential(2.0, 0.4, 0.5).unwrap();
        let y = DVector::from_element(4, 0.0);
        let x = DMatrix::from_element(4, 1, 1.0);
        let ctx = KrigingContext::new(&pts, &y, &x, model, DVector::from_element(1, 1.7)).unwrap();
        let pred = prior_prediction(&DVector::from_element(1, 1.0), &ctx, 0.95).unwrap();
        assert!((pred.mean - 1.7).abs() < 1e-12);
        assert!((pred.variance - 2.5).abs() < 1e-12);
        assert_eq!(pred.neighbor_count, 0);
    }
}
