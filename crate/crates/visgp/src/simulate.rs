//! Synthetic non-convex domains, data-generating truths, and the
//! replication harness producing MSE / coverage / interval-length tables.
//!
//! The fork domain has four parallel prongs joined by a base; the source
//! points (-5,-5), (-3,-5), (-1,-5), (1,-5) sit at the prong bases. Exact
//! prong width (1.5) and base height (2) are fixture choices. The U domain
//! is the square with corners (+-6, +-6) minus the channel (-4,4) x (-6,2);
//! the channel ceiling's midpoint Z = (0,2) is the joint the cross-channel
//! truth is measured from. The figure eight is two unit squares sharing
//! exactly the corner (0,0).

use crate::error::{Error, Result};
use crate::estimate::{
    chordal_loglik, default_init, fit_full, FamilyConfig, FitOptions, FitResult, NngpConfig,
    ParamVector, RegressionData,
};
use crate::geometry::{GeodesicEngine, Point2, PolygonDomain};
use crate::predict::{
    neighbors_max_precision, neighbors_nearest_clique, predict_at, predict_precision_weighted,
    KrigingContext, Prediction, Strategy,
};
use crate::visgraph::{decompose, VisibilityGraph};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Prong tips sit at this height; bases are at y = -5.
const FORK_PRONG_TOP: f64 = 5.0;
/// Prong width; centers are 2 apart, so the land gap between prongs is
/// 2 - width.
const FORK_PRONG_WIDTH: f64 = 1.5;

/// Four parallel rectangular prongs (centers at x = -5, -3, -1, 1) joined
/// by a base strip of height 2.
pub fn make_fork_domain() -> PolygonDomain {
    let top = FORK_PRONG_TOP;
    let half = FORK_PRONG_WIDTH / 2.0;
    let centers = [-5.0, -3.0, -1.0, 1.0];
    let left = centers[0] - half;
    let right = centers[3] + half;
    let mut ring: Vec<(f64, f64)> = vec![(left, -7.0), (right, -7.0), (right, top)];
    // Walk the prong tops and notches right to left.
    for i in (0..3).rev() {
        ring.push((centers[i + 1] - half, top));
        ring.push((centers[i + 1] - half, -5.0));
        ring.push((centers[i] + half, -5.0));
        ring.push((centers[i] + half, top));
    }
    ring.push((left, top));
    PolygonDomain::new(ring.into_iter().map(Point2::from).collect(), vec![]).unwrap()
}

/// Square with corners (+-6, +-6) minus the channel (-4, 4) x (-6, 2): two
/// arms joined by a bar across the top, central joint at Z = (0, 2).
pub fn make_u_domain() -> PolygonDomain {
    let ring = vec![
        (-6.0, -6.0),
        (-4.0, -6.0),
        (-4.0, 2.0),
        (4.0, 2.0),
        (4.0, -6.0),
        (6.0, -6.0),
        (6.0, 6.0),
        (-6.0, 6.0),
    ];
    PolygonDomain::new(ring.into_iter().map(Point2::from).collect(), vec![]).unwrap()
}

/// Joint of the U domain's two halves.
pub const U_DOMAIN_JOINT: Point2 = Point2 { x: 0.0, y: 2.0 };

/// Two unit squares touching at exactly the origin.
pub fn make_figure_eight() -> PolygonDomain {
    let ring = vec![
        (-1.0, -1.0),
        (0.0, -1.0),
        (0.0, 0.0),
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (0.0, 0.0),
        (-1.0, 0.0),
    ];
    PolygonDomain::new(ring.into_iter().map(Point2::from).collect(), vec![]).unwrap()
}

/// Source points at the fork prong bases.
pub const FORK_SOURCES: [Point2; 4] = [
    Point2 { x: -5.0, y: -5.0 },
    Point2 { x: -3.0, y: -5.0 },
    Point2 { x: -1.0, y: -5.0 },
    Point2 { x: 1.0, y: -5.0 },
];

/// Raw fork truth: with geodesic distances d_i from the four source points,
/// `f* = d1^2/3 + 3 sin(d3) - d2 d4`.
pub fn fork_truth_raw(s: Point2, engine: &GeodesicEngine) -> Result<f64> {
    let d: Vec<f64> = FORK_SOURCES
        .iter()
        .map(|p| engine.distance(*p, s))
        .collect::<Result<_>>()?;
    Ok(d[0] * d[0] / 3.0 + 3.0 * d[2].sin() - d[1] * d[3])
}

/// Raw U-domain truth: with g the geodesic distance from the joint Z,
/// `f* = g^3 + sin(3 g)`.
pub fn u_truth_raw(s: Point2, engine: &GeodesicEngine) -> Result<f64> {
    let g = engine.distance(U_DOMAIN_JOINT, s)?;
    Ok(g.powi(3) + (3.0 * g).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthKind {
    Fork,
    UShape,
    /// Cubic-plus-sine of the geodesic distance from a reference point.
    RadialFrom(PointKey),
}

/// Serde-friendly reference point for [`TruthKind::RadialFrom`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointKey {
    pub x: f64,
    pub y: f64,
}

impl Eq for PointKey {}

/// A truth surface standardized to mean 0, sd 1 over a point pool.
pub struct StandardizedTruth<'a> {
    kind: TruthKind,
    engine: &'a GeodesicEngine<'a>,
    mean: f64,
    sd: f64,
}

impl<'a> StandardizedTruth<'a> {
    /// Evaluates the raw truth over `pool` and freezes the standardization.
    pub fn build(
        kind: TruthKind,
        engine: &'a GeodesicEngine<'a>,
        pool: &[Point2],
    ) -> Result<(Self, Vec<f64>)> {
        let raw = raw_truth_values(kind, engine, pool)?;
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt().max(f64::MIN_POSITIVE);
        let standardized = raw.iter().map(|v| (v - mean) / sd).collect();
        Ok((
            Self {
                kind,
                engine,
                mean,
                sd,
            },
            standardized,
        ))
    }

    /// Standardized truth at an arbitrary point of the domain.
    pub fn value_at(&self, s: Point2) -> Result<f64> {
        let raw = match self.kind {
            TruthKind::Fork => fork_truth_raw(s, self.engine)?,
            TruthKind::UShape => u_truth_raw(s, self.engine)?,
            TruthKind::RadialFrom(z) => {
                let g = self.engine.distance(Point2::new(z.x, z.y), s)?;
                g.powi(3) + (3.0 * g).sin()
            }
        };
        Ok((raw - self.mean) / self.sd)
    }
}

fn raw_truth_values(kind: TruthKind, engine: &GeodesicEngine, pool: &[Point2]) -> Result<Vec<f64>> {
    match kind {
        TruthKind::Fork => {
            let per_source: Vec<Vec<f64>> = FORK_SOURCES
                .iter()
                .map(|p| engine.distances_from(*p, pool))
                .collect::<Result<_>>()?;
            Ok((0..pool.len())
                .map(|i| {
                    let d1 = per_source[0][i];
                    let d2 = per_source[1][i];
                    let d3 = per_source[2][i];
                    let d4 = per_source[3][i];
                    d1 * d1 / 3.0 + 3.0 * d3.sin() - d2 * d4
                })
                .collect())
        }
        TruthKind::UShape => {
            let d = engine.distances_from(U_DOMAIN_JOINT, pool)?;
            Ok(d.iter().map(|g| g.powi(3) + (3.0 * g).sin()).collect())
        }
        TruthKind::RadialFrom(z) => {
            let d = engine.distances_from(Point2::new(z.x, z.y), pool)?;
            Ok(d.iter().map(|g| g.powi(3) + (3.0 * g).sin()).collect())
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DomainKind {
    Fork,
    UShape,
    FigureEight,
    #[serde(skip)]
    Custom(PolygonDomain),
}

impl DomainKind {
    pub fn build(&self) -> PolygonDomain {
        match self {
            DomainKind::Fork => make_fork_domain(),
            DomainKind::UShape => make_u_domain(),
            DomainKind::FigureEight => make_figure_eight(),
            DomainKind::Custom(d) => d.clone(),
        }
    }

    fn truth_kind(&self, pool_head: Point2) -> TruthKind {
        match self {
            DomainKind::Fork => TruthKind::Fork,
            DomainKind::UShape => TruthKind::UShape,
            DomainKind::FigureEight => TruthKind::RadialFrom(PointKey { x: 0.0, y: 0.0 }),
            DomainKind::Custom(_) => TruthKind::RadialFrom(PointKey {
                x: pool_head.x,
                y: pool_head.y,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Holdout {
    /// Square tiles (side = domain diameter / 10) assigned to the test set
    /// with probability 0.2 by a seeded hash; deterministic in (seed,
    /// domain) and shared across replicates.
    Checkerboard,
    /// A fresh uniformly random fraction per replicate.
    RandomFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    VisgpNc,
    VisgpMp,
    VisgpPw,
    Euclidean,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::VisgpNc => "visgp-nc",
            Method::VisgpMp => "visgp-mp",
            Method::VisgpPw => "visgp-pw",
            Method::Euclidean => "euclidean",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "visgp-nc" => Some(Method::VisgpNc),
            "visgp-mp" => Some(Method::VisgpMp),
            "visgp-pw" => Some(Method::VisgpPw),
            "euclidean" => Some(Method::Euclidean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimScenario {
    pub domain: DomainKind,
    pub n: usize,
    pub nugget_sd: f64,
    pub holdout: Holdout,
    pub replicates: usize,
    pub seed: u64,
    /// Size of the fixed point pool replicates subsample from.
    pub pool_size: usize,
    /// Neighbor count for prediction.
    pub k: usize,
    /// Interval level.
    pub level: f64,
    /// Checkerboard tile side = domain diameter / this divisor.
    pub tile_divisor: f64,
}

impl SimScenario {
    pub fn new(domain: DomainKind, n: usize, nugget_sd: f64, holdout: Holdout) -> Self {
        Self {
            domain,
            n,
            nugget_sd,
            holdout,
            replicates: 1,
            seed: 0,
            pool_size: 20_000,
            k: 10,
            level: 0.95,
            tile_divisor: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 20 {
            return Err(Error::InvalidInput("scenario needs n >= 20".into()));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidInput("scenario needs replicates >= 1".into()));
        }
        if let Holdout::RandomFraction(p) = self.holdout {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidInput(
                    "holdout fraction must be in (0, 1)".into(),
                ));
            }
        }
        if self.pool_size < self.n {
            return Err(Error::InvalidInput("pool smaller than sample size".into()));
        }
        Ok(())
    }
}

/// Aggregated scores for one method.
#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub mse: f64,
    pub coverage: f64,
    pub ci_length: f64,
    pub wall_secs: f64,
    pub replicates_used: usize,
    pub sites_skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub rows: Vec<MethodReport>,
    pub replicates_requested: usize,
    pub replicate_failures: usize,
}

impl SimReport {
    pub fn row(&self, method: Method) -> Option<&MethodReport> {
        self.rows.iter().find(|r| r.method == method.label())
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("method,mse,coverage,ci_length,wall_secs,replicates_used,sites_skipped\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6e},{:.4},{:.4},{:.3},{},{}\n",
                r.method,
                r.mse,
                r.coverage,
                r.ci_length,
                r.wall_secs,
                r.replicates_used,
                r.sites_skipped
            ));
        }
        out
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Uniform points inside the domain by rejection from the bounding box.
pub fn sample_pool(dom: &PolygonDomain, size: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = dom.bbox();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let p = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if dom.contains(p) {
            out.push(p);
        }
    }
    out
}

/// Checkerboard tile assignment: true = test tile. Each tile joins the test
/// fold with probability 0.2 through a hash of (seed, tile coordinates), so
/// the split is 80/20 in expectation, deterministic in (seed, domain
/// geometry), and shared across replicates.
fn checkerboard_is_test(p: Point2, lo: Point2, tile: f64, seed: u64) -> bool {
    let ix = ((p.x - lo.x) / tile).floor() as i64;
    let iy = ((p.y - lo.y) / tile).floor() as i64;
    let h = splitmix64(seed ^ splitmix64(ix as u64 ^ (iy as u64).rotate_left(32)));
    (h as f64 / u64::MAX as f64) < 0.2
}

struct ReplicateScore {
    sum_sq: f64,
    covered: usize,
    length_sum: f64,
    scored: usize,
    skipped: usize,
    wall: f64,
}

struct ReplicateOutcome {
    per_method: Vec<(Method, ReplicateScore)>,
}

/// Runs the scenario end to end: per replicate, subsample the pool, add
/// noise, split train/test, fit each method, predict the held-out sites,
/// and score against the held-out responses. Per-replicate failures are
/// recorded and the scenario continues.
pub fn run_scenario(sc: &SimScenario, methods: &[Method]) -> Result<SimReport> {
    sc.validate()?;
    let dom = sc.domain.build();
    let engine = GeodesicEngine::new(&dom);
    let pool = sample_pool(&dom, sc.pool_size, sc.seed);
    let truth_kind = sc.domain.truth_kind(pool[0]);
    let (_truth, f_std) = StandardizedTruth::build(truth_kind, &engine, &pool)?;
    let (lo, _) = dom.bbox();
    let tile = dom.diameter() / sc.tile_divisor;

    let run_one = |rep: usize| -> Result<ReplicateOutcome> {
        replicate(sc, methods, &dom, &pool, &f_std, lo, tile, rep)
    };

    let outcomes: Vec<Result<ReplicateOutcome>>;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        outcomes = (0..sc.replicates).into_par_iter().map(run_one).collect();
    }
    #[cfg(not(feature = "parallel"))]
    {
        outcomes = (0..sc.replicates).map(run_one).collect();
    }

    let mut failures = 0;
    let mut acc: Vec<(Method, Vec<ReplicateScore>)> =
        methods.iter().map(|m| (*m, Vec::new())).collect();
    for out in outcomes {
        match out {
            Ok(o) => {
                for (m, score) in o.per_method {
                    if let Some(slot) = acc.iter_mut().find(|(mm, _)| *mm == m) {
                        slot.1.push(score);
                    }
                }
            }
            Err(_) => failures += 1,
        }
    }

    let rows = acc
        .into_iter()
        .map(|(m, scores)| {
            let reps = scores.len();
            let mut mse = 0.0;
            let mut cov = 0.0;
            let mut len = 0.0;
            let mut wall = 0.0;
            let mut skipped = 0;
            for s in &scores {
                let n = s.scored.max(1) as f64;
                mse += s.sum_sq / n;
                cov += s.covered as f64 / n;
                len += s.length_sum / n;
                wall += s.wall;
                skipped += s.skipped;
            }
            let d = reps.max(1) as f64;
            MethodReport {
                method: m.label().to_string(),
                mse: mse / d,
                coverage: cov / d,
                ci_length: len / d,
                wall_secs: wall / d,
                replicates_used: reps,
                sites_skipped: skipped,
            }
        })
        .collect();

    Ok(SimReport {
        rows,
        replicates_requested: sc.replicates,
        replicate_failures: failures,
    })
}

#[allow(clippy::too_many_arguments)]
fn replicate(
    sc: &SimScenario,
    methods: &[Method],
    dom: &PolygonDomain,
    pool: &[Point2],
    f_std: &[f64],
    lo: Point2,
    tile: f64,
    rep: usize,
) -> Result<ReplicateOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(sc.seed ^ splitmix64(rep as u64 + 1)));
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(&mut rng);
    idx.truncate(sc.n);

    let noise = Normal::new(0.0, sc.nugget_sd)
        .map_err(|_| Error::InvalidInput("nugget sd must be non-negative and finite".into()))?;
    let sampled: Vec<(Point2, f64)> = idx
        .iter()
        .map(|&i| (pool[i], f_std[i] + noise.sample(&mut rng)))
        .collect();

    let (train, test): (Vec<_>, Vec<_>) = match sc.holdout {
        Holdout::Checkerboard => sampled
            .iter()
            .partition(|(p, _)| !checkerboard_is_test(*p, lo, tile, sc.seed)),
        Holdout::RandomFraction(p) => {
            let n_test = ((sc.n as f64) * p).ceil() as usize;
            let mut order: Vec<usize> = (0..sampled.len()).collect();
            order.shuffle(&mut rng);
            let test_set: std::collections::HashSet<usize> =
                order[..n_test].iter().copied().collect();
            let mut tr = Vec::new();
            let mut te = Vec::new();
            for (i, s) in sampled.iter().enumerate() {
                if test_set.contains(&i) {
                    te.push(*s);
                } else {
                    tr.push(*s);
                }
            }
            (tr, te)
        }
    };
    if train.len() < 20 || test.is_empty() {
        return Err(Error::InvalidInput(format!(
            "degenerate split in replicate {rep}: {} train, {} test",
            train.len(),
            test.len()
        )));
    }

    let train_pts: Vec<Point2> = train.iter().map(|(p, _)| *p).collect();
    let train_y = DVector::from_iterator(train.len(), train.iter().map(|(_, y)| *y));
    let train_x = DMatrix::from_element(train.len(), 1, 1.0);
    let fam = FamilyConfig::exponential();

    let wants_visgp = methods.iter().any(|m| *m != Method::Euclidean);
    let mut per_method = Vec::new();

    let fit_opts = FitOptions::default();

    if wants_visgp {
        let t0 = Instant::now();
        let g = VisibilityGraph::build(&train_pts, dom, None)?;
        let decomp = decompose(&g)?;
        let data =
            RegressionData::new(train_y.clone(), train_x.clone(), train_pts.clone(), decomp)?;
        let init = default_init(&data)?;
        let fit = fit_full(&data, &init, &fam, &fit_opts)?;
        let fit_wall = t0.elapsed().as_secs_f64();
        let ctx = KrigingContext::new(
            &train_pts,
            &train_y,
            &train_x,
            fit.params.model(&fam),
            fit.params.beta.clone(),
        )?;
        for m in methods.iter().filter(|m| **m != Method::Euclidean) {
            let strategy = match m {
                Method::VisgpNc => Strategy::NearestClique,
                Method::VisgpMp => Strategy::MaxPrecision,
                Method::VisgpPw => Strategy::PrecisionWeighted,
                Method::Euclidean => unreachable!(),
            };
            let t1 = Instant::now();
            let score = score_method(&test, &g, Some(dom), &ctx, strategy, sc.k, sc.level);
            per_method.push((
                *m,
                ReplicateScore {
                    wall: fit_wall + t1.elapsed().as_secs_f64(),
                    ..score
                },
            ));
        }
    }

    if methods.contains(&Method::Euclidean) {
        let t0 = Instant::now();
        let g = VisibilityGraph::complete(&train_pts);
        let decomp = decompose(&g)?;
        let data =
            RegressionData::new(train_y.clone(), train_x.clone(), train_pts.clone(), decomp)?;
        let init = default_init(&data)?;
        let fit = fit_full(&data, &init, &fam, &fit_opts)?;
        let ctx = KrigingContext::new(
            &train_pts,
            &train_y,
            &train_x,
            fit.params.model(&fam),
            fit.params.beta.clone(),
        )?;
        let score = score_method(
            &test,
            &g,
            None,
            &ctx,
            Strategy::NearestClique,
            sc.k,
            sc.level,
        );
        per_method.push((
            Method::Euclidean,
            ReplicateScore {
                wall: t0.elapsed().as_secs_f64(),
                ..score
            },
        ));
    }

    Ok(ReplicateOutcome { per_method })
}

fn score_method(
    test: &[(Point2, f64)],
    g: &VisibilityGraph,
    dom: Option<&PolygonDomain>,
    ctx: &KrigingContext,
    strategy: Strategy,
    k: usize,
    level: f64,
) -> ReplicateScore {
    let x_s = DVector::from_element(1, 1.0);
    let mut score = ReplicateScore {
        sum_sq: 0.0,
        covered: 0,
        length_sum: 0.0,
        scored: 0,
        skipped: 0,
        wall: 0.0,
    };
    for (s, y) in test {
        let pred: Result<Prediction> = match strategy {
            Strategy::NearestClique => neighbors_nearest_clique(*s, g, dom, k)
                .and_then(|nb| predict_at(*s, &x_s, &nb, ctx, level)),
            Strategy::MaxPrecision => neighbors_max_precision(*s, g, dom, k, &ctx.model)
                .and_then(|nb| predict_at(*s, &x_s, &nb, ctx, level)),
            Strategy::PrecisionWeighted => {
                predict_precision_weighted(*s, &x_s, g, dom, k, ctx, level)
            }
        };
        match pred {
            Ok(p) => {
                score.sum_sq += (p.mean - y) * (p.mean - y);
                if *y >= p.lower && *y <= p.upper {
                    score.covered += 1;
                }
                score.length_sum += p.upper - p.lower;
                score.scored += 1;
            }
            Err(_) => score.skipped += 1,
        }
    }
    score
}

/// Convenience wrapper for fitting outside the harness.
pub fn fit_visgp(
    points: &[Point2],
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    dom: &PolygonDomain,
    fam: &FamilyConfig,
    d_max: Option<f64>,
) -> Result<(FitResult, VisibilityGraph)> {
    let g = VisibilityGraph::build(points, dom, d_max)?;
    let decomp = decompose(&g)?;
    let data = RegressionData::new(y.clone(), x.clone(), points.to_vec(), decomp)?;
    let init = default_init(&data)?;
    let fit = fit_full(&data, &init, fam, &FitOptions::default())?;
    Ok((fit, g))
}

/// Exact chordal log-likelihood at given parameters, for external checks.
pub fn loglik_at(
    points: &[Point2],
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    g: &VisibilityGraph,
    fam: &FamilyConfig,
    params: &ParamVector,
) -> Result<f64> {
    let decomp = decompose(g)?;
    let data = RegressionData::new(y.clone(), x.clone(), points.to_vec(), decomp)?;
    chordal_loglik(&data, params, fam, &NngpConfig::exact())
}
