//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured quantity (run with `--nocapture` to see them).
//!
//! Criteria:
//!  1. covariance-selection conditions on 200 random instances
//!  2. geodesic-exponential exactness on unions of convex pieces
//!  3. marginal stationarity at off-sample sites
//!  4. chordal likelihood equals the dense selected-covariance density
//!  5. analytic gradients match central finite differences
//!  6. stochastic-gradient fit reaches the full fit's objective
//!  7. fork-domain benchmark: accuracy bands and method ordering
//!  8. dense-holdout interval calibration
//!  9. convex-subdomain equivalence with Euclidean kriging
//! 10. within-clique nearest-neighbor likelihood fidelity

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use visgp::covariance::{cov_matrix, CovarianceModel};
use visgp::covsel::{covsel_chordal, covsel_ips, visgp_matrix};
use visgp::estimate::{
    chordal_loglik, chordal_loglik_grad, clique_loglik_nngp, default_init, fit_full, fit_sgd,
    FamilyConfig, FitOptions, NngpConfig, ParamVector, RegressionData, SgdConfig,
};
use visgp::geometry::{GeodesicEngine, Point2, PolygonDomain};
use visgp::predict::{marginal_variance_at, neighbors_nearest_clique, predict_at, KrigingContext};
use visgp::simulate::{
    make_figure_eight, make_fork_domain, make_u_domain, run_scenario, sample_pool, DomainKind,
    Holdout, Method, SimScenario, StandardizedTruth, TruthKind,
};
use visgp::visgraph::{
    chordal_completion, decompose, perfect_ordering, BitMatrix, VisibilityGraph,
};

fn check(criterion: u32, ok: bool, detail: &str) {
    println!(
        "criterion {criterion:02}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion:02} failed: {detail}");
}

/// Points with a minimum pairwise separation, for well-conditioned
/// covariance matrices.
fn separated_points(
    dom: &PolygonDomain,
    n: usize,
    min_dist: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Point2> {
    let (lo, hi) = dom.bbox();
    let mut pts: Vec<Point2> = Vec::new();
    let mut guard = 0;
    while pts.len() < n {
        guard += 1;
        assert!(guard < 200_000, "could not place separated points");
        let p = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if dom.contains(p) && pts.iter().all(|q| q.dist(&p) >= min_dist) {
            pts.push(p);
        }
    }
    pts
}

#[test]
fn criterion_01_covsel_conditions_on_random_instances() {
    let started = Instant::now();
    let mut worst_entry = 0.0f64;
    let mut worst_markov = 0.0f64;
    let mut worst_agreement = 0.0f64;
    let mut chordal_cases = 0;
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let n = rng.random_range(3..=12);
        let pts: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)))
            .collect();
        let model = CovarianceModel::matern(1.0, 0.6, 1.0, 0.25).unwrap();
        let k = cov_matrix(&pts, &model, true);
        let mut adj = BitMatrix::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(0.35) {
                    adj.set_sym(i, j);
                }
            }
        }
        let g = VisibilityGraph::from_parts(pts, None, adj).unwrap();
        let res = covsel_ips(&k, &g, 1e-10, 500).expect("IPS must converge");

        for i in 0..n {
            worst_entry = worst_entry.max((res.l[(i, i)] - k[(i, i)]).abs());
            for j in (i + 1)..n {
                if g.is_edge(i, j) {
                    worst_entry = worst_entry.max((res.l[(i, j)] - k[(i, j)]).abs());
                }
            }
        }
        let prec = res.l.clone().try_inverse().expect("L must invert");
        for i in 0..n {
            for j in (i + 1)..n {
                if !g.is_edge(i, j) {
                    let norm = (prec[(i, i)] * prec[(j, j)]).sqrt();
                    worst_markov = worst_markov.max(prec[(i, j)].abs() / norm);
                }
            }
        }
        assert!(
            nalgebra::Cholesky::new(res.l.clone()).is_some(),
            "L must stay SPD"
        );

        let completed = chordal_completion(&g);
        if completed.added_edges().is_empty() {
            chordal_cases += 1;
            let d = perfect_ordering(&completed).unwrap();
            let closed = covsel_chordal(&k, &d).unwrap();
            worst_agreement = worst_agreement.max((&res.l - &closed.l).abs().max());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        1,
        worst_entry < 1e-8 && worst_markov < 1e-8 && worst_agreement < 1e-8 && secs < 60.0,
        &format!(
            "entry residual {worst_entry:.2e}, off-graph precision {worst_markov:.2e}, \
             ips-vs-chordal {worst_agreement:.2e} over 200 instances ({chordal_cases} chordal), {secs:.1}s"
        ),
    );
}

#[test]
fn criterion_02_geodesic_exponential_exactness() {
    // Three-lobe chain of unit squares touching at single corners.
    let three_lobe = PolygonDomain::new(
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 1.0),
            Point2::new(2.0, 2.0),
            Point2::new(3.0, 2.0),
            Point2::new(3.0, 3.0),
            Point2::new(2.0, 3.0),
            Point2::new(2.0, 2.0),
            Point2::new(1.0, 2.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ],
        vec![],
    )
    .unwrap();
    let fixtures: Vec<(&str, PolygonDomain, Vec<Point2>)> = vec![
        (
            "figure-eight",
            make_figure_eight(),
            vec![Point2::new(0.0, 0.0)],
        ),
        (
            "three-lobe",
            three_lobe,
            vec![Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)],
        ),
    ];
    let model = CovarianceModel::exponential(1.3, 0.8, 0.0).unwrap();
    let mut worst = 0.0f64;
    for (name, dom, junctions) in fixtures {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut pts = junctions.clone();
        let sampled = separated_points(&dom, 30 - junctions.len(), 0.08, &mut rng);
        pts.extend(sampled);
        let engine = GeodesicEngine::new(&dom);
        let (res, _, _) = visgp_matrix(&pts, &dom, &model, None).unwrap();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let want =
                    model.sigma2 * (-model.phi * engine.distance(pts[i], pts[j]).unwrap()).exp();
                worst = worst.max((res.l[(i, j)] - want).abs());
            }
        }
        println!("  {name}: worst deviation so far {worst:.2e}");
    }
    check(
        2,
        worst < 1e-8,
        &format!("max |L_ij - sigma2 exp(-phi d_geo)| = {worst:.2e} on n = 30 fixtures"),
    );
}

#[test]
fn criterion_03_marginal_stationarity() {
    let model = CovarianceModel::matern(1.0, 0.1, 1.0, 1.0).unwrap();
    let target = model.sigma2 + model.tau2; // = 2
    let mut worst = 0.0f64;
    for (name, dom) in [
        ("fork", make_fork_domain()),
        ("u-shape", make_u_domain()),
        ("figure-eight", make_figure_eight()),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let sites = separated_points(&dom, 60, 0.05, &mut rng);
        let (res, g, _) = visgp_matrix(&sites, &dom, &model, None).unwrap();
        let mut tested = 0;
        let (lo, hi) = dom.bbox();
        while tested < 100 {
            let s = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if !dom.contains(s) || sites.contains(&s) {
                continue;
            }
            match marginal_variance_at(s, &g, Some(&dom), &model, 10, &res.l) {
                Ok(v) => {
                    worst = worst.max((v - target).abs());
                    tested += 1;
                }
                Err(visgp::Error::NoVisibleNeighbors) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
        println!("  {name}: worst |variance - 2| so far {worst:.2e}");
    }
    check(
        3,
        worst < 1e-8,
        &format!("max |marginal variance - (sigma2 + tau2)| = {worst:.2e} over 300 sites"),
    );
}

#[test]
fn criterion_04_likelihood_identity() {
    let started = Instant::now();
    let fam = FamilyConfig::exponential();
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let n = rng.random_range(20..=50);
        let pts: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.random_range(0.0..8.0), rng.random_range(0.0..8.0)))
            .collect();
        let mut adj = BitMatrix::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if pts[i].dist(&pts[j]) <= 3.0 {
                    adj.set_sym(i, j);
                }
            }
        }
        let g0 = VisibilityGraph::from_parts(pts.clone(), Some(3.0), adj).unwrap();
        // Work on the completed (chordal) graph so the identity is exact.
        let completed = chordal_completion(&g0);
        let decomp = perfect_ordering(&completed).unwrap();
        let x = DMatrix::from_fn(n, 2, |_, c| {
            if c == 0 {
                1.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let params =
            ParamVector::from_natural(DVector::from_vec(vec![0.3, -0.5]), 1.1, 0.6, 0.15).unwrap();
        let data = RegressionData::new(y.clone(), x.clone(), pts.clone(), decomp.clone()).unwrap();
        let ll = chordal_loglik(&data, &params, &fam, &NngpConfig::exact()).unwrap();

        let model = params.model(&fam);
        let sigma = cov_matrix(&pts, &model, true);
        let sel = covsel_chordal(&sigma, &decomp).unwrap();
        let chol = nalgebra::Cholesky::new(sel.l.clone()).unwrap();
        let r = &y - &x * &params.beta;
        let alpha = chol.solve(&r);
        let logdet: f64 = chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
            * 2.0;
        let dense = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + r.dot(&alpha));
        worst = worst.max((ll - dense).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        4,
        worst < 1e-6 && secs < 60.0,
        &format!("max |chordal loglik - dense selected loglik| = {worst:.2e}, {secs:.1}s"),
    );
}

#[test]
fn criterion_05_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let n = 20;
    let pts: Vec<Point2> = (0..n)
        .map(|_| Point2::new(rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)))
        .collect();
    let mut adj = BitMatrix::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if pts[i].dist(&pts[j]) <= 3.0 {
                adj.set_sym(i, j);
            }
        }
    }
    let g = VisibilityGraph::from_parts(pts.clone(), Some(3.0), adj).unwrap();
    let decomp = decompose(&g).unwrap();
    let x = DMatrix::from_fn(n, 2, |_, c| {
        if c == 0 {
            1.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let data = RegressionData::new(y, x, pts, decomp).unwrap();
    let fam = FamilyConfig::exponential();

    let mut worst_rel = 0.0f64;
    for _ in 0..50 {
        let params = ParamVector::from_natural(
            DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)),
            rng.random_range(0.3..3.0),
            rng.random_range(0.2..1.5),
            rng.random_range(0.02..0.5),
        )
        .unwrap();
        let grad = chordal_loglik_grad(&data, &params, &fam, &NngpConfig::exact()).unwrap();
        let flat_base = [
            params.beta[0],
            params.beta[1],
            params.log_sigma2,
            params.log_phi,
            params.log_tau2,
        ];
        let h = 1e-5;
        let g_inf = grad.amax();
        for d in 0..5 {
            let eval = |delta: f64| -> f64 {
                let mut f = flat_base;
                f[d] += delta;
                let p = ParamVector {
                    beta: DVector::from_vec(vec![f[0], f[1]]),
                    log_sigma2: f[2],
                    log_phi: f[3],
                    log_tau2: f[4],
                };
                chordal_loglik(&data, &p, &fam, &NngpConfig::exact()).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let denom = fd.abs().max(1e-4 * g_inf).max(1e-8);
            worst_rel = worst_rel.max((grad[d] - fd).abs() / denom);
        }
    }
    check(
        5,
        worst_rel < 1e-4,
        &format!("max per-coordinate relative error {worst_rel:.2e} over 50 random points"),
    );
}

#[test]
fn criterion_06_graph_sgd_reaches_full_fit_objective() {
    let started = Instant::now();
    let dom = make_fork_domain();
    let engine = GeodesicEngine::new(&dom);
    let pts = sample_pool(&dom, 1200, 61);
    let (_, f_std) = StandardizedTruth::build(TruthKind::Fork, &engine, &pts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let y = DVector::from_fn(1200, |i, _| {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        f_std[i] + 0.1 * z
    });
    let x = DMatrix::from_element(1200, 1, 1.0);

    let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
    let decomp = decompose(&g).unwrap();
    let data = RegressionData::new(y.clone(), x.clone(), pts.clone(), decomp).unwrap();
    let fam = FamilyConfig::exponential();
    let nngp = NngpConfig::exact();

    // Pilot fit on a quarter subsample supplies the starting point (and the
    // fixed regression coefficient) for the stochastic run, standing in for
    // an approximate warm start.
    let sub_idx: Vec<usize> = (0..1200).step_by(4).collect();
    let sub_pts: Vec<Point2> = sub_idx.iter().map(|&i| pts[i]).collect();
    let sub_y = DVector::from_iterator(sub_idx.len(), sub_idx.iter().map(|&i| y[i]));
    let sub_x = DMatrix::from_element(sub_idx.len(), 1, 1.0);
    let sub_g = VisibilityGraph::build(&sub_pts, &dom, None).unwrap();
    let sub_data = RegressionData::new(sub_y, sub_x, sub_pts, decompose(&sub_g).unwrap()).unwrap();
    let pilot = fit_full(
        &sub_data,
        &default_init(&sub_data).unwrap(),
        &fam,
        &FitOptions {
            nngp,
            ..FitOptions::default()
        },
    )
    .unwrap();

    let full = fit_full(
        &data,
        &default_init(&data).unwrap(),
        &fam,
        &FitOptions {
            nngp,
            ..FitOptions::default()
        },
    )
    .unwrap();
    let sgd_cfg = SgdConfig {
        seed: 7,
        alpha: 0.005,
        update_beta: false,
        ..SgdConfig::default()
    };
    let sgd = fit_sgd(&data, &pilot.params, &fam, &sgd_cfg, &nngp).unwrap();

    let full_ll = chordal_loglik(&data, &full.params, &fam, &nngp).unwrap();
    let sgd_ll = chordal_loglik(&data, &sgd.params, &fam, &nngp).unwrap();
    let gap = (full_ll - sgd_ll).abs() / full_ll.abs();
    let secs = started.elapsed().as_secs_f64();
    check(
        6,
        gap < 0.01,
        &format!(
            "full loglik {full_ll:.2}, sgd loglik {sgd_ll:.2}, relative gap {gap:.4} ({secs:.0}s)"
        ),
    );
}

#[test]
fn criterion_07_fork_benchmark_bands_and_ordering() {
    let started = Instant::now();
    let mut sc = SimScenario::new(DomainKind::Fork, 250, 0.1, Holdout::Checkerboard);
    sc.replicates = 20;
    sc.seed = 71;
    let report = run_scenario(&sc, &[Method::VisgpMp, Method::Euclidean]).unwrap();
    let visgp = report.row(Method::VisgpMp).expect("visgp row");
    let euclid = report.row(Method::Euclidean).expect("euclidean row");
    let secs = started.elapsed().as_secs_f64();

    let sub = [
        (
            (0.02..=0.08).contains(&visgp.mse),
            format!("visgp-mp mse {:.4} in 0.02..0.08", visgp.mse),
        ),
        (
            euclid.mse > 0.5,
            format!("euclidean mse {:.4} > 0.5", euclid.mse),
        ),
        (
            (0.85..=0.97).contains(&visgp.coverage),
            format!("visgp coverage {:.3} in 0.85..0.97", visgp.coverage),
        ),
        (
            visgp.mse < euclid.mse,
            format!("ordering {:.4} < {:.4}", visgp.mse, euclid.mse),
        ),
        (
            report.replicate_failures == 0,
            format!("{} replicate failures", report.replicate_failures),
        ),
        (secs < 1800.0, format!("{secs:.0}s < 1800s")),
    ];
    for (ok, msg) in &sub {
        println!(
            "  criterion 07 sub-check [{}]: {msg}",
            if *ok { "ok" } else { "FAIL" }
        );
    }
    // Known limitation: an exactly fitted Euclidean baseline does not
    // collapse on this fixture (it finds the long-range smooth structure
    // and scores ~0.03-0.07), so the `> 0.5` sub-check fails even though
    // the method ordering and the visGP bands hold.
    check(
        7,
        sub.iter().all(|(ok, _)| *ok),
        &sub.iter()
            .map(|(_, m)| m.as_str())
            .collect::<Vec<_>>()
            .join("; "),
    );
}

#[test]
fn criterion_08_dense_holdout_calibration() {
    let mut sc = SimScenario::new(DomainKind::Fork, 250, 0.1, Holdout::RandomFraction(0.2));
    sc.replicates = 20;
    sc.seed = 81;
    let report = run_scenario(&sc, &[Method::VisgpMp]).unwrap();
    let visgp = report.row(Method::VisgpMp).unwrap();
    check(
        8,
        (0.90..=0.99).contains(&visgp.coverage) && report.replicate_failures == 0,
        &format!(
            "visgp-mp coverage {:.4} at nominal 0.95 (band 0.90..0.99)",
            visgp.coverage
        ),
    );
}

#[test]
fn criterion_09_convex_subdomain_equivalence() {
    // All data in the left arm of the U domain, a convex rectangle: the
    // visibility graph is complete, so the whole pipeline must coincide
    // with dense Euclidean universal kriging.
    let dom = make_u_domain();
    let arm = PolygonDomain::new(
        vec![
            Point2::new(-5.9, -5.9),
            Point2::new(-4.1, -5.9),
            Point2::new(-4.1, 5.9),
            Point2::new(-5.9, 5.9),
        ],
        vec![],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let pts = separated_points(&arm, 60, 0.05, &mut rng);
    let y = DVector::from_fn(60, |i, _| (pts[i].y * 0.4).sin() + 0.1 * pts[i].x);
    let x = DMatrix::from_element(60, 1, 1.0);
    let fam = FamilyConfig::exponential();

    let g = VisibilityGraph::build(&pts, &dom, None).unwrap();
    assert_eq!(
        g.edge_count(),
        60 * 59 / 2,
        "convex subdomain must give a complete graph"
    );
    let decomp = decompose(&g).unwrap();
    let data = RegressionData::new(y.clone(), x.clone(), pts.clone(), decomp).unwrap();
    let init = default_init(&data).unwrap();
    let fit = fit_full(&data, &init, &fam, &FitOptions::default()).unwrap();
    let ctx = KrigingContext::new(
        &pts,
        &y,
        &x,
        fit.params.model(&fam),
        fit.params.beta.clone(),
    )
    .unwrap();

    // Dense universal-kriging oracle with the same plug-in parameters.
    let model = fit.params.model(&fam);
    let sigma = cov_matrix(&pts, &model, true);
    let chol = nalgebra::Cholesky::new(sigma).unwrap();
    let resid = &y - &x * &fit.params.beta;
    let alpha = chol.solve(&resid);

    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    let x_s = DVector::from_element(1, 1.0);
    for _ in 0..40 {
        let s = Point2::new(rng.random_range(-5.8..-4.2), rng.random_range(-5.8..5.8));
        let nb = neighbors_nearest_clique(s, &g, Some(&dom), 60).unwrap();
        assert_eq!(nb.indices.len(), 60);
        let pred = predict_at(s, &x_s, &nb, &ctx, 0.95).unwrap();
        let c_s = DVector::from_fn(60, |i, _| model.cov_value(s.dist(&pts[i])));
        let mean = fit.params.beta[0] + c_s.dot(&alpha);
        let var = model.sigma2 + model.tau2 - c_s.dot(&chol.solve(&c_s));
        worst_mean = worst_mean.max((pred.mean - mean).abs());
        worst_var = worst_var.max((pred.variance - var).abs());
    }
    check(
        9,
        worst_mean < 1e-8 && worst_var < 1e-8,
        &format!("max |mean diff| {worst_mean:.2e}, max |variance diff| {worst_var:.2e}"),
    );
}

#[test]
fn criterion_10_nngp_within_clique_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let n = 100;
    let pts: Vec<Point2> = (0..n)
        .map(|_| Point2::new(rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)))
        .collect();
    let model = CovarianceModel::exponential(1.0, 0.8, 0.1).unwrap();
    let sigma = cov_matrix(&pts, &model, true);
    let chol = nalgebra::Cholesky::new(sigma.clone()).unwrap();
    let z = DVector::from_fn(n, |_, _| -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
    });
    let y = chol.l() * z;
    let x = DMatrix::from_element(n, 1, 1.0);
    let beta = DVector::from_element(1, 0.0);

    let r = &y;
    let alpha = chol.solve(r);
    let logdet: f64 = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
        * 2.0;
    let exact = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + r.dot(&alpha));

    let full = clique_loglik_nngp(&y, &x, &pts, &beta, &model, n - 1).unwrap();
    let approx = clique_loglik_nngp(&y, &x, &pts, &beta, &model, 15).unwrap();
    let exact_gap = (full - exact).abs();
    let rel = (approx - exact).abs() / exact.abs();
    check(
        10,
        exact_gap < 1e-10 && rel < 0.02,
        &format!("m = 99 gap {exact_gap:.2e} (< 1e-10), m = 15 relative error {rel:.4} (< 0.02)"),
    );
}
