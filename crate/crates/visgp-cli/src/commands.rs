//! Subcommand implementations.

use crate::config::FileConfig;
use clap::Args;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use visgp::covariance::{cov_matrix, jitter_event_count, CovarianceModel};
use visgp::covsel::{covsel_chordal, covsel_ips};
use visgp::error::Error;
use visgp::estimate::{
    default_init, fit_full, fit_sgd, FamilyConfig, FitOptions, NngpConfig, RegressionData,
    SgdConfig,
};
use visgp::geometry::{Point2, PolygonDomain};
use visgp::io;
use visgp::predict::{
    neighbors_max_precision, neighbors_nearest_clique, predict_at, predict_precision_weighted,
    prior_prediction, KrigingContext, Prediction, Strategy,
};
use visgp::simulate::{DomainKind, Holdout, Method, SimScenario};
use visgp::visgraph::{
    chordal_completion, completion_diagnostics, decompose, perfect_ordering, VisibilityGraph,
};
use visgp::Result;

pub fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::PointsOutsideDomain { .. } => 3,
        Error::NoConvergence { .. } => 4,
        _ => 2,
    }
}

/// Caps the worker pool the core crate's parallel sections use. Must run
/// before the first parallel call initializes the global pool.
pub fn limit_workers(n: usize) {
    std::env::set_var("RAYON_NUM_THREADS", n.to_string());
}

fn stage(label: &str, secs: f64) {
    eprintln!("[timing] {label}: {secs:.2}s");
}

// ---------------------------------------------------------------------------
// Shared ingestion

struct Loaded {
    dom: PolygonDomain,
    domain_bytes: Vec<u8>,
    data: io::DataSet,
}

fn load_inputs(domain: &Path, data: &Path) -> Result<Loaded> {
    let (dom, domain_bytes) = io::load_domain(domain)?;
    let text = std::fs::read_to_string(data)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", data.display())))?;
    let data = io::data_from_csv(&text)?;
    Ok(Loaded {
        dom,
        domain_bytes,
        data,
    })
}

/// Builds the visibility graph, consulting the adjacency cache first.
fn graph_with_cache(
    loaded: &Loaded,
    d_max: Option<f64>,
    cache_dir: Option<&Path>,
) -> Result<(VisibilityGraph, f64)> {
    let t0 = Instant::now();
    let hash = io::adjacency_content_hash(&loaded.data.points, &loaded.domain_bytes, d_max);
    let cache_path = cache_dir.map(|d| d.join(format!("adj-{hash:016x}.visg")));
    if let Some(path) = &cache_path {
        if let Some((adj, cached_d_max)) = io::read_adjacency_cache(path, hash)? {
            eprintln!("[cache] hit: {}", path.display());
            let g = VisibilityGraph::from_parts(loaded.data.points.clone(), cached_d_max, adj)?;
            return Ok((g, t0.elapsed().as_secs_f64()));
        }
        eprintln!("[cache] miss: {}", path.display());
    }
    let g = VisibilityGraph::build(&loaded.data.points, &loaded.dom, d_max)?;
    if let Some(path) = &cache_path {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        io::write_adjacency_cache(path, g.adjacency(), d_max, hash)?;
    }
    Ok((g, t0.elapsed().as_secs_f64()))
}

fn parse_family(family: Option<&str>, nu: Option<f64>) -> Result<FamilyConfig> {
    match family.unwrap_or("exponential") {
        "exponential" | "exp" => Ok(FamilyConfig::exponential()),
        "matern" => Ok(FamilyConfig::matern(nu.unwrap_or(0.5))),
        other => Err(Error::InvalidInput(format!("unknown family '{other}'"))),
    }
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    match s {
        "nc" | "nearest-clique" => Ok(Strategy::NearestClique),
        "mp" | "max-precision" => Ok(Strategy::MaxPrecision),
        "pw" | "precision-weighted" => Ok(Strategy::PrecisionWeighted),
        other => Err(Error::InvalidInput(format!("unknown strategy '{other}'"))),
    }
}

// ---------------------------------------------------------------------------
// graph

#[derive(Args)]
pub struct GraphArgs {
    /// Domain polygon (GeoJSON or ring_id,x,y CSV).
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Observations CSV (x,y,value[,covariate_*]).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Distance threshold for the visibility graph.
    #[arg(long)]
    d_max: Option<f64>,
    /// Directory for the adjacency cache.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Output path for the decomposition JSON.
    #[arg(long, default_value = "decomposition.json")]
    out: PathBuf,
}

pub fn run_graph(args: GraphArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let domain = args
        .domain
        .or(cfg.domain_path.clone())
        .ok_or_else(missing("--domain"))?;
    let data = args
        .data
        .or(cfg.data_path.clone())
        .ok_or_else(missing("--data"))?;
    let d_max = args.d_max.or(cfg.d_max);
    let cache_dir = args.cache_dir.or(cfg.cache_dir.clone());
    let loaded = load_inputs(&domain, &data)?;

    let (g, secs) = graph_with_cache(&loaded, d_max, cache_dir.as_deref())?;
    stage("neighbor-finding", secs);

    let t1 = Instant::now();
    let completed = chordal_completion(&g);
    let decomp = perfect_ordering(&completed)?;
    let report = completion_diagnostics(&decomp, &g, &loaded.dom)?;
    stage("decomposition", t1.elapsed().as_secs_f64());

    std::fs::write(&args.out, io::decomposition_to_json(&decomp)?)?;

    println!(
        "sites: {}  edges: {}  cliques: {}  largest clique: {}",
        g.n(),
        g.edge_count(),
        decomp.cliques.len(),
        decomp.cliques.iter().map(Vec::len).max().unwrap_or(0)
    );
    println!("{}", report.summary());
    println!("decomposition written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// fit

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// "full" (quasi-Newton) or "sgd" (graph RMSProp).
    #[arg(long)]
    method: Option<String>,
    /// "exponential" or "matern".
    #[arg(long)]
    family: Option<String>,
    /// Matern smoothness (fixed, not estimated).
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// SGD learning rate.
    #[arg(long)]
    alpha: Option<f64>,
    /// SGD decay rate.
    #[arg(long)]
    beta_decay: Option<f64>,
    /// SGD stability constant.
    #[arg(long)]
    epsilon: Option<f64>,
    /// SGD epochs (0 = about 5000 component steps).
    #[arg(long)]
    epochs: Option<usize>,
    /// Fraction of trailing epochs averaged into the SGD estimate.
    #[arg(long)]
    tail_average: Option<f64>,
    /// Hold the regression coefficients at their starting values during SGD.
    #[arg(long)]
    fix_beta: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path for the fit JSON.
    #[arg(long, default_value = "fit.json")]
    out: PathBuf,
    /// Output path for the optimizer trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

pub fn run_fit(args: FitArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let domain = args
        .domain
        .or(cfg.domain_path.clone())
        .ok_or_else(missing("--domain"))?;
    let data_path = args
        .data
        .or(cfg.data_path.clone())
        .ok_or_else(missing("--data"))?;
    let d_max = args.d_max.or(cfg.d_max);
    let cache_dir = args.cache_dir.or(cfg.cache_dir.clone());
    let fam = parse_family(
        args.family.as_deref().or(cfg.family.as_deref()),
        args.nu.or(cfg.nu),
    )?;
    let method = args
        .method
        .or(cfg.method.clone())
        .unwrap_or_else(|| "full".into());
    let loaded = load_inputs(&domain, &data_path)?;

    let (g, secs) = graph_with_cache(&loaded, d_max, cache_dir.as_deref())?;
    stage("neighbor-finding", secs);

    let t1 = Instant::now();
    let decomp = decompose(&g)?;
    let data = RegressionData::new(
        loaded.data.y.clone(),
        loaded.data.x.clone(),
        loaded.data.points.clone(),
        decomp,
    )?;
    let init = default_init(&data)?;
    let jitter_before = jitter_event_count();
    let fit = match method.as_str() {
        "full" => fit_full(&data, &init, &fam, &FitOptions::default())?,
        "sgd" => {
            let base = cfg.sgd.unwrap_or_default();
            let sgd = SgdConfig {
                alpha: args.alpha.unwrap_or(base.alpha),
                beta_decay: args.beta_decay.unwrap_or(base.beta_decay),
                epsilon: args.epsilon.unwrap_or(base.epsilon),
                epochs: args.epochs.unwrap_or(base.epochs),
                seed: args.seed.or(cfg.seed).unwrap_or(base.seed),
                tail_average: args.tail_average.unwrap_or(base.tail_average),
                update_beta: if args.fix_beta {
                    false
                } else {
                    base.update_beta
                },
            };
            fit_sgd(&data, &init, &fam, &sgd, &NngpConfig::default())?
        }
        other => return Err(Error::InvalidInput(format!("unknown fit method '{other}'"))),
    };
    stage("model-fitting", t1.elapsed().as_secs_f64());
    let jitters = jitter_event_count() - jitter_before;
    if jitters > 0 {
        eprintln!("[jitter] {jitters} covariance block(s) needed diagonal jitter");
    }

    std::fs::write(&args.out, io::fit_result_to_json(&fit, &fam)?)?;
    let trace_path = args
        .trace
        .unwrap_or_else(|| args.out.with_extension("trace.csv"));
    std::fs::write(&trace_path, io::trace_to_csv(&fit.trace))?;
    println!(
        "method: {:?}  loglik: {:.6}  converged: {}  sigma2: {:.4}  phi: {:.4}  tau2: {:.6}",
        fit.method,
        fit.loglik,
        fit.converged,
        fit.params.sigma2(),
        fit.params.phi(),
        fit.params.tau2()
    );
    println!("fit written to {}", args.out.display());
    if fit.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: optimizer did not reach its convergence criterion");
        Ok(ExitCode::from(4))
    }
}

// ---------------------------------------------------------------------------
// predict

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Fit JSON produced by `visgp fit`.
    #[arg(long)]
    fit: PathBuf,
    /// Prediction sites CSV (x,y[,covariate_*]).
    #[arg(long)]
    sites: PathBuf,
    /// "nc", "mp", or "pw".
    #[arg(long)]
    strategy: Option<String>,
    /// Neighbor budget.
    #[arg(long)]
    k: Option<usize>,
    /// Interval level.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Fall back to the prior mean at sites with no visible neighbors
    /// instead of emitting a `no_neighbors` row.
    #[arg(long)]
    fallback_prior_mean: bool,
    #[arg(long, default_value = "predictions.csv")]
    out: PathBuf,
}

pub fn run_predict(args: PredictArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let domain = args
        .domain
        .or(cfg.domain_path.clone())
        .ok_or_else(missing("--domain"))?;
    let data_path = args
        .data
        .or(cfg.data_path.clone())
        .ok_or_else(missing("--data"))?;
    let strategy = parse_strategy(
        args.strategy
            .as_deref()
            .or(cfg.strategy.as_deref())
            .unwrap_or("mp"),
    )?;
    let k = args.k.or(cfg.k).unwrap_or(10);
    let level = args.level.or(cfg.level).unwrap_or(0.95);
    let d_max = args.d_max.or(cfg.d_max);
    let cache_dir = args.cache_dir.or(cfg.cache_dir.clone());
    let loaded = load_inputs(&domain, &data_path)?;

    let (model, beta) = read_fit_json(&args.fit)?;
    if beta.len() != loaded.data.x.ncols() {
        return Err(Error::InvalidInput(format!(
            "fit has {} coefficients but data has {} design columns",
            beta.len(),
            loaded.data.x.ncols()
        )));
    }
    let sites_text = std::fs::read_to_string(&args.sites)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", args.sites.display())))?;
    let (sites, sites_x) = io::sites_from_csv(&sites_text)?;
    if sites_x.ncols() != beta.len() {
        return Err(Error::InvalidInput(format!(
            "sites have {} design columns but fit has {} coefficients",
            sites_x.ncols(),
            beta.len()
        )));
    }

    let (g, secs) = graph_with_cache(&loaded, d_max, cache_dir.as_deref())?;
    stage("neighbor-finding", secs);

    let ctx = KrigingContext::new(
        &loaded.data.points,
        &loaded.data.y,
        &loaded.data.x,
        model,
        beta,
    )?;

    let t1 = Instant::now();
    let mut rows: Vec<(Point2, Option<Prediction>)> = Vec::with_capacity(sites.len());
    let mut no_neighbors = 0usize;
    for (i, s) in sites.iter().enumerate() {
        let x_s = sites_x.row(i).transpose();
        let pred = match strategy {
            Strategy::NearestClique => neighbors_nearest_clique(*s, &g, Some(&loaded.dom), k)
                .and_then(|nb| predict_at(*s, &x_s, &nb, &ctx, level)),
            Strategy::MaxPrecision => {
                neighbors_max_precision(*s, &g, Some(&loaded.dom), k, &ctx.model)
                    .and_then(|nb| predict_at(*s, &x_s, &nb, &ctx, level))
            }
            Strategy::PrecisionWeighted => {
                predict_precision_weighted(*s, &x_s, &g, Some(&loaded.dom), k, &ctx, level)
            }
        };
        match pred {
            Ok(p) => rows.push((*s, Some(p))),
            Err(Error::NoVisibleNeighbors) if args.fallback_prior_mean => {
                rows.push((*s, Some(prior_prediction(&x_s, &ctx, level)?)));
            }
            Err(Error::NoVisibleNeighbors) => {
                no_neighbors += 1;
                rows.push((*s, None));
            }
            Err(e) => return Err(e),
        }
    }
    stage("prediction", t1.elapsed().as_secs_f64());

    std::fs::write(&args.out, io::predictions_to_csv(&rows))?;
    println!(
        "predicted {} site(s) ({} without visible neighbors) -> {}",
        sites.len(),
        no_neighbors,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Reads back the parameters written by `fit` (natural scale.)
fn read_fit_json(path: &Path) -> Result<(CovarianceModel, DVector<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let params = v
        .get("params")
        .ok_or_else(|| Error::InvalidInput("fit JSON missing params".into()))?;
    let num = |key: &str| -> Result<f64> {
        params
            .get(key)
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| Error::InvalidInput(format!("fit JSON missing params.{key}")))
    };
    let beta: Vec<f64> = params
        .get("beta")
        .and_then(serde_json::Value::as_array)
        .map(|a| a.iter().filter_map(serde_json::Value::as_f64).collect())
        .ok_or_else(|| Error::InvalidInput("fit JSON missing params.beta".into()))?;
    // Family and smoothness ride along when present; exponential otherwise.
    let family = v
        .get("family")
        .and_then(serde_json::Value::as_str)
        .unwrap_or("exponential");
    let nu = v
        .get("nu")
        .and_then(serde_json::Value::as_f64)
        .unwrap_or(0.5);
    let model = match family {
        "matern" => CovarianceModel::matern(num("sigma2")?, num("phi")?, nu, num("tau2")?)?,
        _ => CovarianceModel::exponential(num("sigma2")?, num("phi")?, num("tau2")?)?,
    };
    Ok((model, DVector::from_vec(beta)))
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args)]
pub struct SimulateArgs {
    /// Scenario domain: fork, ushape, or figure-eight.
    #[arg(long, default_value = "fork")]
    scenario: String,
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    nugget_sd: f64,
    /// "checkerboard" or "random:<fraction>".
    #[arg(long, default_value = "checkerboard")]
    holdout: String,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of visgp-nc, visgp-mp, visgp-pw, euclidean.
    #[arg(long, default_value = "visgp-mp,euclidean")]
    methods: String,
    /// Pool size replicates subsample from.
    #[arg(long, default_value_t = 20_000)]
    pool_size: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value = "sim_report.csv")]
    out: PathBuf,
}

pub fn run_simulate(args: SimulateArgs, _cfg: &FileConfig) -> Result<ExitCode> {
    let domain = match args.scenario.as_str() {
        "fork" => DomainKind::Fork,
        "ushape" | "u-shape" | "u" => DomainKind::UShape,
        "figure-eight" | "figure8" => DomainKind::FigureEight,
        other => return Err(Error::InvalidInput(format!("unknown scenario '{other}'"))),
    };
    let holdout = if args.holdout == "checkerboard" {
        Holdout::Checkerboard
    } else if let Some(frac) = args.holdout.strip_prefix("random:") {
        let p: f64 = frac
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad holdout fraction '{frac}'")))?;
        Holdout::RandomFraction(p)
    } else {
        return Err(Error::InvalidInput(format!(
            "unknown holdout '{}'",
            args.holdout
        )));
    };
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .map(|m| {
            Method::parse(m.trim())
                .ok_or_else(|| Error::InvalidInput(format!("unknown method '{m}'")))
        })
        .collect::<Result<_>>()?;

    let mut sc = SimScenario::new(domain, args.n, args.nugget_sd, holdout);
    sc.replicates = args.replicates;
    sc.seed = args.seed;
    sc.pool_size = args.pool_size;
    sc.k = args.k;
    sc.level = args.level;

    let t0 = Instant::now();
    let report = visgp::simulate::run_scenario(&sc, &methods)?;
    stage("scenario", t0.elapsed().as_secs_f64());

    std::fs::write(&args.out, report.to_csv())?;
    print!("{}", report.to_csv());
    if report.replicate_failures > 0 {
        eprintln!(
            "warning: {} of {} replicate(s) failed and were excluded",
            report.replicate_failures, report.replicates_requested
        );
    }
    println!("report written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// covsel-check

#[derive(Args)]
pub struct CovselCheckArgs {
    /// Instance size (<= 200).
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Graph family: random, chordal, complete, cycle, or empty.
    #[arg(long, default_value = "random")]
    graph: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

pub fn run_covsel_check(args: CovselCheckArgs) -> Result<ExitCode> {
    if args.n > 200 {
        return Err(Error::InvalidInput("covsel-check supports n <= 200".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let points: Vec<Point2> = (0..args.n)
        .map(|_| Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
        .collect();
    let model = CovarianceModel::matern(1.0, 0.5, 1.0, 0.2)?;
    let k = cov_matrix(&points, &model, true);

    let mut adj = visgp::visgraph::BitMatrix::new(args.n);
    match args.graph.as_str() {
        "random" => {
            for i in 0..args.n {
                for j in (i + 1)..args.n {
                    if rng.random_bool(0.35) {
                        adj.set_sym(i, j);
                    }
                }
            }
        }
        "chordal" => {
            for i in 0..args.n {
                for j in (i + 1)..args.n {
                    if rng.random_bool(0.35) {
                        adj.set_sym(i, j);
                    }
                }
            }
            let g0 = VisibilityGraph::from_parts(points.clone(), None, adj)?;
            adj = chordal_completion(&g0).adjacency().clone();
        }
        "complete" => {
            for i in 0..args.n {
                for j in (i + 1)..args.n {
                    adj.set_sym(i, j);
                }
            }
        }
        "cycle" => {
            for i in 0..args.n {
                adj.set_sym(i, (i + 1) % args.n);
            }
        }
        "empty" => {}
        other => return Err(Error::InvalidInput(format!("unknown graph type '{other}'"))),
    }
    let g = VisibilityGraph::from_parts(points, None, adj)?;

    let res = covsel_ips(&k, &g, args.tol.min(1e-9), 500)?;
    let mut ok = true;

    println!(
        "entry-preservation residual: {:.3e}",
        res.max_entry_residual
    );
    ok &= res.max_entry_residual < args.tol;

    let prec = res
        .l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("selected covariance".into()))?;
    let mut off_graph: f64 = 0.0;
    for i in 0..g.n() {
        for j in (i + 1)..g.n() {
            if !g.is_edge(i, j) {
                off_graph =
                    off_graph.max(prec[(i, j)].abs() / (prec[(i, i)] * prec[(j, j)]).sqrt());
            }
        }
    }
    println!("off-graph precision (normalized): {:.3e}", off_graph);
    ok &= off_graph < args.tol.max(1e-8);

    let pd = nalgebra::Cholesky::new(res.l.clone()).is_some();
    println!("positive definite: {pd}");
    ok &= pd;

    let completed = chordal_completion(&g);
    if completed.added_edges().is_empty() {
        let decomp = perfect_ordering(&completed)?;
        let closed = covsel_chordal(&k, &decomp)?;
        let diff = (&res.l - &closed.l).abs().max();
        println!("ips vs chordal closed form: {diff:.3e}");
        ok &= diff < args.tol.max(1e-8);
    } else {
        println!("graph not chordal; closed-form comparison skipped");
    }

    println!("ips sweeps: {}", res.ips_iterations);
    if ok {
        println!("covsel-check: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("covsel-check: FAIL");
        Ok(ExitCode::from(1))
    }
}

fn missing(flag: &'static str) -> impl Fn() -> Error {
    move || Error::InvalidInput(format!("{flag} is required (flag or config file)"))
}
