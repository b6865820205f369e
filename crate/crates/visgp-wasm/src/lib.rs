//! Interactive browser demo for visibility-graph kriging.
//!
//! Three operations are exported, each returning a JSON payload the page
//! renders on a canvas:
//!
//! * [`visibility_demo`] — sites, visibility edges, and completion fill
//!   edges on a chosen fixture domain;
//! * [`covariance_demo`] — the process covariance field from a picked point
//!   under the visibility-graph construction versus the plain Euclidean
//!   covariance;
//! * [`prediction_demo`] — a fitted kriging surface (mean and standard
//!   deviation) next to the Euclidean-baseline surface on the same data.
//!
//! Build with `wasm-pack build --target web crates/visgp-wasm` (or
//! `cargo build --target wasm32-unknown-unknown` plus `wasm-bindgen`); the
//! static page in `www/` loads the generated module directly.

use serde_json::json;
use visgp::covariance::CovarianceModel;
use visgp::covsel::visgp_matrix;
use visgp::estimate::{default_init, fit_full, FamilyConfig, FitOptions, RegressionData};
use visgp::geometry::{GeodesicEngine, Point2, PolygonDomain};
use visgp::predict::{
    neighbors_max_precision, neighbors_nearest_clique, predict_at, predict_precision_weighted,
    KrigingContext, Strategy,
};
use visgp::simulate::{
    make_figure_eight, make_fork_domain, make_u_domain, sample_pool, StandardizedTruth, TruthKind,
};
use visgp::visgraph::{decompose, VisibilityGraph};
use wasm_bindgen::prelude::*;

fn pick_domain(name: &str) -> Result<PolygonDomain, String> {
    match name {
        "fork" => Ok(make_fork_domain()),
        "ushape" => Ok(make_u_domain()),
        "figure-eight" => Ok(make_figure_eight()),
        other => Err(format!("unknown domain '{other}'")),
    }
}

fn truth_kind(name: &str) -> TruthKind {
    match name {
        "fork" => TruthKind::Fork,
        "ushape" => TruthKind::UShape,
        _ => TruthKind::RadialFrom(visgp::simulate::PointKey { x: 0.0, y: 0.0 }),
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rings_json(dom: &PolygonDomain) -> serde_json::Value {
    let ring = |r: &[Point2]| -> Vec<[f64; 2]> { r.iter().map(|p| [p.x, p.y]).collect() };
    json!({
        "outer": ring(dom.outer()),
        "holes": dom.holes().iter().map(|h| ring(h)).collect::<Vec<_>>(),
        "bbox": { "lo": [dom.bbox().0.x, dom.bbox().0.y], "hi": [dom.bbox().1.x, dom.bbox().1.y] },
    })
}

/// Names of the built-in demo domains.
#[wasm_bindgen]
pub fn domains() -> String {
    json!(["fork", "ushape", "figure-eight"]).to_string()
}

/// Visibility graph and chordal completion over `n` random sites.
/// `d_max <= 0` disables the distance threshold.
#[wasm_bindgen]
pub fn visibility_demo(domain: &str, n: u32, seed: u32, d_max: f64) -> Result<String, JsValue> {
    visibility_demo_impl(domain, n, seed, d_max).map_err(|e| JsValue::from_str(&e))
}

fn visibility_demo_impl(domain: &str, n: u32, seed: u32, d_max: f64) -> Result<String, String> {
    let dom = pick_domain(domain)?;
    let pts = sample_pool(&dom, n as usize, seed as u64);
    let threshold = (d_max > 0.0).then_some(d_max);
    let g = VisibilityGraph::build(&pts, &dom, threshold).map_err(err)?;
    let decomp = decompose(&g).map_err(err)?;
    let payload = json!({
        "domain": rings_json(&dom),
        "points": pts.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
        "edges": g.edges(),
        "added_edges": decomp.added_edges,
        "cliques": decomp.cliques.len(),
        "largest_clique": decomp.cliques.iter().map(Vec::len).max().unwrap_or(0),
        "edge_count": g.edge_count(),
    });
    Ok(payload.to_string())
}

/// Covariance of the process between a picked site and every cell of a
/// raster, under the visibility-graph construction and under the plain
/// Euclidean model, plus the geodesic-distance covariance for reference.
#[wasm_bindgen]
pub fn covariance_demo(
    domain: &str,
    n: u32,
    seed: u32,
    site_x: f64,
    site_y: f64,
    phi: f64,
    grid: u32,
) -> Result<String, JsValue> {
    covariance_demo_impl(domain, n, seed, site_x, site_y, phi, grid)
        .map_err(|e| JsValue::from_str(&e))
}

#[allow(clippy::too_many_arguments)]
fn covariance_demo_impl(
    domain: &str,
    n: u32,
    seed: u32,
    site_x: f64,
    site_y: f64,
    phi: f64,
    grid: u32,
) -> Result<String, String> {
    let dom = pick_domain(domain)?;
    if phi <= 0.0 || !phi.is_finite() {
        return Err("phi must be positive".to_string());
    }
    let s0 = Point2::new(site_x, site_y);
    if !dom.contains(s0) {
        return Err("picked site is outside the domain".to_string());
    }
    let model = CovarianceModel::exponential(1.0, phi, 1e-8).map_err(err)?;
    let pts = sample_pool(&dom, n as usize, seed as u64);
    let (sel, g, _) = visgp_matrix(&pts, &dom, &model, None).map_err(err)?;
    let engine = GeodesicEngine::new(&dom);

    let (lo, hi) = dom.bbox();
    let nx = grid as usize;
    let ny = grid as usize;
    let dx = (hi.x - lo.x) / nx as f64;
    let dy = (hi.y - lo.y) / ny as f64;

    // Kriging weights of the picked site onto its neighbor clique.
    let weights_of = |s: Point2| -> Option<(Vec<usize>, Vec<f64>)> {
        let nb = neighbors_nearest_clique(s, &g, Some(&dom), 10).ok()?;
        let m = nb.indices.len();
        let mut c_nn = nalgebra::DMatrix::zeros(m, m);
        let mut c_sn = nalgebra::DVector::zeros(m);
        for (a, &i) in nb.indices.iter().enumerate() {
            c_nn[(a, a)] = model.sigma2 + model.tau2;
            for (b, &j) in nb.indices.iter().enumerate().skip(a + 1) {
                let v = model.cov_value(pts[i].dist(&pts[j]));
                c_nn[(a, b)] = v;
                c_nn[(b, a)] = v;
            }
            c_sn[a] = model.cov_value(s.dist(&pts[i]));
        }
        let chol = nalgebra::Cholesky::new(c_nn)?;
        Some((nb.indices, chol.solve(&c_sn).iter().copied().collect()))
    };

    let (idx0, w0) = weights_of(s0).ok_or_else(|| "no visible sites".to_string())?;

    let mut visgp_field: Vec<Option<f64>> = Vec::with_capacity(nx * ny);
    let mut euclid_field: Vec<Option<f64>> = Vec::with_capacity(nx * ny);
    let mut geodesic_field: Vec<Option<f64>> = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let s = Point2::new(lo.x + (ix as f64 + 0.5) * dx, lo.y + (iy as f64 + 0.5) * dy);
            if !dom.contains(s) {
                visgp_field.push(None);
                euclid_field.push(None);
                geodesic_field.push(None);
                continue;
            }
            // Process covariance: B(s0) L(N0, Ns) B(s)'.
            let cell = weights_of(s).map(|(idx, w)| {
                let mut acc = 0.0;
                for (a, &i) in idx0.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        acc += w0[a] * sel.l[(i, j)] * w[b];
                    }
                }
                acc
            });
            visgp_field.push(cell);
            euclid_field.push(Some(model.cov_value(s0.dist(&s))));
            geodesic_field.push(
                engine
                    .distance(s0, s)
                    .ok()
                    .map(|d| model.sigma2 * (-model.phi * d).exp()),
            );
        }
    }

    Ok(json!({
        "domain": rings_json(&dom),
        "site": [s0.x, s0.y],
        "points": pts.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
        "grid": { "nx": nx, "ny": ny, "x0": lo.x, "y0": lo.y, "dx": dx, "dy": dy },
        "visgp": visgp_field,
        "euclid": euclid_field,
        "geodesic": geodesic_field,
    })
    .to_string())
}

/// Fits the model to data simulated from the domain's truth surface and
/// rasterizes kriging mean and standard deviation, next to the Euclidean
/// baseline fitted to the same data.
#[wasm_bindgen]
pub fn prediction_demo(
    domain: &str,
    n: u32,
    seed: u32,
    noise_sd: f64,
    k: u32,
    strategy: &str,
    grid: u32,
) -> Result<String, JsValue> {
    prediction_demo_impl(domain, n, seed, noise_sd, k, strategy, grid)
        .map_err(|e| JsValue::from_str(&e))
}

#[allow(clippy::too_many_arguments)]
fn prediction_demo_impl(
    domain: &str,
    n: u32,
    seed: u32,
    noise_sd: f64,
    k: u32,
    strategy: &str,
    grid: u32,
) -> Result<String, String> {
    let dom = pick_domain(domain)?;
    let strategy = match strategy {
        "nc" => Strategy::NearestClique,
        "mp" => Strategy::MaxPrecision,
        "pw" => Strategy::PrecisionWeighted,
        other => return Err(format!("unknown strategy '{other}'")),
    };
    let engine = GeodesicEngine::new(&dom);
    let pool = sample_pool(&dom, (n as usize).max(200) * 4, seed as u64);
    let (_truth, f_std) =
        StandardizedTruth::build(truth_kind(domain), &engine, &pool).map_err(err)?;

    // Deterministic noise from a small hash; keeps the demo free of an RNG
    // dependency in the wasm build.
    let noise = |i: usize| -> f64 {
        let mut h = (seed as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64);
        h ^= h >> 33;
        h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
        h ^= h >> 33;
        let u1 = (h >> 11) as f64 / (1u64 << 53) as f64;
        let u2 = ((h.wrapping_mul(0xC4CE_B9FE_1A85_EC53)) >> 11) as f64 / (1u64 << 53) as f64;
        let u1 = u1.max(1e-12);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };

    let train_pts: Vec<Point2> = pool[..n as usize].to_vec();
    let train_y = nalgebra::DVector::from_iterator(
        n as usize,
        (0..n as usize).map(|i| f_std[i] + noise_sd * noise(i)),
    );
    let train_x = nalgebra::DMatrix::from_element(n as usize, 1, 1.0);
    let fam = FamilyConfig::exponential();

    let g = VisibilityGraph::build(&train_pts, &dom, None).map_err(err)?;
    let decomp = decompose(&g).map_err(err)?;
    let data = RegressionData::new(train_y.clone(), train_x.clone(), train_pts.clone(), decomp)
        .map_err(err)?;
    let init = default_init(&data).map_err(err)?;
    let fit = fit_full(&data, &init, &fam, &FitOptions::default()).map_err(err)?;
    let ctx = KrigingContext::new(
        &train_pts,
        &train_y,
        &train_x,
        fit.params.model(&fam),
        fit.params.beta.clone(),
    )
    .map_err(err)?;

    let g_e = VisibilityGraph::complete(&train_pts);
    let decomp_e = decompose(&g_e).map_err(err)?;
    let data_e = RegressionData::new(
        train_y.clone(),
        train_x.clone(),
        train_pts.clone(),
        decomp_e,
    )
    .map_err(err)?;
    let fit_e = fit_full(
        &data_e,
        &default_init(&data_e).map_err(err)?,
        &fam,
        &FitOptions::default(),
    )
    .map_err(err)?;
    let ctx_e = KrigingContext::new(
        &train_pts,
        &train_y,
        &train_x,
        fit_e.params.model(&fam),
        fit_e.params.beta.clone(),
    )
    .map_err(err)?;

    let (lo, hi) = dom.bbox();
    let nx = grid as usize;
    let ny = grid as usize;
    let dx = (hi.x - lo.x) / nx as f64;
    let dy = (hi.y - lo.y) / ny as f64;
    let x_s = nalgebra::DVector::from_element(1, 1.0);

    let mut mean_field: Vec<Option<f64>> = Vec::with_capacity(nx * ny);
    let mut sd_field: Vec<Option<f64>> = Vec::with_capacity(nx * ny);
    let mut euclid_mean: Vec<Option<f64>> = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let s = Point2::new(lo.x + (ix as f64 + 0.5) * dx, lo.y + (iy as f64 + 0.5) * dy);
            if !dom.contains(s) {
                mean_field.push(None);
                sd_field.push(None);
                euclid_mean.push(None);
                continue;
            }
            let pred = match strategy {
                Strategy::NearestClique => neighbors_nearest_clique(s, &g, Some(&dom), k as usize)
                    .and_then(|nb| predict_at(s, &x_s, &nb, &ctx, 0.95)),
                Strategy::MaxPrecision => {
                    neighbors_max_precision(s, &g, Some(&dom), k as usize, &ctx.model)
                        .and_then(|nb| predict_at(s, &x_s, &nb, &ctx, 0.95))
                }
                Strategy::PrecisionWeighted => {
                    predict_precision_weighted(s, &x_s, &g, Some(&dom), k as usize, &ctx, 0.95)
                }
            };
            match pred {
                Ok(p) => {
                    mean_field.push(Some(p.mean));
                    sd_field.push(Some(p.variance.sqrt()));
                }
                Err(_) => {
                    mean_field.push(None);
                    sd_field.push(None);
                }
            }
            let e = neighbors_nearest_clique(s, &g_e, None, k as usize)
                .and_then(|nb| predict_at(s, &x_s, &nb, &ctx_e, 0.95));
            euclid_mean.push(e.ok().map(|p| p.mean));
        }
    }

    Ok(json!({
        "domain": rings_json(&dom),
        "train": train_pts
            .iter()
            .zip(train_y.iter())
            .map(|(p, y)| [p.x, p.y, *y])
            .collect::<Vec<_>>(),
        "grid": { "nx": nx, "ny": ny, "x0": lo.x, "y0": lo.y, "dx": dx, "dy": dy },
        "visgp_mean": mean_field,
        "visgp_sd": sd_field,
        "euclid_mean": euclid_mean,
        "params": {
            "sigma2": fit.params.sigma2(),
            "phi": fit.params.phi(),
            "tau2": fit.params.tau2(),
            "loglik": fit.loglik,
        },
    })
    .to_string())
}

// The demo logic is ordinary Rust; keep it testable on the host target.
#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_list_parses() {
        let v: Vec<String> = serde_json::from_str(&domains()).unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn visibility_payload_shape() {
        let out = visibility_demo_impl("figure-eight", 40, 7, 0.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 40);
        assert!(v["edge_count"].as_u64().unwrap() > 0);
        // The pinch splits sites into two camps, so the graph must be far
        // from complete.
        assert!(v["edge_count"].as_u64().unwrap() < 40 * 39 / 2);
        assert!(visibility_demo_impl("nope", 10, 1, 0.0).is_err());
    }

    #[test]
    fn covariance_field_respects_barrier() {
        let out = covariance_demo_impl("ushape", 150, 3, -5.0, -4.0, 0.3, 24).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let grid = &v["grid"];
        let nx = grid["nx"].as_u64().unwrap() as usize;
        let x0 = grid["x0"].as_f64().unwrap();
        let y0 = grid["y0"].as_f64().unwrap();
        let dx = grid["dx"].as_f64().unwrap();
        let dy = grid["dy"].as_f64().unwrap();
        let visgp = v["visgp"].as_array().unwrap();
        let euclid = v["euclid"].as_array().unwrap();
        // Mirror cell across the notch: close in Euclidean terms, far
        // through the domain; the selected covariance must be much smaller
        // than the Euclidean one there.
        let cell = |x: f64, y: f64| -> usize {
            let ix = ((x - x0) / dx).floor() as usize;
            let iy = ((y - y0) / dy).floor() as usize;
            iy * nx + ix
        };
        let mirror = cell(5.0, -4.0);
        let near = cell(-5.0, -3.0);
        let v_mirror = visgp[mirror].as_f64().expect("mirror cell inside domain");
        let e_mirror = euclid[mirror].as_f64().unwrap();
        let v_near = visgp[near].as_f64().expect("near cell inside domain");
        assert!(
            v_mirror < 0.5 * e_mirror,
            "barrier should suppress covariance: visgp {v_mirror} vs euclid {e_mirror}"
        );
        assert!(v_near > v_mirror);
    }

    #[test]
    fn prediction_surface_has_values_and_baseline_differs() {
        let out = prediction_demo_impl("fork", 120, 5, 0.1, 8, "mp", 24).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let means = v["visgp_mean"].as_array().unwrap();
        let euclid = v["euclid_mean"].as_array().unwrap();
        let inside: Vec<usize> = (0..means.len())
            .filter(|&i| means[i].as_f64().is_some())
            .collect();
        assert!(inside.len() > 50, "a good share of cells lie inside");
        // On a non-convex domain the two surfaces must genuinely differ.
        let max_gap = inside
            .iter()
            .filter_map(|&i| Some((means[i].as_f64()? - euclid[i].as_f64()?).abs()))
            .fold(0.0f64, f64::max);
        assert!(max_gap > 0.05, "baseline and visgp too similar: {max_gap}");
        assert!(v["params"]["sigma2"].as_f64().unwrap() > 0.0);
    }
}
