//! File formats: GeoJSON / CSV domain ingestion, observation CSV, the
//! binary adjacency cache, matrix export, and result serialization.

use crate::error::{Error, Result};
use crate::estimate::{FitResult, TraceRow};
use crate::geometry::{Point2, PolygonDomain};
use crate::predict::Prediction;
use crate::visgraph::{BitMatrix, ChordalDecomposition};
use nalgebra::{DMatrix, DVector};
use serde_json::Value;
use std::io::{Read, Write};
use std::path::Path;

/// FNV-1a 64-bit hash, used to key the adjacency cache.
pub fn fnv1a64(chunks: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for chunk in chunks {
        for &b in *chunk {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Content hash of (points, domain file bytes, threshold): any change to
/// one of them invalidates the cache.
pub fn adjacency_content_hash(points: &[Point2], domain_bytes: &[u8], d_max: Option<f64>) -> u64 {
    let mut point_bytes = Vec::with_capacity(points.len() * 16);
    for p in points {
        point_bytes.extend_from_slice(&p.x.to_le_bytes());
        point_bytes.extend_from_slice(&p.y.to_le_bytes());
    }
    let dm = d_max.unwrap_or(f64::NAN).to_le_bytes();
    fnv1a64(&[&point_bytes, domain_bytes, &dm])
}

// ---------------------------------------------------------------------------
// Domain ingestion

/// Parses a GeoJSON Polygon (optionally wrapped in a Feature or a
/// single-feature FeatureCollection); interior rings become holes.
pub fn domain_from_geojson(text: &str) -> Result<PolygonDomain> {
    let v: Value = serde_json::from_str(text)?;
    let geometry = match v.get("type").and_then(Value::as_str) {
        Some("Polygon") => &v,
        Some("Feature") => v
            .get("geometry")
            .ok_or_else(|| Error::InvalidInput("feature without geometry".into()))?,
        Some("FeatureCollection") => v
            .get("features")
            .and_then(Value::as_array)
            .and_then(|f| f.first())
            .and_then(|f| f.get("geometry"))
            .ok_or_else(|| Error::InvalidInput("empty feature collection".into()))?,
        other => {
            return Err(Error::InvalidInput(format!(
                "unsupported GeoJSON type {other:?} (expected Polygon)"
            )))
        }
    };
    if geometry.get("type").and_then(Value::as_str) != Some("Polygon") {
        return Err(Error::InvalidInput("geometry is not a Polygon".into()));
    }
    let rings = geometry
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidInput("polygon without coordinates".into()))?;
    let mut parsed: Vec<Vec<Point2>> = Vec::new();
    for ring in rings {
        let coords = ring
            .as_array()
            .ok_or_else(|| Error::InvalidInput("ring is not an array".into()))?;
        let mut pts = Vec::with_capacity(coords.len());
        for c in coords {
            let pair = c
                .as_array()
                .filter(|a| a.len() >= 2)
                .ok_or_else(|| Error::InvalidInput("coordinate is not [x, y]".into()))?;
            let x = pair[0]
                .as_f64()
                .ok_or_else(|| Error::InvalidInput("non-numeric coordinate".into()))?;
            let y = pair[1]
                .as_f64()
                .ok_or_else(|| Error::InvalidInput("non-numeric coordinate".into()))?;
            pts.push(Point2::new(x, y));
        }
        parsed.push(pts);
    }
    if parsed.is_empty() {
        return Err(Error::InvalidInput("polygon with no rings".into()));
    }
    let outer = parsed.remove(0);
    PolygonDomain::new(outer, parsed)
}

/// Serializes a domain back to a GeoJSON Polygon.
pub fn domain_to_geojson(dom: &PolygonDomain) -> String {
    let ring_to_json = |ring: &[Point2]| -> Value {
        let mut coords: Vec<Value> = ring.iter().map(|p| serde_json::json!([p.x, p.y])).collect();
        coords.push(serde_json::json!([ring[0].x, ring[0].y]));
        Value::Array(coords)
    };
    let mut rings = vec![ring_to_json(dom.outer())];
    rings.extend(dom.holes().iter().map(|h| ring_to_json(h)));
    serde_json::json!({ "type": "Polygon", "coordinates": rings }).to_string()
}

/// Parses a plain CSV vertex list `ring_id,x,y` (ring 0 = outer, others =
/// holes). A non-numeric first line is treated as a header.
pub fn domain_from_csv(text: &str) -> Result<PolygonDomain> {
    let mut rings: Vec<(usize, Vec<Point2>)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "line {}: expected ring_id,x,y",
                ln + 1
            )));
        }
        let parsed: std::result::Result<(usize, f64, f64), _> = (|| {
            Ok::<_, std::num::ParseFloatError>((
                fields[0].parse::<f64>()? as usize,
                fields[1].parse::<f64>()?,
                fields[2].parse::<f64>()?,
            ))
        })();
        match parsed {
            Ok((rid, x, y)) => match rings.iter_mut().find(|(id, _)| *id == rid) {
                Some((_, ring)) => ring.push(Point2::new(x, y)),
                None => rings.push((rid, vec![Point2::new(x, y)])),
            },
            Err(_) if ln == 0 => continue, // header
            Err(e) => {
                return Err(Error::InvalidInput(format!("line {}: {e}", ln + 1)));
            }
        }
    }
    rings.sort_by_key(|(id, _)| *id);
    let mut iter = rings.into_iter();
    let outer = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("no vertices in domain CSV".into()))?
        .1;
    PolygonDomain::new(outer, iter.map(|(_, r)| r).collect())
}

/// Loads a domain from a path, dispatching on the extension (.geojson/.json
/// vs anything else as CSV). Also returns the raw bytes for cache hashing.
pub fn load_domain(path: &Path) -> Result<(PolygonDomain, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let dom = if ext.eq_ignore_ascii_case("geojson") || ext.eq_ignore_ascii_case("json") {
        domain_from_geojson(&text)?
    } else {
        domain_from_csv(&text)?
    };
    Ok((dom, bytes))
}

// ---------------------------------------------------------------------------
// Observation CSV

/// Observations parsed from `x,y,value[,covariate_*]`. The design matrix
/// carries an intercept column first, then any covariates.
pub struct DataSet {
    pub points: Vec<Point2>,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

pub fn data_from_csv(text: &str) -> Result<DataSet> {
    let mut rows: Vec<(f64, f64, f64, Vec<f64>)> = Vec::new();
    let mut n_cov: Option<usize> = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "line {}: expected x,y,value[,covariates]",
                ln + 1
            )));
        }
        let nums: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match nums {
            Ok(nums) => {
                match n_cov {
                    None => n_cov = Some(nums.len() - 3),
                    Some(c) if c != nums.len() - 3 => {
                        return Err(Error::InvalidInput(format!(
                            "line {}: inconsistent covariate count",
                            ln + 1
                        )))
                    }
                    _ => {}
                }
                rows.push((nums[0], nums[1], nums[2], nums[3..].to_vec()));
            }
            Err(_) if ln == 0 => continue, // header
            Err(e) => return Err(Error::InvalidInput(format!("line {}: {e}", ln + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no observations in data CSV".into()));
    }
    let n = rows.len();
    let p = 1 + n_cov.unwrap_or(0);
    let points: Vec<Point2> = rows.iter().map(|r| Point2::new(r.0, r.1)).collect();
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.2));
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { rows[i].3[j - 1] });
    Ok(DataSet { points, y, x })
}

/// Prediction sites `x,y[,covariate_*]`; covariates get the intercept
/// prepended just like the training design.
pub fn sites_from_csv(text: &str) -> Result<(Vec<Point2>, DMatrix<f64>)> {
    let mut rows: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    let mut n_cov: Option<usize> = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match nums {
            Ok(nums) if nums.len() >= 2 => {
                match n_cov {
                    None => n_cov = Some(nums.len() - 2),
                    Some(c) if c != nums.len() - 2 => {
                        return Err(Error::InvalidInput(format!(
                            "line {}: inconsistent covariate count",
                            ln + 1
                        )))
                    }
                    _ => {}
                }
                rows.push((nums[0], nums[1], nums[2..].to_vec()));
            }
            Ok(_) => {
                return Err(Error::InvalidInput(format!(
                    "line {}: expected x,y",
                    ln + 1
                )))
            }
            Err(_) if ln == 0 => continue,
            Err(e) => return Err(Error::InvalidInput(format!("line {}: {e}", ln + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no sites in CSV".into()));
    }
    let n = rows.len();
    let p = 1 + n_cov.unwrap_or(0);
    let points: Vec<Point2> = rows.iter().map(|r| Point2::new(r.0, r.1)).collect();
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { rows[i].2[j - 1] });
    Ok((points, x))
}

// ---------------------------------------------------------------------------
// Adjacency cache: b"VISG1" | n u64 | d_max f64 (NaN = none) | hash u64 |
// row-major packed bits.

const CACHE_MAGIC: &[u8; 5] = b"VISG1";

pub fn write_adjacency_cache(
    path: &Path,
    adj: &BitMatrix,
    d_max: Option<f64>,
    content_hash: u64,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(CACHE_MAGIC)?;
    f.write_all(&(adj.n() as u64).to_le_bytes())?;
    f.write_all(&d_max.unwrap_or(f64::NAN).to_le_bytes())?;
    f.write_all(&content_hash.to_le_bytes())?;
    f.write_all(&adj.to_row_major_bytes())?;
    Ok(())
}

/// Loads an adjacency cache; `None` when the file is missing, malformed, or
/// the content hash does not match (stale cache).
pub fn read_adjacency_cache(
    path: &Path,
    expected_hash: u64,
) -> Result<Option<(BitMatrix, Option<f64>)>> {
    let mut bytes = Vec::new();
    match std::fs::File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut bytes)?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    if bytes.len() < 5 + 8 + 8 + 8 || &bytes[..5] != CACHE_MAGIC {
        return Ok(None);
    }
    let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
    let d_max_raw = f64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let hash = u64::from_le_bytes(bytes[21..29].try_into().unwrap());
    if hash != expected_hash {
        return Ok(None);
    }
    let d_max = if d_max_raw.is_nan() {
        None
    } else {
        Some(d_max_raw)
    };
    Ok(BitMatrix::from_row_major_bytes(n, &bytes[29..]).map(|m| (m, d_max)))
}

// ---------------------------------------------------------------------------
// Matrix export

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:.17e}", m[(i, j)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Binary blob: n u64 | row-major f64. For square matrices used as test
/// fixtures.
pub fn matrix_to_blob(m: &DMatrix<f64>) -> Vec<u8> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(8 + n * n * 8);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn matrix_from_blob(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < 8 {
        return Err(Error::InvalidInput("matrix blob too short".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + n * n * 8 {
        return Err(Error::InvalidInput("matrix blob length mismatch".into()));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let off = 8 + (i * n + j) * 8;
            m[(i, j)] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Result serialization

/// FitResult as JSON with parameters on their natural scale; the trace goes
/// to a CSV sidecar via [`trace_to_csv`].
pub fn fit_result_to_json(fit: &FitResult, fam: &crate::estimate::FamilyConfig) -> Result<String> {
    let beta: Vec<f64> = fit.params.beta.iter().copied().collect();
    let v = serde_json::json!({
        "method": fit.method,
        "converged": fit.converged,
        "loglik": fit.loglik,
        "family": fam.family,
        "nu": fam.nu,
        "params": {
            "beta": beta,
            "sigma2": fit.params.sigma2(),
            "phi": fit.params.phi(),
            "tau2": fit.params.tau2(),
        },
        "iterations": fit.trace.last().map(|t| t.iteration).unwrap_or(0),
    });
    Ok(serde_json::to_string_pretty(&v)?)
}

pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iteration,component,value\n");
    for row in trace {
        match row.component {
            Some(c) => out.push_str(&format!("{},{},{:.10e}\n", row.iteration, c, row.value)),
            None => out.push_str(&format!("{},,{:.10e}\n", row.iteration, row.value)),
        }
    }
    out
}

pub fn decomposition_to_json(d: &ChordalDecomposition) -> Result<String> {
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "cliques": d.cliques,
        "separators": d.separators,
        "added_edges": d.added_edges,
    }))?)
}

/// Prediction rows as `x,y,mean,variance,lower,upper,n_neighbors,strategy
/// ,status`; sites without visible neighbors get a `no_neighbors` status row.
pub fn predictions_to_csv(rows: &[(Point2, Option<Prediction>)]) -> String {
    let mut out = String::from("x,y,mean,variance,lower,upper,n_neighbors,strategy,status\n");
    for (p, pred) in rows {
        match pred {
            Some(pr) => out.push_str(&format!(
                "{:.10},{:.10},{:.10e},{:.10e},{:.10e},{:.10e},{},{},ok\n",
                p.x, p.y, pr.mean, pr.variance, pr.lower, pr.upper, pr.neighbor_count, pr.strategy
            )),
            None => out.push_str(&format!("{:.10},{:.10},,,,,0,,no_neighbors\n", p.x, p.y)),
        }
    }
    out
}
