//! Maximum-likelihood estimation for the visibility-graph data model.
//!
//! The log-likelihood decomposes over the clique/separator pairs of a
//! perfectly ordered chordal decomposition: clique terms are ordinary dense
//! Gaussian log-densities under the Euclidean covariance plus nugget, and
//! separator terms enter with a negative sign. That additivity powers both
//! the full quasi-Newton fit and the clique-wise stochastic gradient ascent
//! (RMSProp). Oversized blocks can fall back to a within-clique
//! nearest-neighbor (Vecchia-style) approximation of the block likelihood.
//!
//! Positivity of `sigma2`, `phi`, and `tau2` is maintained by optimizing
//! their logarithms.

use crate::covariance::{cholesky_with_jitter, cov_matrix_from_dist, CovFamily, CovarianceModel};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::visgraph::ChordalDecomposition;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Observations, covariates (first column all ones by convention), site
/// coordinates, and the clique decomposition they are modeled under.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub points: Vec<Point2>,
    pub decomp: ChordalDecomposition,
}

impl RegressionData {
    pub fn new(
        y: DVector<f64>,
        x: DMatrix<f64>,
        points: Vec<Point2>,
        decomp: ChordalDecomposition,
    ) -> Result<Self> {
        let n = points.len();
        if y.len() != n || x.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} points, {} responses, {} covariate rows",
                n,
                y.len(),
                x.nrows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite response or covariate".into(),
            ));
        }
        if decomp.vertex_count() > n {
            return Err(Error::InvalidInput(
                "decomposition references more vertices than there are points".into(),
            ));
        }
        Ok(Self {
            y,
            x,
            points,
            decomp,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Covariance family with its fixed smoothness; `nu` is estimated by
/// configuration choice, never by the optimizer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub family: CovFamily,
    pub nu: f64,
}

impl FamilyConfig {
    pub fn exponential() -> Self {
        Self {
            family: CovFamily::Exponential,
            nu: 0.5,
        }
    }

    pub fn matern(nu: f64) -> Self {
        Self {
            family: CovFamily::Matern,
            nu,
        }
    }
}

/// Regression coefficients plus the covariance parameters on log scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamVector {
    pub beta: DVector<f64>,
    pub log_sigma2: f64,
    pub log_phi: f64,
    pub log_tau2: f64,
}

impl ParamVector {
    pub fn from_natural(beta: DVector<f64>, sigma2: f64, phi: f64, tau2: f64) -> Result<Self> {
        if sigma2 <= 0.0 || phi <= 0.0 || tau2 <= 0.0 {
            return Err(Error::InvalidParam(
                "sigma2, phi, tau2 must be positive (tau2 may be tiny but not zero on log scale)"
                    .into(),
            ));
        }
        Ok(Self {
            beta,
            log_sigma2: sigma2.ln(),
            log_phi: phi.ln(),
            log_tau2: tau2.ln(),
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.log_sigma2.exp()
    }

    pub fn phi(&self) -> f64 {
        self.log_phi.exp()
    }

    pub fn tau2(&self) -> f64 {
        self.log_tau2.exp()
    }

    pub fn model(&self, fam: &FamilyConfig) -> CovarianceModel {
        CovarianceModel {
            family: fam.family,
            sigma2: self.sigma2(),
            phi: self.phi(),
            nu: fam.nu,
            tau2: self.tau2(),
        }
    }

    fn to_flat(&self) -> DVector<f64> {
        let p = self.beta.len();
        let mut v = DVector::zeros(p + 3);
        v.rows_mut(0, p).copy_from(&self.beta);
        v[p] = self.log_sigma2;
        v[p + 1] = self.log_phi;
        v[p + 2] = self.log_tau2;
        v
    }

    fn from_flat(v: &DVector<f64>, p: usize) -> Self {
        Self {
            beta: v.rows(0, p).into_owned(),
            log_sigma2: v[p],
            log_phi: v[p + 1],
            log_tau2: v[p + 2],
        }
    }
}

/// Controls the within-clique nearest-neighbor approximation: blocks larger
/// than `threshold` points use it, conditioning on up to `m` previously
/// ordered neighbors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NngpConfig {
    pub threshold: usize,
    pub m: usize,
}

impl Default for NngpConfig {
    fn default() -> Self {
        Self {
            threshold: 300,
            m: 15,
        }
    }
}

impl NngpConfig {
    /// Never approximate.
    pub fn exact() -> Self {
        Self {
            threshold: usize::MAX,
            m: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    FullMle,
    GraphSgd,
}

/// One optimizer trace entry: iteration (epoch for SGD), the component index
/// for stochastic steps, and the objective value or stochastic estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub component: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ParamVector,
    pub loglik: f64,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub method: FitMethod,
}

/// RMSProp settings for the graph stochastic gradient ascent. `epochs = 0`
/// picks the number of epochs so that epochs x cliques is roughly 5,000
/// component steps.
///
/// With a constant step size the iterates settle into a small limit cycle
/// around the optimum (each clique pulls toward its own local fit), so the
/// reported estimate is the average of the iterates over the trailing
/// `tail_average` fraction of epochs; the cycle's center sits at the
/// optimum. `tail_average = 0` reports the raw final iterate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SgdConfig {
    pub alpha: f64,
    pub beta_decay: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "default_tail_average")]
    pub tail_average: f64,
    /// Whether the stochastic steps also move the regression coefficients.
    /// With heterogeneous cliques the per-clique local means disagree, which
    /// biases the sign-normalized updates; holding `beta` at a pilot
    /// estimate and stepping only the covariance parameters is often the
    /// stabler choice.
    #[serde(default = "default_update_beta")]
    pub update_beta: bool,
}

fn default_tail_average() -> f64 {
    0.5
}

fn default_update_beta() -> bool {
    true
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta_decay: 0.9,
            epsilon: 1e-8,
            epochs: 0,
            seed: 0,
            tail_average: default_tail_average(),
            update_beta: default_update_beta(),
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0
            && self.beta_decay > 0.0
            && self.beta_decay < 1.0
            && self.epsilon > 0.0
            && (0.0..=1.0).contains(&self.tail_average)
        {
            Ok(())
        } else {
            Err(Error::InvalidParam(
                "need alpha > 0, 0 < beta_decay < 1, epsilon > 0, 0 <= tail_average <= 1".into(),
            ))
        }
    }
}

/// Options for the full quasi-Newton fit.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub nngp: NngpConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-6,
            nngp: NngpConfig::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Blocks

struct Block {
    idx: Vec<usize>,
    dist: DMatrix<f64>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    points: Vec<Point2>,
}

impl Block {
    fn new(data: &RegressionData, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut dist = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in (a + 1)..m {
                let d = data.points[idx[a]].dist(&data.points[idx[b]]);
                dist[(a, b)] = d;
                dist[(b, a)] = d;
            }
        }
        let mut x = DMatrix::zeros(m, data.p());
        let mut y = DVector::zeros(m);
        let mut points = Vec::with_capacity(m);
        for (a, &i) in idx.iter().enumerate() {
            x.row_mut(a).copy_from(&data.x.row(i));
            y[a] = data.y[i];
            points.push(data.points[i]);
        }
        Self {
            idx: idx.to_vec(),
            dist,
            x,
            y,
            points,
        }
    }

    fn len(&self) -> usize {
        self.idx.len()
    }
}

/// Clique/separator pairs with cached per-block distances and data slices.
struct BlockSet {
    pairs: Vec<(Block, Option<Block>)>,
    p: usize,
}

impl BlockSet {
    fn new(data: &RegressionData) -> Self {
        let pairs = data
            .decomp
            .cliques
            .iter()
            .zip(&data.decomp.separators)
            .map(|(k, s)| {
                let clique = Block::new(data, k);
                let sep = if s.is_empty() {
                    None
                } else {
                    Some(Block::new(data, s))
                };
                (clique, sep)
            })
            .collect();
        Self { pairs, p: data.p() }
    }

    fn dim(&self) -> usize {
        self.p + 3
    }
}

/// Exact Gaussian log-density of one block.
fn block_loglik_exact(block: &Block, model: &CovarianceModel, beta: &DVector<f64>) -> Result<f64> {
    let sigma = cov_matrix_from_dist(&block.dist, model, true);
    let (chol, _) = cholesky_with_jitter(&sigma, model.sigma2)?;
    let r = &block.y - &block.x * beta;
    let alpha = chol.solve(&r);
    let logdet: f64 = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
        * 2.0;
    Ok(-0.5 * (block.len() as f64 * LN_2PI + logdet + r.dot(&alpha)))
}

/// Exact value and gradient of one block over `[beta, log sigma2, log phi,
/// log tau2]`.
fn block_grad_exact(
    block: &Block,
    model: &CovarianceModel,
    beta: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    let m = block.len();
    let p = beta.len();
    let sigma = cov_matrix_from_dist(&block.dist, model, true);
    let (chol, _) = cholesky_with_jitter(&sigma, model.sigma2)?;
    let inv = chol.inverse();
    let r = &block.y - &block.x * beta;
    let u = &inv * &r;
    let logdet: f64 = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
        * 2.0;
    let value = -0.5 * (m as f64 * LN_2PI + logdet + r.dot(&u));

    let mut grad = DVector::zeros(p + 3);
    grad.rows_mut(0, p).copy_from(&(block.x.transpose() * &u));

    let tau2 = model.tau2;
    let tr_inv = inv.trace();
    let uu = u.dot(&u);
    let ur = u.dot(&r);

    // d Sigma / d log sigma2 = Sigma - tau2 I.
    grad[p] = 0.5 * ((ur - tau2 * uu) - (m as f64 - tau2 * tr_inv));

    // d Sigma / d log phi, assembled entrywise from the distance cache.
    let phi = model.phi;
    let mut quad = 0.0;
    let mut tr = 0.0;
    for a in 0..m {
        for b in (a + 1)..m {
            let dcov = phi * model.cov_deriv_phi(block.dist[(a, b)]);
            quad += 2.0 * dcov * u[a] * u[b];
            tr += 2.0 * dcov * inv[(a, b)];
        }
    }
    grad[p + 1] = 0.5 * (quad - tr);

    // d Sigma / d log tau2 = tau2 I.
    grad[p + 2] = 0.5 * (tau2 * uu - tau2 * tr_inv);

    Ok((value, grad))
}

/// Vecchia ordering within a block: ascending first coordinate, ties by the
/// second coordinate and then position.
fn vecchia_order(points: &[Point2]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .partial_cmp(&points[b].x)
            .unwrap()
            .then(points[a].y.partial_cmp(&points[b].y).unwrap())
            .then(a.cmp(&b))
    });
    order
}

/// Up to `m` nearest previously ordered neighbors of `target` (ties broken
/// by order position).
fn nearest_previous(points: &[Point2], order: &[usize], pos: usize, m: usize) -> Vec<usize> {
    let target = points[order[pos]];
    let mut prev: Vec<(f64, usize)> = order[..pos]
        .iter()
        .map(|&i| (target.dist(&points[i]), i))
        .collect();
    prev.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    prev.truncate(m);
    prev.into_iter().map(|(_, i)| i).collect()
}

fn nngp_factors(
    block: &Block,
    model: &CovarianceModel,
    beta: &DVector<f64>,
    m: usize,
    mut per_factor: impl FnMut(usize, &[usize], f64, f64, &DVector<f64>, &DVector<f64>) -> Result<()>,
) -> Result<f64> {
    // per_factor(i, neighbor set, e, v, alpha, w) is invoked with the
    // conditional residual e, conditional variance v, kriging weights
    // alpha = A^-1 a, and w = A^-1 r_S for callers that need derivatives.
    let order = vecchia_order(&block.points);
    let r = &block.y - &block.x * beta;
    let marginal = model.sigma2 + model.tau2;
    let mut ll = 0.0;
    for pos in 0..order.len() {
        let i = order[pos];
        let nb = nearest_previous(&block.points, &order, pos, m);
        if nb.is_empty() {
            let (e, v) = (r[i], marginal);
            ll += -0.5 * (LN_2PI + v.ln() + e * e / v);
            per_factor(i, &nb, e, v, &DVector::zeros(0), &DVector::zeros(0))?;
            continue;
        }
        let k = nb.len();
        let mut a_mat = DMatrix::zeros(k, k);
        let mut a_vec = DVector::zeros(k);
        for (r1, &n1) in nb.iter().enumerate() {
            a_mat[(r1, r1)] = marginal;
            for (r2, &n2) in nb.iter().enumerate().skip(r1 + 1) {
                let c = model.cov_value(block.dist[(n1, n2)]);
                a_mat[(r1, r2)] = c;
                a_mat[(r2, r1)] = c;
            }
            a_vec[r1] = model.cov_value(block.dist[(n1, i)]);
        }
        let (chol, _) = cholesky_with_jitter(&a_mat, model.sigma2)?;
        let alpha = chol.solve(&a_vec);
        let r_s = DVector::from_iterator(k, nb.iter().map(|&n| r[n]));
        let w = chol.solve(&r_s);
        let v = (marginal - a_vec.dot(&alpha)).max(1e-12 * marginal);
        let e = r[i] - a_vec.dot(&w);
        ll += -0.5 * (LN_2PI + v.ln() + e * e / v);
        per_factor(i, &nb, e, v, &alpha, &w)?;
    }
    Ok(ll)
}

/// Within-clique nearest-neighbor approximation of a block log-likelihood.
/// Exact whenever `m >= block size - 1`.
pub fn clique_loglik_nngp(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    points: &[Point2],
    beta: &DVector<f64>,
    model: &CovarianceModel,
    m: usize,
) -> Result<f64> {
    let n = points.len();
    let mut dist = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let d = points[a].dist(&points[b]);
            dist[(a, b)] = d;
            dist[(b, a)] = d;
        }
    }
    let block = Block {
        idx: (0..n).collect(),
        dist,
        x: x.clone(),
        y: y.clone(),
        points: points.to_vec(),
    };
    nngp_factors(&block, model, beta, m, |_, _, _, _, _, _| Ok(()))
}

/// NNGP value and gradient for one block.
fn block_grad_nngp(
    block: &Block,
    model: &CovarianceModel,
    beta: &DVector<f64>,
    m: usize,
) -> Result<(f64, DVector<f64>)> {
    let p = beta.len();
    let mut grad = DVector::zeros(p + 3);
    let sigma2 = model.sigma2;
    let tau2 = model.tau2;
    let phi = model.phi;
    let value = nngp_factors(block, model, beta, m, |i, nb, e, v, alpha, w| {
        if nb.is_empty() {
            // Marginal factor: v = sigma2 + tau2, e = r_i.
            let xrow = block.x.row(i).transpose();
            grad.rows_mut(0, p).axpy(e / v, &xrow, 1.0);
            for (slot, dv) in [(p, sigma2), (p + 2, tau2)] {
                grad[slot] += -0.5 * dv / v + e * e * dv / (2.0 * v * v);
            }
            return Ok(());
        }
        let k = nb.len();
        // Rebuild the small blocks needed for derivatives.
        let mut a_vec = DVector::zeros(k);
        for (r1, &n1) in nb.iter().enumerate() {
            a_vec[r1] = model.cov_value(block.dist[(n1, i)]);
        }
        let r_s_x: Vec<_> = nb.iter().map(|&n| block.x.row(n).transpose()).collect();

        // Per-theta derivative pieces: (dA, da, dSigma_ii).
        for (slot, kind) in [(p, 0usize), (p + 1, 1), (p + 2, 2)] {
            let mut da_mat = DMatrix::zeros(k, k);
            let mut da_vec = DVector::zeros(k);
            let dsii;
            match kind {
                0 => {
                    // log sigma2: dA = A - tau2 I, da = a, dSii = sigma2.
                    for (r1, &n1) in nb.iter().enumerate() {
                        da_mat[(r1, r1)] = sigma2;
                        for (r2, &n2) in nb.iter().enumerate().skip(r1 + 1) {
                            let c = model.cov_value(block.dist[(n1, n2)]);
                            da_mat[(r1, r2)] = c;
                            da_mat[(r2, r1)] = c;
                        }
                        da_vec[r1] = a_vec[r1];
                    }
                    dsii = sigma2;
                }
                1 => {
                    for (r1, &n1) in nb.iter().enumerate() {
                        for (r2, &n2) in nb.iter().enumerate().skip(r1 + 1) {
                            let c = phi * model.cov_deriv_phi(block.dist[(n1, n2)]);
                            da_mat[(r1, r2)] = c;
                            da_mat[(r2, r1)] = c;
                        }
                        da_vec[r1] = phi * model.cov_deriv_phi(block.dist[(n1, i)]);
                    }
                    dsii = 0.0;
                }
                _ => {
                    for r1 in 0..k {
                        da_mat[(r1, r1)] = tau2;
                    }
                    dsii = tau2;
                }
            }
            let da_w = &da_mat * w;
            let d_pred = da_vec.dot(w) - alpha.dot(&da_w);
            let da_alpha = &da_mat * alpha;
            let dv = dsii - 2.0 * da_vec.dot(alpha) + alpha.dot(&da_alpha);
            let de = -d_pred;
            grad[slot] += -0.5 * dv / v + e * e * dv / (2.0 * v * v) - e * de / v;
        }

        // Beta gradient: de/dbeta = -x_i + X_S' alpha.
        let mut de_db = -block.x.row(i).transpose();
        for (r1, xr) in r_s_x.iter().enumerate() {
            de_db.axpy(alpha[r1], xr, 1.0);
        }
        grad.rows_mut(0, p).axpy(-e / v, &de_db, 1.0);
        Ok(())
    })?;
    Ok((value, grad))
}

fn block_loglik(
    block: &Block,
    model: &CovarianceModel,
    beta: &DVector<f64>,
    nngp: &NngpConfig,
) -> Result<f64> {
    if block.len() > nngp.threshold {
        nngp_factors(block, model, beta, nngp.m, |_, _, _, _, _, _| Ok(()))
    } else {
        block_loglik_exact(block, model, beta)
    }
}

fn block_grad(
    block: &Block,
    model: &CovarianceModel,
    beta: &DVector<f64>,
    nngp: &NngpConfig,
) -> Result<(f64, DVector<f64>)> {
    if block.len() > nngp.threshold {
        block_grad_nngp(block, model, beta, nngp.m)
    } else {
        block_grad_exact(block, model, beta)
    }
}

fn pair_loglik(
    pair: &(Block, Option<Block>),
    model: &CovarianceModel,
    beta: &DVector<f64>,
    nngp: &NngpConfig,
    index: usize,
) -> Result<f64> {
    let k = block_loglik(&pair.0, model, beta, nngp)
        .map_err(|_| Error::NumericalFailure { clique: index })?;
    let s = match &pair.1 {
        Some(sep) => block_loglik(sep, model, beta, nngp)
            .map_err(|_| Error::NumericalFailure { clique: index })?,
        None => 0.0,
    };
    Ok(k - s)
}

fn pair_grad(
    pair: &(Block, Option<Block>),
    model: &CovarianceModel,
    beta: &DVector<f64>,
    nngp: &NngpConfig,
    index: usize,
) -> Result<(f64, DVector<f64>)> {
    let (vk, gk) = block_grad(&pair.0, model, beta, nngp)
        .map_err(|_| Error::NumericalFailure { clique: index })?;
    match &pair.1 {
        Some(sep) => {
            let (vs, gs) = block_grad(sep, model, beta, nngp)
                .map_err(|_| Error::NumericalFailure { clique: index })?;
            Ok((vk - vs, gk - gs))
        }
        None => Ok((vk, gk)),
    }
}

// Both reductions below parallelize over the clique/separator pairs and sum
// in pair order, so results are deterministic.

fn loglik_from_blocks(
    blocks: &BlockSet,
    params: &ParamVector,
    fam: &FamilyConfig,
    nngp: &NngpConfig,
) -> Result<f64> {
    let model = params.model(fam);
    let per_pair: Result<Vec<f64>>;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        per_pair = blocks
            .pairs
            .par_iter()
            .enumerate()
            .map(|(i, pair)| pair_loglik(pair, &model, &params.beta, nngp, i))
            .collect();
    }
    #[cfg(not(feature = "parallel"))]
    {
        per_pair = blocks
            .pairs
            .iter()
            .enumerate()
            .map(|(i, pair)| pair_loglik(pair, &model, &params.beta, nngp, i))
            .collect();
    }
    Ok(per_pair?.iter().sum())
}

fn grad_from_blocks(
    blocks: &BlockSet,
    params: &ParamVector,
    fam: &FamilyConfig,
    nngp: &NngpConfig,
) -> Result<(f64, DVector<f64>)> {
    let model = params.model(fam);
    let per_pair: Result<Vec<(f64, DVector<f64>)>>;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        per_pair = blocks
            .pairs
            .par_iter()
            .enumerate()
            .map(|(i, pair)| pair_grad(pair, &model, &params.beta, nngp, i))
            .collect();
    }
    #[cfg(not(feature = "parallel"))]
    {
        per_pair = blocks
            .pairs
            .iter()
            .enumerate()
            .map(|(i, pair)| pair_grad(pair, &model, &params.beta, nngp, i))
            .collect();
    }
    let mut total = 0.0;
    let mut grad = DVector::zeros(blocks.dim());
    for (v, g) in per_pair? {
        total += v;
        grad += g;
    }
    Ok((total, grad))
}

/// Chordal log-likelihood: sum of clique Gaussian log-densities minus the
/// separator log-densities. Empty separators contribute zero.
pub fn chordal_loglik(
    data: &RegressionData,
    params: &ParamVector,
    fam: &FamilyConfig,
    nngp: &NngpConfig,
) -> Result<f64> {
    loglik_from_blocks(&BlockSet::new(data), params, fam, nngp)
}

/// Analytic gradient of [`chordal_loglik`] over `(beta, log sigma2, log phi,
/// log tau2)`, additive over the clique/separator pairs.
pub fn chordal_loglik_grad(
    data: &RegressionData,
    params: &ParamVector,
    fam: &FamilyConfig,
    nngp: &NngpConfig,
) -> Result<DVector<f64>> {
    grad_from_blocks(&BlockSet::new(data), params, fam, nngp).map(|(_, g)| g)
}

/// Method-of-moments starting point: ordinary least squares for `beta`,
/// residual variance split evenly between `sigma2` and `tau2`, and
/// `phi = 3 / diameter` of the point cloud.
pub fn default_init(data: &RegressionData) -> Result<ParamVector> {
    let xtx = data.x.transpose() * &data.x;
    let xty = data.x.transpose() * &data.y;
    let beta = xtx
        .lu()
        .solve(&xty)
        .ok_or_else(|| Error::InvalidInput("singular design matrix in OLS init".into()))?;
    let r = &data.y - &data.x * &beta;
    let resvar = (r.dot(&r) / (data.n().max(2) as f64 - 1.0)).max(1e-8);
    let mut diam: f64 = 0.0;
    for i in 0..data.n() {
        for j in (i + 1)..data.n() {
            diam = diam.max(data.points[i].dist(&data.points[j]));
        }
    }
    let phi = 3.0 / diam.max(1e-8);
    ParamVector::from_natural(beta, resvar / 2.0, phi, resvar / 2.0)
}

/// Quasi-Newton (BFGS) ascent of the chordal log-likelihood. Deterministic
/// given the starting point; stops when the gradient norm drops below
/// `opts.grad_tol` or after `opts.max_iter` iterations, returning the best
/// iterate either way with `converged` set accordingly.
pub fn fit_full(
    data: &RegressionData,
    init: &ParamVector,
    fam: &FamilyConfig,
    opts: &FitOptions,
) -> Result<FitResult> {
    let blocks = BlockSet::new(data);
    let p = data.p();
    if init.beta.len() != p {
        return Err(Error::InvalidInput(
            "init beta length != covariate count".into(),
        ));
    }
    let dim = blocks.dim();

    let eval_value = |x: &DVector<f64>| -> Option<f64> {
        let params = ParamVector::from_flat(x, p);
        loglik_from_blocks(&blocks, &params, fam, &opts.nngp).ok()
    };
    let eval_grad = |x: &DVector<f64>| -> Option<(f64, DVector<f64>)> {
        let params = ParamVector::from_flat(x, p);
        grad_from_blocks(&blocks, &params, fam, &opts.nngp).ok()
    };

    // Internally this is textbook BFGS minimization of the negative
    // log-likelihood: F = -loglik, G = -gradient.
    let mut x = init.to_flat();
    let (f0, g0) = eval_grad(&x).ok_or(Error::NumericalFailure { clique: 0 })?;
    let mut f_big = -f0;
    let mut g_big = -g0;
    let mut h = DMatrix::<f64>::identity(dim, dim);
    let mut best_x = x.clone();
    let mut best_f = f_big;
    let mut trace = vec![TraceRow {
        iteration: 0,
        component: None,
        value: -f_big,
    }];
    let mut converged = false;

    // Backtracking Armijo line search on values only; the gradient is
    // computed once at the accepted point.
    let line_search = |x: &DVector<f64>,
                       f_cur: f64,
                       dir: &DVector<f64>,
                       slope: f64|
     -> Option<(DVector<f64>, f64)> {
        let mut step = 1.0;
        for _ in 0..60 {
            let cand = x + step * dir;
            if let Some(fp) = eval_value(&cand) {
                let fc = -fp;
                if fc <= f_cur + 1e-4 * step * slope {
                    return Some((cand, fc));
                }
            }
            step *= 0.5;
        }
        None
    };

    for it in 1..=opts.max_iter {
        if g_big.norm() < opts.grad_tol {
            converged = true;
            break;
        }
        let mut dir = -(&h * &g_big);
        let mut slope = g_big.dot(&dir);
        if slope >= 0.0 {
            h = DMatrix::identity(dim, dim);
            dir = -g_big.clone();
            slope = g_big.dot(&dir);
        }
        let mut accepted = line_search(&x, f_big, &dir, slope);
        if accepted.is_none() && h != DMatrix::identity(dim, dim) {
            // Retry once along the raw gradient before giving up.
            h = DMatrix::identity(dim, dim);
            dir = -g_big.clone();
            slope = g_big.dot(&dir);
            accepted = line_search(&x, f_big, &dir, slope);
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let Some((_, g_pos)) = eval_grad(&x_new) else {
            break;
        };
        let g_new = -g_pos;

        let s = &x_new - &x;
        let yv = &g_new - &g_big;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            // H <- (I - rho s y') H (I - rho y s') + rho s s'.
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            h -= rho * (&s * hy.transpose() + &hy * s.transpose());
            h += (rho * rho * yhy + rho) * (&s * s.transpose());
        }

        x = x_new;
        f_big = f_new;
        g_big = g_new;
        if f_big < best_f {
            best_f = f_big;
            best_x = x.clone();
        }
        trace.push(TraceRow {
            iteration: it,
            component: None,
            value: -f_big,
        });
    }
    if g_big.norm() < opts.grad_tol {
        converged = true;
    }

    Ok(FitResult {
        params: ParamVector::from_flat(&best_x, p),
        loglik: -best_f,
        trace,
        converged,
        method: FitMethod::FullMle,
    })
}

/// Graph stochastic gradient ascent with RMSProp. Per epoch the clique
/// order is reshuffled (seeded); each step takes the gradient of one
/// clique-minus-separator component `g`, accumulates
/// `v <- beta_decay v + (1 - beta_decay) g*g`, and ascends
/// `theta <- theta + alpha g / sqrt(v + epsilon)`. Bit-identical across
/// runs for a fixed seed.
pub fn fit_sgd(
    data: &RegressionData,
    init: &ParamVector,
    fam: &FamilyConfig,
    cfg: &SgdConfig,
    nngp: &NngpConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let blocks = BlockSet::new(data);
    let c = blocks.pairs.len();
    if c == 0 {
        return Err(Error::InvalidInput("decomposition has no cliques".into()));
    }
    let epochs = if cfg.epochs == 0 {
        5000usize.div_ceil(c)
    } else {
        cfg.epochs
    };
    let p = data.p();
    let dim = blocks.dim();

    let mut theta = init.to_flat();
    let mut v = DVector::<f64>::zeros(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(epochs * c);

    let tail_epochs = ((epochs as f64 * cfg.tail_average).ceil() as usize).min(epochs);
    let tail_start = epochs - tail_epochs + 1;
    let mut tail_sum = DVector::<f64>::zeros(dim);
    let mut tail_count = 0usize;

    let mut order: Vec<usize> = (0..c).collect();
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        for &ci in &order {
            let params = ParamVector::from_flat(&theta, p);
            let model = params.model(fam);
            let (value, g) = pair_grad(&blocks.pairs[ci], &model, &params.beta, nngp, ci)?;
            let first = if cfg.update_beta { 0 } else { p };
            for d in first..dim {
                v[d] = cfg.beta_decay * v[d] + (1.0 - cfg.beta_decay) * g[d] * g[d];
                theta[d] += cfg.alpha * g[d] / (v[d] + cfg.epsilon).sqrt();
            }
            trace.push(TraceRow {
                iteration: epoch,
                component: Some(ci),
                value,
            });
            if cfg.tail_average > 0.0 && epoch >= tail_start {
                tail_sum += &theta;
                tail_count += 1;
            }
        }
    }

    if tail_count > 0 {
        theta = tail_sum / tail_count as f64;
    }
    let params = ParamVector::from_flat(&theta, p);
    let loglik = loglik_from_blocks(&blocks, &params, fam, nngp)?;
    Ok(FitResult {
        params,
        loglik,
        trace,
        converged: loglik.is_finite(),
        method: FitMethod::GraphSgd,
    })
}
