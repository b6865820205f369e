//! Isotropic covariance families and dense covariance-matrix assembly.
//!
//! The exponential family is `C(d) = sigma2 * exp(-phi d)`; the Matérn family
//! is `C(d) = sigma2 * 2^{1-nu}/Gamma(nu) * (phi d)^nu K_nu(phi d)` with
//! `C(0) = sigma2`. The nugget `tau2` is additive white noise applied to the
//! diagonal only when a matrix is assembled with `include_nugget`.

mod bessel;

pub use bessel::bessel_k;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovFamily {
    Exponential,
    Matern,
}

/// An isotropic covariance model: family, process variance `sigma2`, inverse
/// range `phi`, Matérn smoothness `nu` (ignored for the exponential family),
/// and nugget variance `tau2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub family: CovFamily,
    pub sigma2: f64,
    pub phi: f64,
    pub nu: f64,
    pub tau2: f64,
}

impl CovarianceModel {
    pub fn exponential(sigma2: f64, phi: f64, tau2: f64) -> Result<Self> {
        let m = Self {
            family: CovFamily::Exponential,
            sigma2,
            phi,
            nu: 0.5,
            tau2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn matern(sigma2: f64, phi: f64, nu: f64, tau2: f64) -> Result<Self> {
        let m = Self {
            family: CovFamily::Matern,
            sigma2,
            phi,
            nu,
            tau2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma2 > 0.0
            && self.phi > 0.0
            && self.tau2 >= 0.0
            && self.nu > 0.0
            && self.sigma2.is_finite()
            && self.phi.is_finite()
            && self.nu.is_finite()
            && self.tau2.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParam(format!(
                "need sigma2 > 0, phi > 0, nu > 0, tau2 >= 0; got sigma2={}, phi={}, nu={}, tau2={}",
                self.sigma2, self.phi, self.nu, self.tau2
            )))
        }
    }

    /// Covariance at distance `d`, without the nugget.
    pub fn cov_value(&self, d: f64) -> f64 {
        debug_assert!(d >= 0.0);
        self.sigma2 * self.correlation(d)
    }

    /// Correlation at distance `d` (`cov_value / sigma2`).
    pub fn correlation(&self, d: f64) -> f64 {
        if d == 0.0 {
            return 1.0;
        }
        let x = self.phi * d;
        match self.family {
            CovFamily::Exponential => (-x).exp(),
            CovFamily::Matern => matern_correlation(self.nu, x),
        }
    }

    /// Partial derivative of the (nugget-free) covariance with respect to
    /// `phi` at distance `d`.
    pub fn cov_deriv_phi(&self, d: f64) -> f64 {
        if d == 0.0 {
            return 0.0;
        }
        let x = self.phi * d;
        match self.family {
            CovFamily::Exponential => -self.sigma2 * d * (-x).exp(),
            CovFamily::Matern => {
                // d/dx [x^nu K_nu(x)] = -x^nu K_{nu-1}(x).
                let c = (1.0 - self.nu).exp2() / gamma(self.nu);
                -self.sigma2 * c * d * x.powf(self.nu) * bessel_k(self.nu - 1.0, x)
            }
        }
    }
}

fn matern_correlation(nu: f64, x: f64) -> f64 {
    // Half-integer orders have elementary closed forms; keep them for speed
    // and as a cross-check of the general path.
    if nu == 0.5 {
        return (-x).exp();
    }
    if nu == 1.5 {
        return (1.0 + x) * (-x).exp();
    }
    if nu == 2.5 {
        return (1.0 + x + x * x / 3.0) * (-x).exp();
    }
    if x > 600.0 {
        return 0.0; // exp(-x) underflows well before this
    }
    (1.0 - nu).exp2() / gamma(nu) * x.powf(nu) * bessel_k(nu, x)
}

/// Dense covariance matrix over `points`; `include_nugget` adds `tau2` to
/// the diagonal. Duplicate points are permitted — positive definiteness then
/// relies on a positive nugget.
pub fn cov_matrix(
    points: &[Point2],
    model: &CovarianceModel,
    include_nugget: bool,
) -> DMatrix<f64> {
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = model.sigma2 + if include_nugget { model.tau2 } else { 0.0 };
        for j in (i + 1)..n {
            let v = model.cov_value(points[i].dist(&points[j]));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Covariance matrix from a precomputed distance matrix (zero diagonal).
pub fn cov_matrix_from_dist(
    dist: &DMatrix<f64>,
    model: &CovarianceModel,
    include_nugget: bool,
) -> DMatrix<f64> {
    let n = dist.nrows();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = model.sigma2 + if include_nugget { model.tau2 } else { 0.0 };
        for j in (i + 1)..n {
            let v = model.cov_value(dist[(i, j)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Cross-covariance matrix `C(a_i, b_j)` (no nugget).
pub fn cross_cov(a: &[Point2], b: &[Point2], model: &CovarianceModel) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.len(), b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            m[(i, j)] = model.cov_value(a[i].dist(&b[j]));
        }
    }
    m
}

static JITTER_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of times a factorization needed the diagonal jitter so far in this
/// process.
pub fn jitter_event_count() -> u64 {
    JITTER_EVENTS.load(Ordering::Relaxed)
}

/// Cholesky factorization with a single jitter retry: if `m` fails to
/// factor, `1e-10 * sigma2` is added to the diagonal and the event is
/// counted. Returns the factorization and whether jitter was applied.
pub fn cholesky_with_jitter(m: &DMatrix<f64>, sigma2: f64) -> Result<(Cholesky<f64, Dyn>, bool)> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Ok((ch, false));
    }
    JITTER_EVENTS.fetch_add(1, Ordering::Relaxed);
    let mut jittered = m.clone();
    let eps = 1e-10 * sigma2;
    for i in 0..jittered.nrows() {
        jittered[(i, i)] += eps;
    }
    match Cholesky::new(jittered) {
        Some(ch) => Ok((ch, true)),
        None => Err(Error::NotPositiveDefinite(format!(
            "{}x{} covariance block failed factorization even with jitter",
            m.nrows(),
            m.ncols()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponential_values() {
        let m = CovarianceModel::exponential(1.0, 0.1, 0.0).unwrap();
        assert_eq!(m.cov_value(0.0), 1.0);
        assert!((m.cov_value(10.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn matern_half_equals_exponential() {
        let e = CovarianceModel::exponential(2.0, 1.0, 0.0).unwrap();
        let m = CovarianceModel::matern(2.0, 1.0, 0.5, 0.0).unwrap();
        assert!((e.cov_value(3.0) - m.cov_value(3.0)).abs() < 1e-10);
    }

    #[test]
    fn matern_general_path_matches_half_integer_closed_forms() {
        for &nu in &[0.5, 1.5, 2.5] {
            for &d in &[0.2, 1.0, 4.0, 9.0] {
                let closed = matern_correlation(nu, d);
                let general = (1.0 - nu).exp2() / gamma(nu) * d.powf(nu) * bessel_k(nu, d);
                assert!(
                    (closed - general).abs() < 1e-11,
                    "nu={nu} d={d}: {closed} vs {general}"
                );
            }
        }
    }

    #[test]
    fn variance_is_exact_at_zero_distance() {
        for model in [
            CovarianceModel::exponential(3.2, 0.7, 0.4).unwrap(),
            CovarianceModel::matern(3.2, 0.7, 1.0, 0.4).unwrap(),
        ] {
            assert_eq!(model.cov_value(0.0), 3.2);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(CovarianceModel::exponential(-1.0, 1.0, 0.0).is_err());
        assert!(CovarianceModel::exponential(1.0, 0.0, 0.0).is_err());
        assert!(CovarianceModel::matern(1.0, 1.0, -0.5, 0.0).is_err());
        assert!(CovarianceModel::exponential(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn monotone_non_increasing_in_distance() {
        for model in [
            CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap(),
            CovarianceModel::matern(1.0, 0.5, 1.0, 0.0).unwrap(),
            CovarianceModel::matern(2.0, 0.25, 2.3, 0.0).unwrap(),
        ] {
            let mut prev = f64::INFINITY;
            for i in 0..400 {
                let d = i as f64 * 0.05;
                let v = model.cov_value(d);
                assert!(v <= prev + 1e-12, "not monotone at d={d}");
                prev = v;
            }
        }
    }

    #[test]
    fn small_matrices_match_hand_values() {
        let model = CovarianceModel::exponential(1.5, 2.0, 0.3).unwrap();
        // Single point with nugget.
        let m = cov_matrix(&[Point2::new(0.0, 0.0)], &model, true);
        assert!((m[(0, 0)] - 1.8).abs() < 1e-15);
        // Coincident points, no nugget: rank-1.
        let p = Point2::new(1.0, 1.0);
        let m = cov_matrix(&[p, p], &model, false);
        for v in m.iter() {
            assert!((v - 1.5).abs() < 1e-15);
        }
        // Three collinear points, unit spacing, sigma2 = 1, phi = 1.
        let model = CovarianceModel::exponential(1.0, 1.0, 0.0).unwrap();
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        let m = cov_matrix(&pts, &model, false);
        assert!((m[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((m[(0, 2)] - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn random_configurations_factorize_with_nugget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &n in &[10usize, 60, 200, 500] {
            let pts: Vec<Point2> = (0..n)
                .map(|_| Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
                .collect();
            let model = CovarianceModel::matern(1.0, 0.5, 1.0, 0.1).unwrap();
            let m = cov_matrix(&pts, &model, true);
            assert!(Cholesky::new(m).is_some(), "n={n} failed");
        }
    }

    #[test]
    fn phi_derivative_matches_finite_differences() {
        for model in [
            CovarianceModel::exponential(1.3, 0.8, 0.0).unwrap(),
            CovarianceModel::matern(1.3, 0.8, 1.0, 0.0).unwrap(),
            CovarianceModel::matern(0.7, 1.6, 2.3, 0.0).unwrap(),
        ] {
            for &d in &[0.3, 1.0, 2.7] {
                let h = 1e-6;
                let mut up = model;
                up.phi += h;
                let mut dn = model;
                dn.phi -= h;
                let fd = (up.cov_value(d) - dn.cov_value(d)) / (2.0 * h);
                let an = model.cov_deriv_phi(d);
                assert!(
                    ((fd - an) / fd.abs().max(1e-10)).abs() < 1e-6,
                    "family {:?} nu={} d={d}: fd={fd}, an={an}",
                    model.family,
                    model.nu
                );
            }
        }
    }

    #[test]
    fn jitter_retry_counts_and_errors() {
        // Exactly singular: identical rows without nugget.
        let p = Point2::new(0.0, 0.0);
        let model = CovarianceModel::exponential(1.0, 1.0, 0.0).unwrap();
        let m = cov_matrix(&[p, p], &model, false);
        let before = jitter_event_count();
        let res = cholesky_with_jitter(&m, model.sigma2);
        assert!(jitter_event_count() > before);
        // The tiny jitter rescues the rank-1 matrix.
        let (_, jittered) = res.unwrap();
        assert!(jittered);
        // A matrix with a negative eigenvalue cannot be rescued.
        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 1)] = 2.0;
        bad[(1, 0)] = 2.0;
        assert!(matches!(
            cholesky_with_jitter(&bad, 1.0),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn json_round_trip_uses_spec_field_names() {
        let model = CovarianceModel::matern(1.0, 0.25, 1.0, 0.5).unwrap();
        let js = serde_json::to_string(&model).unwrap();
        assert!(js.contains("\"family\":\"matern\""));
        for key in ["sigma2", "phi", "nu", "tau2"] {
            assert!(js.contains(key), "missing {key} in {js}");
        }
        let back: CovarianceModel = serde_json::from_str(&js).unwrap();
        assert_eq!(back.phi, model.phi);
    }
}
