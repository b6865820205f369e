//! Gaussian-process kriging on non-convex polygonal domains.
//!
//! The covariance of a spatial process on an irregular domain (a bay, a lake,
//! a fork-shaped region) should respect the geometry: points separated by
//! land may be close "as the crow flies" but far "as the fish swims".
//! Plugging geodesic distances into a standard covariance family breaks
//! positive definiteness, while ignoring the geometry leaks information
//! across barriers.
//!
//! This crate builds valid covariances on such domains from a visibility
//! graph: two observation sites are adjacent when the straight segment
//! between them stays inside the domain. Dempster's covariance selection
//! then produces the unique positive definite matrix that
//!
//! * preserves the Euclidean covariance on every edge of the graph (and the
//!   variances on the diagonal), and
//! * has zero precision (conditional independence) across non-edges.
//!
//! On top of that construction the crate provides chordal-decomposition
//! likelihoods, maximum-likelihood fitting (quasi-Newton and a clique-wise
//! RMSProp stochastic gradient ascent), clique-constrained kriging
//! prediction, and a simulation harness for synthetic non-convex domains.
//!
//! Module map:
//!
//! * [`geometry`] — polygons with holes, membership, segment visibility,
//!   geodesic distance.
//! * [`covariance`] — exponential / Matérn families, dense covariance
//!   assembly, modified Bessel functions.
//! * [`visgraph`] — visibility-graph construction, chordal completion,
//!   perfect clique orderings, completion diagnostics, adjacency cache.
//! * [`covsel`] — covariance selection by iterative proportional scaling and
//!   by the chordal closed form.
//! * [`estimate`] — chordal log-likelihood, analytic gradients, full and
//!   stochastic-gradient fitting, within-clique nearest-neighbor
//!   approximation.
//! * [`predict`] — neighbor-set strategies and kriging with intervals.
//! * [`simulate`] — synthetic domains, data generators, replication harness.
//! * [`io`] — GeoJSON/CSV ingestion, adjacency cache format, result export.

pub mod covariance;
pub mod covsel;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod io;
pub mod predict;
pub mod simulate;
pub mod visgraph;

pub use covariance::{CovFamily, CovarianceModel};
pub use covsel::CovSelResult;
pub use error::{Error, Result};
pub use estimate::{FitResult, ParamVector, RegressionData, SgdConfig};
pub use geometry::{Point2, PolygonDomain};
pub use predict::{NeighborSet, Prediction, Strategy};
pub use visgraph::{ChordalDecomposition, VisibilityGraph};
