//! Numerical constants shared by the controller, the sensor model and tests.

/// Small standard deviation (metres or radians) used as a covariance floor so
/// that degenerate directions stay invertible.
pub const COV_FLOOR_SIGMA: f64 = 1e-4;

/// Relative asymmetry allowed before a matrix is rejected as non-symmetric.
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// Required round-trip accuracy of the normal quantile.
pub const QUANTILE_ROUNDTRIP: f64 = 1e-9;

/// Agreement required between analytic and assembled forms of the same
/// quantity (gradient consistency, blockwise products).
pub const ANALYTIC_MATCH: f64 = 1e-10;
