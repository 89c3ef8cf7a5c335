use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("truncation must be at least 1, got {0}")]
    InvalidTruncation(i64),
    #[error("region {0} is not inside the domain")]
    RegionOutsideDomain(String),
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("point {0:?} is outside the domain")]
    PointOutsideDomain(Vec<f64>),
    #[error("point {0:?} is outside the region")]
    PointOutsideRegion(Vec<f64>),
    #[error("mode {0} is not part of the basis")]
    UnknownMode(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("tolerance `{name}` must be positive, got {value}")]
    InvalidTolerance { name: &'static str, value: f64 },
    #[error("sensor outside domain: {0}")]
    SensorOutsideDomain(String),
    #[error("empty sensor zone: {0}")]
    EmptyZone(String),
    #[error("degenerate filament curve: {0}")]
    DegenerateCurve(String),
    #[error("invalid sensor weight: {0}")]
    InvalidWeight(String),
    #[error("empty time grid")]
    EmptyTimeGrid,
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("sensor list is empty")]
    EmptySensorList,
    #[error("no eigenvalue groups to test")]
    NoGroups,
    #[error("location {0} lies on the boundary or outside (0, 1)")]
    BoundaryLocation(String),
    #[error("corollary {corollary} does not apply: {reason}")]
    CorollaryMismatch {
        corollary: &'static str,
        reason: String,
    },
    #[error("complement of the region has zero measure")]
    ZeroMeasureComplement,
    #[error("measurement series is empty")]
    EmptyMeasurements,
    #[error("every design-matrix column is degenerate")]
    AllColumnsDegenerate,
    #[error("coefficient vector does not match the basis: {0}")]
    BasisMismatch(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
