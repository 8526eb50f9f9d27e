use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants are grouped by the subsystem that raises them; the CLI maps them
/// onto process exit codes via [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {0:?} lies outside the domain")]
    PointOutside(Vec<f64>),
    #[error("point {0:?} lies inside the closed domain")]
    InsideDomain(Vec<f64>),
    #[error("point {0:?} lies on the domain boundary")]
    OnBoundary(Vec<f64>),
    #[error("domain is not strictly convex: radius of curvature {radius:e} at theta = {theta}")]
    NonConvex { theta: f64, radius: f64 },
    #[error("domain is not contained in the unit disk (max support value {0})")]
    NotInUnitBall(f64),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error(
        "point at distance {distance} from the centre lies outside the ball of radius {radius}"
    )]
    OutsideBall { distance: f64, radius: f64 },
    #[error("bad geometry: {0}")]
    BadGeometry(String),
    #[error("kernel evaluated at the origin")]
    OriginSingular,
    #[error("auxiliary function evaluated at or below its pole (x3 = {0})")]
    BelowPole(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {cells} cells")]
    NonConverged {
        value: f64,
        error: f64,
        cells: usize,
    },
    #[error("field grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("extension undefined on the cut outside the domain at {0:?}")]
    UndefinedOnCut([f64; 3]),
    #[error("insufficient probe range: {0}")]
    InsufficientRange(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for this error class: 2 domain/point, 3 I/O, 4 usage, 5 numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PointOutside(_)
            | Error::InsideDomain(_)
            | Error::OnBoundary(_)
            | Error::NonConvex { .. }
            | Error::NotInUnitBall(_)
            | Error::InvalidDomain(_)
            | Error::OutsideBall { .. }
            | Error::BadGeometry(_)
            | Error::OriginSingular
            | Error::BelowPole(_)
            | Error::UndefinedOnCut(_) => 2,
            Error::Parse(_) | Error::Io(_) => 3,
            Error::InvalidParameter(_) | Error::InsufficientRange(_) => 4,
            Error::NonConverged { .. } | Error::GridTooCoarse(_) => 5,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
