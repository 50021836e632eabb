use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid interval [{left}, {right})")]
    InvalidInterval { left: f64, right: f64 },
    #[error("invalid exponent p = {0}; need 1 < p < inf")]
    InvalidExponent(f64),
    #[error("quadrature did not reach tolerance: achieved error estimate {achieved:e}")]
    Quadrature { achieved: f64 },
    #[error("atom at {position} lies on the boundary of the interval")]
    AtomOnBoundary { position: f64 },
    #[error("point {x} is within {distance} of the support (required gap {gap})")]
    PointTooClose { x: f64, distance: f64, gap: f64 },
    #[error("signed measure passed where an unsigned one is required")]
    SignedMeasure,
    #[error("measure is not carried by the linearization grid (mass at {0})")]
    NotOnGrid(f64),
    #[error("dilation factor {0} must be an odd positive integer")]
    EvenDilation(u32),
    #[error("pieces {0} and {1} overlap")]
    OverlappingPieces(usize, usize),
    #[error("piece {0} is not contained in the root interval")]
    PieceOutsideRoot(usize),
    #[error("pieces come from more than one shifted grid")]
    MixedGrids,
    #[error("open set has no complement")]
    UnboundedOpenSet,
    #[error("no cube of the requested grid contains the support")]
    NoCoveringCube,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
