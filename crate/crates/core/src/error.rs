use thiserror::Error;

use crate::geom::Vec3;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An input violated the documented preconditions of an operation.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Inverting a sphere that passes through the inversion center.
    #[error("degenerate: plane image (normal {normal:?}, distance {distance})")]
    PlaneImage { normal: Vec3, distance: f64 },

    #[error("open surface: {0}")]
    OpenSurface(String),

    #[error("boundary-ambiguous: point lies within {tolerance:e} of the surface")]
    BoundaryAmbiguous { tolerance: f64 },

    #[error("non-existent: gamma1 + gamma2 <= pi + alpha (margin {margin})")]
    NonExistent { margin: f64 },

    #[error("degenerate boundary: {0}")]
    DegenerateBoundary(String),

    #[error("no bridge for parameters: {0}")]
    NoBridge(String),

    #[error("profile integration failed: {0}")]
    Integration(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("boundary not planar: {0}")]
    NotPlanar(String),

    #[error("boundary not in wedge face: {0}")]
    NotInWedgeFace(String),

    #[error("non-manifold mesh: {0}")]
    NonManifold(String),

    #[error("no failure radius: |X|^2 H + 2 X.N = {radicand} <= 0")]
    NoFailureRadius { radicand: f64 },

    #[error("precondition unmet: {0}")]
    Precondition(String),

    #[error("rho {rho} exceeds max |X| = {max_radius}")]
    EmptySubdomain { rho: f64, max_radius: f64 },

    #[error("no interior sample")]
    NoInteriorSample,

    #[error("trace extraction failed: {0}")]
    TraceExtraction(String),

    #[error("no touching found above rho = {rho_min}")]
    NoTouching { rho_min: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
