use thiserror::Error;

/// Errors raised by the numerical operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("radius {r} outside the profile domain [0, {extent}]")]
    OutOfDomain { r: f64, extent: f64 },

    #[error("arclength coordinate diverges at the pole r = {r}")]
    AtPole { r: f64 },

    #[error("geodesic reached a pole after arclength {s:.6}")]
    PoleCrossing { s: f64 },

    #[error("geodesic shooting did not converge: {0}")]
    ShootingFailed(String),

    #[error("points lie outside the comparison space (diameter {diameter:.6})")]
    ComparisonDiameter { diameter: f64 },

    #[error("side lengths ({a}, {b}, {c}) violate the triangle inequality")]
    TriangleInequality { a: f64, b: f64, c: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("endpoint value {0} is not a pole of the target")]
    NotAPole(f64),

    #[error("not enough dynamic range near the boundary for an exponent fit")]
    InsufficientRange,

    #[error("time step {dt:.3e} violates the stability bound {bound:.3e}")]
    Cfl { dt: f64, bound: f64 },

    #[error("solution is not converged")]
    Unconverged,

    #[error("evolution aborted at t = {t:.6}: {reason}")]
    EvolutionAborted { t: f64, reason: String },

    #[error("chart point ({x}, {y}) outside the unit disc")]
    ChartBoundary { x: f64, y: f64 },

    #[error("recorded window does not contain the requested cone")]
    OutsideWindow,

    #[error("profile table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
