use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("config line {line}: {msg}")]
    ConfigAt { line: usize, msg: String },

    #[error("non-finite value at mode {mode}")]
    NonFinite { mode: i64 },

    #[error("1 + v vanishes at grid point {index} (x = {x:.6}, 1 + v = {value:.3e})")]
    Singular { index: usize, x: f64, value: f64 },

    #[error("not a diffeomorphism at this amplitude: min J = {margin:.6}, required > {required}")]
    NotDiffeomorphism { margin: f64, required: f64 },

    #[error("amplitude outside contraction regime: increment {increment:.3e} after {iterations} Picard iterations")]
    Contraction { iterations: usize, increment: f64 },

    #[error("geometry degenerate: min(1 + Λh) = {margin:.6}")]
    GeometryDegenerate { margin: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("elliptic cache does not match the state")]
    StaleCache,

    #[error("step failed at t = {t}: {source}")]
    Step { t: f64, source: Box<Error> },

    #[error("missing elliptic snapshot at t = {t}")]
    SnapshotGap { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
