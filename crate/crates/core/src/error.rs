use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),

    #[error("exponent `{label}` is {value} at cell {cell}; exponents must exceed 1")]
    InadmissibleExponent { label: String, cell: usize, value: f64 },

    #[error("cannot parse exponent spec `{0}`")]
    ExponentSpec(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("luxemburg norm: bracket not found after {0} doublings")]
    NormBracket(usize),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no sign change of I along the ray within {0} bracket expansions")]
    NoNehariCrossing(usize),

    #[error("no admissible witness: {0}")]
    NoWitness(String),

    #[error("quadrature disagreement {rel:.3e} exceeds {tol:.1e} ({what})")]
    Quadrature { what: String, rel: f64, tol: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("config {path}:{line}: {msg}")]
    Config {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
