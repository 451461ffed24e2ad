use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("chiral pairing failed: {0}")]
    Pairing(String),
    #[error("pairing constraint violated at mode {mode} (residual {residual:.3e})")]
    Constraint { mode: usize, residual: f64 },
    #[error("dark modes present, steady state not unique: {0:?}")]
    DarkModes(Vec<usize>),
    #[error("register of {sites} sites exceeds cap of {cap}")]
    DimensionCap { sites: usize, cap: usize },
    #[error("integrator failure at t = {t}: {msg}")]
    Integrator { t: f64, msg: String },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("cavity truncation leakage {leakage:.3e} too large; try n_max >= {suggested}")]
    Leakage { leakage: f64, suggested: usize },
    #[error("unsupported geometry: {0}")]
    Unsupported(String),
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
