use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("size error: {0}")]
    Size(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("linearization has no purely imaginary pair: trace {trace:e}, det {det:e}")]
    NotHopf { trace: f64, det: f64 },

    #[error("resonance: matrix {matrix} is singular")]
    Resonance { matrix: &'static str },

    #[error("singular operator: |symbol + beta| vanishes at rho = {rho} (beta = {beta_re} + {beta_im}i)")]
    SingularOperator { rho: f64, beta_re: f64, beta_im: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("non-finite values after step {step}")]
    Divergence { step: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable tag used in structured CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Range { .. } => "range",
            Error::State(_) => "state",
            Error::Shape { .. } => "shape",
            Error::Size(_) => "size",
            Error::Param(_) => "param",
            Error::NotHopf { .. } => "not_hopf",
            Error::Resonance { .. } => "resonance",
            Error::SingularOperator { .. } => "singular_operator",
            Error::MaxIterations { .. } => "max_iterations",
            Error::Divergence { .. } => "divergence",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
