use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: String,
    },

    #[error("grid under-resolves the mollifier: h = {h} but h <= {required} is needed (N = {n})")]
    Resolution { h: f64, required: f64, n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported dimension d = {0}")]
    UnsupportedDimension(usize),

    #[error("non-finite drift for particle {particle} at step {step}")]
    Integration { particle: usize, step: usize },

    #[error("step size violates CFL: max|F| dt / h = {ratio:.4} > 0.5")]
    StepSize { ratio: f64 },

    #[error("solution blew up at t = {t}: |rho|_q = {norm:.4e} exceeds {limit:.4e} (choose T < T_max)")]
    BlowUp { t: f64, norm: f64, limit: f64 },

    #[error("negative undershoot at t = {t}: clipped mass {clipped:.3e} exceeds {limit:.1e}")]
    Positivity { t: f64, clipped: f64, limit: f64 },

    #[error("beta = {beta} outside admissible window (0, {bound}) ({theorem})")]
    Admissibility {
        beta: f64,
        bound: f64,
        theorem: &'static str,
    },

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("replica failure (N = {n}, seed = {seed}): {source}")]
    Replica {
        n: usize,
        seed: u64,
        #[source]
        source: Box<LabError>,
    },

    #[error("study aborted, failed replicas: {0:?}")]
    Study(Vec<(usize, u64, String)>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Process exit code used by the `simulate` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_)
            | LabError::Admissibility { .. }
            | LabError::Resolution { .. }
            | LabError::InvalidParameter { .. }
            | LabError::InvalidInput(_)
            | LabError::UnsupportedDimension(_)
            | LabError::Json(_) => 2,
            LabError::StepSize { .. } | LabError::BlowUp { .. } | LabError::Positivity { .. } => 3,
            LabError::Replica { source, .. } => match source.exit_code() {
                3 => 3,
                _ => 4,
            },
            LabError::Study(_) | LabError::Integration { .. } => 4,
            LabError::Domain(_) | LabError::Io(_) => 1,
        }
    }
}
