use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),

    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("Kraus operators are not trace preserving (max deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("not a valid density matrix: {0}")]
    Unphysical(String),

    #[error("invalid probability {name} = {value}")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("invalid secret string {0:?}: must be a non-empty string over {{0,1}}")]
    InvalidSecret(String),

    #[error("register of {qubits} qubits exceeds the limit of {limit}")]
    RegisterTooLarge { qubits: usize, limit: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unphysical coherence{}: T2 = {t2:.3e} s exceeds 2*T1 = {two_t1:.3e} s", qubit.map(|q| format!(" on qubit {q}")).unwrap_or_default())]
    UnphysicalCoherence { qubit: Option<usize>, t2: f64, two_t1: f64 },

    #[error("missing calibration for gate {gate} on qubits {qubits:?}")]
    MissingCalibration { gate: String, qubits: Vec<usize> },

    #[error("missing calibration for qubit {0}")]
    MissingQubit(usize),

    #[error("invalid snapshot: {0}")]
    Snapshot(String),

    #[error("{shots} shots cannot cover {settings} measurement settings")]
    InsufficientShots { shots: u64, settings: usize },

    #[error("tomography data is missing setting {0}")]
    MissingSetting(String),

    #[error("statistic undefined: {0}")]
    Undefined(&'static str),

    #[error("ragged input: {0}")]
    Ragged(String),

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
