use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("net `{0}` has no driver")]
    UndrivenNet(String),
    #[error("net `{0}` has more than one driver")]
    DuplicateDriver(String),
    #[error("combinational cycle through net `{0}`")]
    Cycle(String),
    #[error("gate `{gate}`: {message}")]
    Arity { gate: String, message: String },
    #[error("primary output `{0}` does not reference an existing net")]
    DanglingOutput(String),
    #[error("missing value for input net `{0}`")]
    MissingInput(String),
    #[error("key has {got} bits but the netlist has {expected} key inputs")]
    KeyLength { expected: usize, got: usize },
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("gate set is not connected")]
    Disconnected,
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("insufficient eligible nets: requested {requested}, only {available} available")]
    InsufficientSites { requested: usize, available: usize },
    #[error("`{0}` is not a key input")]
    NotAKeyInput(String),
    #[error("invalid locality size {0} (expected 3..=10)")]
    LocalitySize(usize),
    #[error("key-gate record for `{0}` not found")]
    RecordNotFound(String),
    #[error("rewrite log replay diverged at entry {0}")]
    ReplayDiverged(usize),
    #[error("empty training data")]
    EmptyData,
    #[error("inconsistent feature length: expected {expected}, got {got}")]
    FeatureLength { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("no ensemble member available for the given localities")]
    NoMembers,
    #[error("victim netlist has no key inputs")]
    NoKeyInputs,
    #[error("value {0} out of range [0, 100]")]
    OutOfRange(f64),
    #[error("result for `{0}` carries no ground truth")]
    MissingTruth(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
