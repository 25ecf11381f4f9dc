use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coordinate count {n} outside supported range 1..={max}")]
    DimensionOutOfRange { n: usize, max: usize },

    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("entry {index} is negative or not finite ({value})")]
    InvalidMass { index: usize, value: f64 },

    #[error("total mass {mass} is not within tolerance of 1")]
    Normalization { mass: f64 },

    #[error("measure has empty support")]
    EmptySupport,

    #[error("slice atom {atom:?} is not a valid {k}-subset of [{n}]")]
    InvalidSliceAtom {
        atom: Vec<usize>,
        n: usize,
        k: usize,
    },

    #[error("vector entry {index} is not finite")]
    NonFinite { index: usize },

    #[error("pin entry {index} is {value}, expected -1, 0 or +1")]
    InvalidPinEntry { index: usize, value: i8 },

    #[error("pinning event has zero probability")]
    InfeasiblePin,

    #[error("absolute continuity violated at state {index}")]
    AbsoluteContinuityViolation { index: usize },

    #[error("test function is invalid: {0}")]
    InvalidFunction(String),

    #[error("one-site marginals are undefined for k = 0")]
    EmptyK,

    #[error("sparsity parameter c = {0} outside (0, 1]")]
    InvalidSparsity(f64),

    #[error("Ky Fan order m = {m} outside 1..={n}")]
    KyFanOrder { m: usize, n: usize },

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("pin enumeration needs {required} pins, budget is {budget}; use sampling mode")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("variance {variance} of coordinate {coordinate} is below floor {floor}")]
    VarianceFloorViolated {
        coordinate: usize,
        variance: f64,
        floor: f64,
    },

    #[error("no independent set of size {k}")]
    EmptySlice { k: usize },

    #[error("alpha_c needs max degree >= 3, got {0}")]
    InvalidDegree(usize),

    #[error("ordering exhausted at step {0}")]
    OrderingExhausted(usize),

    #[error("initial entropy is zero")]
    ZeroEntropy,

    #[error("graph parse error at line {line}: {message}")]
    GraphParse { line: usize, message: String },

    #[error("measure spec error: {0}")]
    SpecParse(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
