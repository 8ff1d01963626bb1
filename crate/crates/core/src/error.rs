use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("not invertible")]
    NotInvertible,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime {0} is outside the supported range [2, 65536)")]
    PrimeOutOfRange(u64),
    #[error("domain mismatch: {0} vs {1}")]
    DomainMismatch(String, String),
    #[error("order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid leg subset {0:?}")]
    InvalidSubset(Vec<usize>),
    #[error("leg {leg} out of range for order {order}")]
    LegOutOfRange { leg: usize, order: usize },
    #[error("tensor is not cubical: dims {0:?}")]
    NonCubical(Vec<usize>),
    #[error("tensor of {entries} entries exceeds the cap of {cap}")]
    TooLarge { entries: u128, cap: usize },
    #[error("search-infeasible: {what} needs more than the budget of {budget} candidates")]
    SearchInfeasible { what: String, budget: u64 },
    #[error("skew input: a nonzero matrix with zero diagonal and f_ij = -f_ji has no triangular congruence form")]
    SkewInput,
    #[error("domain too small: {0} has fewer than 3 elements")]
    DomainTooSmall(String),
    #[error("pivot search exhausted after {0} restarts")]
    PivotSearchExhausted(usize),
    #[error("missing square root of diagonal entry {index} (partial diagonal {partial:?})")]
    MissingSquareRoot { index: usize, partial: Vec<String> },
    #[error("not symmetric")]
    NotSymmetric,
    #[error("characteristic too small: characteristic {characteristic} with order {order} (need 0 or > order)")]
    CharacteristicTooSmall { characteristic: u32, order: usize },
    #[error("premise fails: {0}")]
    PremiseFails(String),
    #[error("missing k-th root for diagonal coordinates {0:?}")]
    MissingKthRoot(Vec<usize>),
    #[error("all flattening ranks are at most 1")]
    FlatteningRanksTooSmall,
    #[error("no admissible type found after relabeling")]
    NoAdmissibleType,
    #[error("gate exceeded: {what} has size {size}, limit {limit}")]
    GateExceeded { what: String, size: u128, limit: u128 },
    #[error("zero tensor")]
    ZeroTensor,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("sandwich inequality violated: {0}")]
    SandwichViolation(String),
    #[error("witness invalid: {0}")]
    WitnessInvalid(String),
}

impl Error {
    /// Short machine-readable identifier used by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotInvertible => "not-invertible",
            Error::NotPrime(_) | Error::PrimeOutOfRange(_) => "bad-domain",
            Error::DomainMismatch(..) => "domain-mismatch",
            Error::OrderMismatch(..) => "order-mismatch",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::InvalidSubset(_) => "invalid-subset",
            Error::LegOutOfRange { .. } => "leg-out-of-range",
            Error::NonCubical(_) => "non-cubical",
            Error::TooLarge { .. } => "too-large",
            Error::SearchInfeasible { .. } => "search-infeasible",
            Error::SkewInput => "skew-input",
            Error::DomainTooSmall(_) => "domain-too-small",
            Error::PivotSearchExhausted(_) => "pivot-search-exhausted",
            Error::MissingSquareRoot { .. } => "missing-square-root",
            Error::NotSymmetric => "not-symmetric",
            Error::CharacteristicTooSmall { .. } => "characteristic-too-small",
            Error::PremiseFails(_) => "premise-fails",
            Error::MissingKthRoot(_) => "missing-kth-root",
            Error::FlatteningRanksTooSmall => "flattening-ranks-too-small",
            Error::NoAdmissibleType => "no-admissible-type",
            Error::GateExceeded { .. } => "gate-exceeded",
            Error::ZeroTensor => "zero-tensor",
            Error::InvalidInput(_) => "invalid-input",
            Error::Numeric(_) => "numeric",
            Error::SandwichViolation(_) => "sandwich-violation",
            Error::WitnessInvalid(_) => "witness-invalid",
        }
    }

    /// Size limits (budgets, gates, caps) as opposed to bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::SearchInfeasible { .. } | Error::GateExceeded { .. } | Error::TooLarge { .. }
        )
    }
}
