use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("score vector needs at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("score of arm {arm} must be positive and finite, got {value}")]
    InvalidScore { arm: usize, value: f64 },
    #[error("dimension mismatch: expected {expected} arms, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("preselection must be nonempty")]
    EmptyPreselection,
    #[error("arm {arm} out of range for {n} arms")]
    ArmOutOfRange { arm: usize, n: usize },
    #[error("arm {0} listed twice in preselection")]
    DuplicateArm(usize),
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("arm {arm} is not part of the offered subset")]
    NotOffered { arm: usize },
    #[error("round index must be at least 1")]
    ZeroRound,
    #[error("relative score for arm {arm} must be positive, got {value}")]
    InvalidRelativeScore { arm: usize, value: f64 },
    #[error("negative regret {0}: reference reward was not optimal")]
    NegativeRegret(f64),
    #[error("subset size {l} out of range for {n} arms")]
    SizeOutOfRange { l: usize, n: usize },
    #[error("brute force over C({n},{l}) subsets exceeds the budget of {budget}")]
    BudgetExceeded { n: usize, l: usize, budget: u128 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("checkpoint T={0} is not part of the batch")]
    UnknownCheckpoint(u64),
    #[error("snapshot: {0}")]
    Snapshot(String),
}
