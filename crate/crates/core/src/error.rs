use thiserror::Error;

/// Every failure raised by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    // hashrates and scalars
    #[error("hashrate vector is empty")]
    EmptyHashrate,
    #[error("hashrates sum to {0}, expected 1")]
    SumNotOne(String),
    #[error("largest named miner has non-positive hashrate")]
    NonPositiveLargest,
    #[error("negative hashrate entry {0}")]
    NegativeEntry(String),
    #[error("cannot parse scalar `{0}`")]
    ScalarParse(String),

    // triples, orderings, settlement
    #[error("negative fee on transaction {0}")]
    NegativeFee(String),
    #[error("transaction id {0} appears more than once")]
    DuplicateTxId(String),
    #[error("unknown transaction {0}")]
    UnknownTx(String),
    #[error("no base balance defined for confirmed pattern {{{0}}}")]
    UnknownPattern(String),
    #[error("ordering confirms conflicting transactions {0} and {1}")]
    ConflictViolation(String, String),
    #[error("transaction {0} carries a fee but has no payer")]
    MissingPayer(String),
    #[error("block at round {0} carries fees but has no proposer")]
    MissingProposer(u64),
    #[error("malformed ordering: {0}")]
    MalformedOrdering(String),
    #[error("malformed document: {0}")]
    MalformedDocument(String),

    // censor-only miner game
    #[error("fee order violated: need f1 < f2")]
    FeeOrderViolated,
    #[error("f1 is zero; censoring is trivially optimal")]
    ZeroFee,
    #[error("oracle bound exceeded: {0}")]
    OracleBoundExceeded(String),
    #[error("conflict set of size {0} is not supported (pairs only)")]
    UnsupportedConflictArity(usize),
    #[error("conflict sets overlap on {0}")]
    OverlappingConflictSets(String),

    // game trees
    #[error("node {0} points to missing child {1}")]
    DanglingChild(usize, usize),
    #[error("fee grid of node {0} is empty")]
    FeeGridEmpty(usize),
    #[error("owner {0} is not a player of the game")]
    UnknownOwner(String),
    #[error("game graph has a cycle through node {0}")]
    Cyclic(usize),
    #[error("profile has no choice for player {1} at node {0}")]
    PartialProfile(usize, String),
    #[error("choice {2} out of range at node {0} for player {1}")]
    InvalidChoice(usize, String, usize),
    #[error("enumeration bound exceeded: {0} items, bound {1}")]
    EnumerationBoundExceeded(String, u64),

    // composition and incentive compatibility
    #[error("coalition {0} contains more than one miner")]
    MinerMerged(String),
    #[error("collusion map is not idempotent at {0}")]
    NotIdempotent(String),
    #[error("{0} players exceed the enumeration limit of 10")]
    TooManyPlayers(usize),
    #[error("transaction alphabets overlap on {0}")]
    AlphabetOverlap(String),
    #[error("parameter {0} is outside the target parameter space")]
    ParameterOutOfRange(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("unknown player {0}")]
    UnknownPlayer(String),
    #[error("trace statistics need a tree; node {0} is shared")]
    NonTreeTrace(usize),

    // network layer
    #[error("{0} is not the payer of {1}")]
    NotPayer(String, String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// A precondition of the requested analysis does not hold.
    Domain,
    /// A configured enumeration or oracle limit was hit.
    Bound,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::OracleBoundExceeded(_)
            | Error::EnumerationBoundExceeded(..)
            | Error::TooManyPlayers(_) => ErrorKind::Bound,
            _ => ErrorKind::Domain,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
