use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid modulus: {0}")]
    InvalidModulus(String),
    #[error("invalid descriptor: {0}")]
    InvalidSpec(String),
    #[error("not a unit: {0}")]
    NotAUnit(String),
    #[error("ring mismatch")]
    RingMismatch,
    #[error("component index {0} out of range")]
    IndexError(usize),
    #[error("residue input is not idempotent")]
    NotIdempotent,
    #[error("ring is not enumerable")]
    NotEnumerable,
    #[error("invalid arity: {0}")]
    InvalidArity(String),
    #[error("epsilon must be central with eps^sigma * eps = 1")]
    InvalidEpsilon,
    #[error("centralizer is not free of constant rank")]
    NonFreeCentralizer,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("invalid octagon data: {0}")]
    InvalidOctagonData(String),
    #[error("invalid entry: {0}")]
    InvalidEntry(String),
    #[error("form mismatch: {0}")]
    FormMismatch(String),
    #[error("invalid idempotent: {0}")]
    InvalidIdempotent(String),
    #[error("form is not unimodular")]
    NotUnimodular,
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
    #[error("form is not diagonalizable under the supported hypotheses")]
    NotDiagonalizable,
    #[error("invalid rank: {0}")]
    InvalidRank(String),
    #[error("rank cap exceeded: {0}")]
    CapExceeded(String),
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("homomorphisms do not compose: {0}")]
    HomMismatch(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("no preimage found")]
    NotFound,
}

pub type Result<T> = std::result::Result<T, Error>;
