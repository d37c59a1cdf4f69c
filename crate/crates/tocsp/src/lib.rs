//! Workbench for CCSP with time-out transitions.
//!
//! CCSP is a CSP-style process algebra over a finite alphabet of visible
//! actions, extended here with two distinguished labels: the hidden action
//! `tau` and the time-out `t`. A time-out transition fires only while the
//! environment lets no visible action and no internal step proceed, which
//! makes the usual strong bisimilarity too fine and plain weak equivalences
//! too coarse. The workbench implements the reactive flavour of strong
//! bisimilarity that fits this setting, together with the supporting cast:
//!
//! - [`syntax`]: terms, parsing, printing, validity, guardedness,
//!   capture-avoiding substitution and unfolding of recursive specifications.
//! - [`sos`]: structural operational semantics (transition derivation with
//!   stratified negative premises), initial-action sets, LTS exploration.
//! - [`equiv`]: initials equivalence, strong bisimilarity, strong reactive
//!   bisimilarity and its environment-indexed variant, a brute-force oracle
//!   over generalized bisimulations, distinguishing formulas, certificates.
//! - [`modal`]: reactive Hennessy-Milner logic with an environment modality
//!   and the two satisfaction relations it needs.
//! - [`axiom`]: head-normal-form rewriting under the equational axioms,
//!   recursion-free equivalence decision, named algebraic laws.
//! - [`minimize`]: quotient of an LTS by reactive bisimilarity, canonical
//!   numbering, re-encoding as a recursive specification.
//! - [`cli`]: the `tocsp` command-line front end.
//!
//! Terms are hash-consed after bound-variable normalization, so structural
//! equality is pointer equality and terms double as LTS state identities.

pub mod axiom;
pub mod cli;
pub mod equiv;
pub mod minimize;
pub mod modal;
pub mod sos;
pub mod syntax;

#[cfg(test)]
pub(crate) mod testgen;

/// Crate-wide error type.
///
/// The CLI maps `UnfoldBudget`, `StateBudget` and `EnvLimit` to exit code 3
/// (resource budgets) and every other variant to exit code 2 (usage or input
/// errors); verdicts themselves are not errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("open term with free variables: {0}")]
    OpenTerm(String),
    #[error("unguarded recursion: {0}")]
    Unguarded(String),
    #[error("operation requires a recursion-free term: {0}")]
    RecursionPresent(String),
    #[error("side condition violated: {0}")]
    SideCondition(String),
    #[error("malformed certificate: {0}")]
    Certificate(String),
    #[error("{0}")]
    Usage(String),
    #[error("unfold budget of {budget} exhausted; is the recursion guarded?")]
    UnfoldBudget { budget: u64 },
    #[error("state budget of {max_states} states exhausted during exploration")]
    StateBudget { max_states: usize },
    #[error("relevant alphabet has {size} actions; environment enumeration is capped at {limit}")]
    EnvLimit { size: usize, limit: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnfoldBudget { .. } | Error::StateBudget { .. } | Error::EnvLimit { .. } => 3,
            _ => 2,
        }
    }
}

/// Resource limits shared by exploration and equivalence checking.
#[derive(Debug, Clone)]
pub struct Limits {
    /// Maximum number of states an exploration may allocate.
    pub max_states: usize,
    /// Maximum size of the relevant alphabet when environment sets are
    /// enumerated (the enumeration is exponential in this size).
    pub env_limit: usize,
    /// Maximum number of recursion unfoldings per derivation query.
    pub unfold_budget: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_states: sos::DEFAULT_MAX_STATES,
            env_limit: equiv::DEFAULT_ENV_LIMIT,
            unfold_budget: sos::DEFAULT_UNFOLD_BUDGET,
        }
    }
}
