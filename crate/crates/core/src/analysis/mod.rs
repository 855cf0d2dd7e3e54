//! Executability of a protocol: can every role build what it sends from
//! what it knows, and does it learn what its goals talk about.
//!
//! Knowledge is a set of normalized terms closed under decomposition
//! ([`saturate`]); membership of a compound term is then decided by
//! composition with public symbols ([`derivable`]).

mod executability;
mod knowledge;

pub use executability::{
    check_executability, check_goals, check_goals_located, equation_warnings, initial_knowledge,
    trace, ExecutabilityReport, KnowledgeState, StepViolation, Trace,
};
pub use knowledge::{derivable, missing_subterm, saturate, Context};
