//! In-memory protocol model: terms, function symbols, equations, roles,
//! message flow and goals.
//!
//! All values are immutable once built; a [`ProtocolSpec`] can only be
//! obtained through its builder, which rejects every invariant violation.

mod bundle;
mod equation;
mod spec;
mod term;

pub use bundle::{Bundle, BundleSet};
pub use equation::{Equation, EquationError, Orientation};
pub use spec::{
    Delivery, KeyKind, LongTermKey, MessageStep, ProtocolSpec, ProtocolSpecBuilder, Role,
    SecurityGoal, Site, Violation,
};
pub(crate) use spec::sort_name;
pub use term::{
    build_exp_chain, exp_chain, is_identifier, normalize, substitute, subterms, Application,
    Constant, FunctionSymbol, Sort, Substitution, Term, TermError, Tuple, Var, Visibility,
};
pub(crate) use term::{match_term, substitute_unchecked};
