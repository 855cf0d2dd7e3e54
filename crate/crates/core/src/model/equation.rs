use std::collections::BTreeSet;

use thiserror::Error;

use super::term::{Term, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    Destructor,
    Unoriented,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquationError {
    #[error("right-hand side uses variables absent from the left: {0}")]
    RhsVars(String),
    #[error("a destructor equation needs a function application on the left")]
    NotApplication,
    #[error("destructor `{0}` also occurs on the right-hand side")]
    RootInRhs(String),
    #[error("a destructor must rewrite to a variable of the left-hand side or a constant")]
    RhsShape,
    #[error(
        "destructor `{0}` needs one compound argument whose variables cover all other arguments"
    )]
    NoMainArgument(String),
}

/// `lhs = rhs`. Destructor equations additionally have a designated main
/// argument: the compound argument that gets matched against known terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Equation {
    lhs: Term,
    rhs: Term,
    orientation: Orientation,
}

impl Equation {
    pub fn new(lhs: Term, rhs: Term, orientation: Orientation) -> Result<Self, EquationError> {
        let lhs_vars = lhs.var_set();
        let extra: Vec<String> = rhs
            .vars()
            .into_iter()
            .filter(|v| !lhs_vars.contains(v))
            .map(|v| v.to_string())
            .collect();
        if !extra.is_empty() {
            return Err(EquationError::RhsVars(extra.join(", ")));
        }
        let eq = Equation {
            lhs,
            rhs,
            orientation,
        };
        if orientation == Orientation::Destructor {
            eq.check_destructor()?;
        }
        Ok(eq)
    }

    fn check_destructor(&self) -> Result<(), EquationError> {
        let Term::Apply(app) = &self.lhs else {
            return Err(EquationError::NotApplication);
        };
        let root = app.symbol().name();
        if self.rhs.contains_symbol(root) {
            return Err(EquationError::RootInRhs(root.to_owned()));
        }
        let rhs_ok = match &self.rhs {
            Term::Var(v) => self.lhs.var_set().contains(v),
            Term::Const(_) => true,
            Term::Apply(a) => a.args().is_empty(),
            Term::Tuple(_) => false,
        };
        if !rhs_ok {
            return Err(EquationError::RhsShape);
        }
        if self.main_argument().is_none() {
            return Err(EquationError::NoMainArgument(root.to_owned()));
        }
        Ok(())
    }

    pub fn lhs(&self) -> &Term {
        &self.lhs
    }

    pub fn rhs(&self) -> &Term {
        &self.rhs
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Position of the first compound argument of the left-hand side whose
    /// variables include those of every other argument.
    pub fn main_argument(&self) -> Option<usize> {
        let Term::Apply(app) = &self.lhs else {
            return None;
        };
        let args = app.args();
        (0..args.len()).find(|&i| {
            if args[i].is_atom() {
                return false;
            }
            let covered: BTreeSet<Var> = args[i].var_set();
            args.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .all(|(_, a)| a.var_set().is_subset(&covered))
        })
    }
}
