use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use super::bundle::{Bundle, BundleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Message,
    Fresh,
    Public,
}

impl Sort {
    /// Whether a term of sort `actual` may stand where `self` is expected.
    pub fn accepts(self, actual: Sort) -> bool {
        self == Sort::Message || self == actual
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Visibility {
    Public,
    Private,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("`{symbol}` expects {expected} argument(s), found {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("a tuple needs at least two items, found {0}")]
    TupleTooShort(usize),
    #[error("`{name}` is not a valid identifier")]
    BadIdentifier { name: String },
    #[error("cannot bind {var} to `{term}`: sort mismatch")]
    SortMismatch { var: String, term: String },
}

/// `[A-Za-z][A-Za-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionSymbol {
    name: String,
    arity: usize,
    visibility: Visibility,
}

impl FunctionSymbol {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        visibility: Visibility,
    ) -> Result<Self, TermError> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(TermError::BadIdentifier { name });
        }
        Ok(FunctionSymbol {
            name,
            arity,
            visibility,
        })
    }

    pub(crate) fn builtin(name: &str, arity: usize) -> Self {
        FunctionSymbol {
            name: name.to_owned(),
            arity,
            visibility: Visibility::Public,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn visibility(&self) -> Visibility {
        self.visibility
    }

    pub fn is_public(&self) -> bool {
        self.visibility == Visibility::Public
    }
}

impl fmt::Display for FunctionSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub name: String,
    pub sort: Sort,
}

impl Var {
    pub fn new(name: impl Into<String>, sort: Sort) -> Self {
        Var {
            name: name.into(),
            sort,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sort {
            Sort::Message => write!(f, "{}", self.name),
            Sort::Fresh => write!(f, "~{}", self.name),
            Sort::Public => write!(f, "${}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant {
    pub name: String,
    pub sort: Sort,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Application {
    symbol: FunctionSymbol,
    args: Vec<Term>,
}

impl Application {
    pub fn symbol(&self) -> &FunctionSymbol {
        &self.symbol
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tuple {
    items: Vec<Term>,
}

impl Tuple {
    pub fn items(&self) -> &[Term] {
        &self.items
    }
}

/// A symbolic message. `Apply` and `Tuple` can only be built through the
/// checked constructors, so arity and tuple length always hold.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Const(Constant),
    Apply(Application),
    Tuple(Tuple),
}

pub type Substitution = BTreeMap<Var, Term>;

impl Term {
    pub fn var(name: impl Into<String>, sort: Sort) -> Term {
        Term::Var(Var::new(name, sort))
    }

    /// Message-sorted variable.
    pub fn msg(name: impl Into<String>) -> Term {
        Term::var(name, Sort::Message)
    }

    pub fn fresh(name: impl Into<String>) -> Term {
        Term::var(name, Sort::Fresh)
    }

    pub fn public(name: impl Into<String>) -> Term {
        Term::var(name, Sort::Public)
    }

    pub fn constant(name: impl Into<String>, sort: Sort) -> Term {
        Term::Const(Constant {
            name: name.into(),
            sort,
        })
    }

    pub fn apply(symbol: &FunctionSymbol, args: Vec<Term>) -> Result<Term, TermError> {
        if args.len() != symbol.arity {
            return Err(TermError::Arity {
                symbol: symbol.name.clone(),
                expected: symbol.arity,
                found: args.len(),
            });
        }
        Ok(Term::Apply(Application {
            symbol: symbol.clone(),
            args,
        }))
    }

    pub fn tuple(items: Vec<Term>) -> Result<Term, TermError> {
        if items.len() < 2 {
            return Err(TermError::TupleTooShort(items.len()));
        }
        Ok(Term::Tuple(Tuple { items }))
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::Tuple(Tuple { items: vec![a, b] })
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::Var(v) => v.sort,
            Term::Const(c) => c.sort,
            Term::Apply(_) | Term::Tuple(_) => Sort::Message,
        }
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Term::Var(_) | Term::Const(_))
    }

    /// Immediate subterms.
    pub fn children(&self) -> &[Term] {
        match self {
            Term::Var(_) | Term::Const(_) => &[],
            Term::Apply(app) => &app.args,
            Term::Tuple(t) => &t.items,
        }
    }

    /// Atoms have depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(Term::depth).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(Term::size).sum::<usize>()
    }

    /// Variables in pre-order of first occurrence.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        self.visit(&mut |t| {
            if let Term::Var(v) = t {
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
        });
        out
    }

    pub fn var_set(&self) -> BTreeSet<Var> {
        self.vars().into_iter().collect()
    }

    pub fn contains_symbol(&self, name: &str) -> bool {
        match self {
            Term::Apply(app) => {
                app.symbol.name == name || app.args.iter().any(|a| a.contains_symbol(name))
            }
            Term::Tuple(t) => t.items.iter().any(|a| a.contains_symbol(name)),
            _ => false,
        }
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Rebuilds the term bottom-up, replacing children through `f`.
    pub(crate) fn with_children(&self, children: Vec<Term>) -> Term {
        match self {
            Term::Var(_) | Term::Const(_) => self.clone(),
            Term::Apply(app) => Term::Apply(Application {
                symbol: app.symbol.clone(),
                args: children,
            }),
            Term::Tuple(_) => Term::Tuple(Tuple { items: children }),
        }
    }

    /// Total order used wherever output must be reproducible: lexicographic
    /// on the printed form, ties broken structurally.
    pub fn canonical_cmp(&self, other: &Term) -> Ordering {
        self.to_string()
            .cmp(&other.to_string())
            .then_with(|| self.cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => match c.sort {
                Sort::Public => write!(f, "'{}'", c.name),
                _ => write!(f, "'{}':msg", c.name),
            },
            Term::Apply(app) => {
                write!(f, "{}(", app.symbol.name)?;
                write_list(f, &app.args)?;
                f.write_str(")")
            }
            Term::Tuple(t) => {
                f.write_str("<")?;
                write_list(f, &t.items)?;
                f.write_str(">")
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[Term]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

/// `t` followed by all its transitive subterms in pre-order, duplicates
/// removed (first occurrence wins).
pub fn subterms(t: &Term) -> Vec<Term> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    t.visit(&mut |s| {
        if seen.insert(s) {
            out.push(s.clone());
        }
    });
    out
}

/// Simultaneous replacement of variables. Unmapped variables are kept.
pub fn substitute(t: &Term, binding: &Substitution) -> Result<Term, TermError> {
    for (var, term) in binding {
        if !var.sort.accepts(term.sort()) {
            return Err(TermError::SortMismatch {
                var: var.to_string(),
                term: term.to_string(),
            });
        }
    }
    Ok(substitute_unchecked(t, binding))
}

pub(crate) fn substitute_unchecked(t: &Term, binding: &Substitution) -> Term {
    match t {
        Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Const(_) => t.clone(),
        _ => t.with_children(
            t.children()
                .iter()
                .map(|c| substitute_unchecked(c, binding))
                .collect(),
        ),
    }
}

/// Syntactic matching of `pattern` against `subject`, extending `binding`.
/// Pattern variables only match terms their sort accepts.
pub(crate) fn match_term(pattern: &Term, subject: &Term, binding: &mut Substitution) -> bool {
    match (pattern, subject) {
        (Term::Var(v), _) => {
            if !v.sort.accepts(subject.sort()) {
                return false;
            }
            match binding.get(v) {
                Some(bound) => bound == subject,
                None => {
                    binding.insert(v.clone(), subject.clone());
                    true
                }
            }
        }
        (Term::Const(a), Term::Const(b)) => a == b,
        (Term::Apply(a), Term::Apply(b)) => {
            a.symbol == b.symbol
                && a.args
                    .iter()
                    .zip(&b.args)
                    .all(|(p, s)| match_term(p, s, binding))
        }
        (Term::Tuple(a), Term::Tuple(b)) => {
            a.items.len() == b.items.len()
                && a.items
                    .iter()
                    .zip(&b.items)
                    .all(|(p, s)| match_term(p, s, binding))
        }
        _ => false,
    }
}

/// Splits a Diffie-Hellman exponentiation chain `exp(..exp(base, e1).., en)`
/// into its base and exponents (outermost last). Returns `None` for terms
/// whose root is not `exp`.
pub fn exp_chain(t: &Term) -> Option<(&Term, Vec<&Term>)> {
    let mut exponents = Vec::new();
    let mut cur = t;
    while let Term::Apply(app) = cur {
        if !Bundle::is_exp(&app.symbol) {
            break;
        }
        exponents.push(&app.args[1]);
        cur = &app.args[0];
    }
    if exponents.is_empty() {
        return None;
    }
    exponents.reverse();
    Some((cur, exponents))
}

/// Builds `exp(..exp(base, e1).., en)`.
pub fn build_exp_chain(base: Term, exponents: impl IntoIterator<Item = Term>) -> Term {
    let exp = Bundle::exp_symbol();
    exponents.into_iter().fold(base, |acc, e| {
        Term::Apply(Application {
            symbol: exp.clone(),
            args: vec![acc, e],
        })
    })
}

/// Canonical form modulo the active bundles' equalities. Only the
/// Diffie-Hellman bundle changes terms: exponent chains are flattened and the
/// exponents sorted by [`Term::canonical_cmp`].
pub fn normalize(t: &Term, bundles: &BundleSet) -> Term {
    if !bundles.contains(&Bundle::DiffieHellman) {
        return t.clone();
    }
    normalize_dh(t)
}

fn normalize_dh(t: &Term) -> Term {
    if let Some((base, exponents)) = exp_chain(t) {
        let base = normalize_dh(base);
        let mut exps: Vec<Term> = exponents.into_iter().map(normalize_dh).collect();
        sort_canonical(&mut exps);
        return build_exp_chain(base, exps);
    }
    match t {
        Term::Var(_) | Term::Const(_) => t.clone(),
        _ => t.with_children(t.children().iter().map(normalize_dh).collect()),
    }
}

pub(crate) fn sort_canonical(terms: &mut [Term]) {
    terms.sort_by_cached_key(|t| (t.to_string(), t.clone()));
}
