use std::collections::{BTreeMap, BTreeSet};

use crate::diagnostic::{Code, Diagnostic, Location};

use super::bundle::{Bundle, BundleSet};
use super::equation::Equation;
use super::term::{is_identifier, FunctionSymbol, Sort, Term, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyKind {
    Symmetric,
    AsymmetricPrivate,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LongTermKey {
    pub var: Var,
    pub kind: KeyKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Role {
    pub name: String,
    pub initial_knowledge: Vec<Term>,
    pub fresh_values: Vec<Var>,
    pub long_term_keys: Vec<LongTermKey>,
}

impl Role {
    pub fn new(name: impl Into<String>) -> Self {
        Role {
            name: name.into(),
            initial_knowledge: Vec::new(),
            fresh_values: Vec::new(),
            long_term_keys: Vec::new(),
        }
    }

    pub fn knows(mut self, t: Term) -> Self {
        self.initial_knowledge.push(t);
        self
    }

    pub fn fresh(mut self, name: impl Into<String>) -> Self {
        self.fresh_values.push(Var::new(name, Sort::Fresh));
        self
    }

    pub fn ltk(mut self, name: impl Into<String>, kind: KeyKind) -> Self {
        self.long_term_keys.push(LongTermKey {
            var: Var::new(name, Sort::Fresh),
            kind,
        });
        self
    }

    /// The public variable naming this role's identity (`$A` for role `A`).
    pub fn identity(&self) -> Var {
        Var::new(self.name.clone(), Sort::Public)
    }

    pub fn asymmetric_key(&self) -> Option<&Var> {
        self.long_term_keys
            .iter()
            .find(|k| k.kind == KeyKind::AsymmetricPrivate)
            .map(|k| &k.var)
    }

    /// Variables this role generates or holds as long-term secrets.
    pub fn owns(&self, v: &Var) -> bool {
        self.fresh_values.contains(v) || self.long_term_keys.iter().any(|k| &k.var == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Delivery {
    #[default]
    Decompose,
    Atomic,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MessageStep {
    pub index: usize,
    pub from: String,
    pub to: String,
    pub payload: Term,
    pub delivery: Delivery,
}

impl MessageStep {
    pub fn new(index: usize, from: impl Into<String>, to: impl Into<String>, payload: Term) -> Self {
        MessageStep {
            index,
            from: from.into(),
            to: to.into(),
            payload,
            delivery: Delivery::Decompose,
        }
    }

    pub fn atomic(mut self) -> Self {
        self.delivery = Delivery::Atomic;
        self
    }

    pub fn involves(&self, role: &str) -> bool {
        self.from == role || self.to == role
    }
}

/// Executability is implicit and has no variant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SecurityGoal {
    Secrecy {
        term: Term,
        viewpoint: String,
    },
    Agreement {
        claimer: String,
        peer: String,
        terms: Vec<Term>,
    },
}

/// Where in a specification a violation was found. The XML layer maps sites
/// back to source positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Protocol,
    Function(usize),
    Equation(usize),
    Role(usize),
    Knows(usize, usize),
    Fresh(usize, usize),
    Ltk(usize, usize),
    /// Position in the exchange (0-based).
    Step(usize),
    Goal(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: Code,
    pub message: String,
    pub site: Site,
    pub step: Option<usize>,
}

impl Violation {
    fn new(code: Code, site: Site, message: impl Into<String>) -> Self {
        Violation {
            code,
            message: message.into(),
            site,
            step: None,
        }
    }

    fn step(mut self, step: Option<usize>) -> Self {
        self.step = step;
        self
    }

    pub fn to_diagnostic(&self, locate: impl Fn(Site) -> Option<Location>) -> Diagnostic {
        Diagnostic::error(self.code, self.message.clone())
            .at(locate(self.site))
            .in_step(self.step)
    }
}

/// A complete, validated protocol description. Only obtainable through
/// [`ProtocolSpecBuilder::build`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolSpec {
    name: String,
    bundles: BundleSet,
    functions: Vec<FunctionSymbol>,
    equations: Vec<Equation>,
    roles: Vec<Role>,
    exchange: Vec<MessageStep>,
    goals: Vec<SecurityGoal>,
}

impl ProtocolSpec {
    pub fn builder(name: impl Into<String>) -> ProtocolSpecBuilder {
        ProtocolSpecBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn into_builder(self) -> ProtocolSpecBuilder {
        ProtocolSpecBuilder {
            name: self.name,
            bundles: self.bundles,
            functions: self.functions,
            equations: self.equations,
            roles: self.roles,
            exchange: self.exchange,
            goals: self.goals,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bundles(&self) -> &BundleSet {
        &self.bundles
    }

    /// User-declared function symbols.
    pub fn functions(&self) -> &[FunctionSymbol] {
        &self.functions
    }

    /// User-declared equations.
    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn exchange(&self) -> &[MessageStep] {
        &self.exchange
    }

    pub fn goals(&self) -> &[SecurityGoal] {
        &self.goals
    }

    pub fn role(&self, name: &str) -> Option<&Role> {
        self.roles.iter().find(|r| r.name == name)
    }

    pub fn signature(&self) -> BTreeMap<String, FunctionSymbol> {
        signature_of(&self.bundles, &self.functions)
    }

    /// Bundle equations followed by user equations.
    pub fn all_equations(&self) -> Vec<Equation> {
        self.bundles
            .iter()
            .flat_map(|b| b.equations())
            .chain(self.equations.iter().cloned())
            .collect()
    }

    /// The role generating `v` as a fresh value or holding it as an
    /// asymmetric key.
    pub fn owner_of(&self, v: &Var) -> Option<&Role> {
        self.roles.iter().find(|r| r.owns(v))
    }

    /// Every term occurring in knowledge declarations, payloads and goals.
    pub fn all_terms(&self) -> Vec<&Term> {
        let mut out: Vec<&Term> = self
            .roles
            .iter()
            .flat_map(|r| r.initial_knowledge.iter())
            .collect();
        out.extend(self.exchange.iter().map(|s| &s.payload));
        for g in &self.goals {
            match g {
                SecurityGoal::Secrecy { term, .. } => out.push(term),
                SecurityGoal::Agreement { terms, .. } => out.extend(terms),
            }
        }
        out
    }

    /// Public constants and public variables of the specification plus the
    /// identities of all roles and the bundles' constants, in first
    /// occurrence order.
    pub fn public_terms(&self) -> Vec<Term> {
        let mut out: Vec<Term> = Vec::new();
        let mut push = |t: Term| {
            if !out.contains(&t) {
                out.push(t);
            }
        };
        for r in &self.roles {
            push(Term::Var(r.identity()));
        }
        for b in &self.bundles {
            for c in b.constants() {
                push(c);
            }
        }
        for t in self.all_terms() {
            t.visit(&mut |s| {
                if s.is_atom() && s.sort() == Sort::Public {
                    push(s.clone());
                }
            });
        }
        out
    }
}

fn signature_of(
    bundles: &BundleSet,
    functions: &[FunctionSymbol],
) -> BTreeMap<String, FunctionSymbol> {
    let mut sig = BTreeMap::new();
    for b in bundles {
        for s in b.symbols() {
            sig.insert(s.name().to_owned(), s);
        }
    }
    for f in functions {
        sig.entry(f.name().to_owned()).or_insert_with(|| f.clone());
    }
    sig
}

#[derive(Debug, Clone, Default)]
pub struct ProtocolSpecBuilder {
    name: String,
    bundles: BundleSet,
    functions: Vec<FunctionSymbol>,
    equations: Vec<Equation>,
    roles: Vec<Role>,
    exchange: Vec<MessageStep>,
    goals: Vec<SecurityGoal>,
}

impl ProtocolSpecBuilder {
    pub fn bundle(mut self, b: Bundle) -> Self {
        self.bundles.insert(b);
        self
    }

    pub fn function(mut self, f: FunctionSymbol) -> Self {
        self.functions.push(f);
        self
    }

    pub fn equation(mut self, e: Equation) -> Self {
        self.equations.push(e);
        self
    }

    pub fn role(mut self, r: Role) -> Self {
        self.roles.push(r);
        self
    }

    pub fn message(mut self, m: MessageStep) -> Self {
        self.exchange.push(m);
        self
    }

    /// Appends a message with the next index.
    pub fn send(self, from: &str, to: &str, payload: Term) -> Self {
        let index = self.exchange.len() + 1;
        self.message(MessageStep::new(index, from, to, payload))
    }

    pub fn goal(mut self, g: SecurityGoal) -> Self {
        self.goals.push(g);
        self
    }

    pub fn exchange_mut(&mut self) -> &mut Vec<MessageStep> {
        &mut self.exchange
    }

    pub fn roles_mut(&mut self) -> &mut Vec<Role> {
        &mut self.roles
    }

    pub fn goals_mut(&mut self) -> &mut Vec<SecurityGoal> {
        &mut self.goals
    }

    pub fn build(self) -> Result<ProtocolSpec, Vec<Violation>> {
        let violations = Validator::new(&self).run();
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(ProtocolSpec {
            name: self.name,
            bundles: self.bundles,
            functions: self.functions,
            equations: self.equations,
            roles: self.roles,
            exchange: self.exchange,
            goals: self.goals,
        })
    }
}

struct Validator<'a> {
    b: &'a ProtocolSpecBuilder,
    sig: BTreeMap<String, FunctionSymbol>,
    out: Vec<Violation>,
    sorts: BTreeMap<String, Sort>,
}

impl<'a> Validator<'a> {
    fn new(b: &'a ProtocolSpecBuilder) -> Self {
        Validator {
            b,
            sig: signature_of(&b.bundles, &b.functions),
            out: Vec::new(),
            sorts: BTreeMap::new(),
        }
    }

    fn push(&mut self, v: Violation) {
        self.out.push(v);
    }

    fn run(mut self) -> Vec<Violation> {
        let b = self.b;
        if !is_identifier(&b.name) {
            self.push(Violation::new(
                Code::BadValue,
                Site::Protocol,
                format!("protocol name `{}` is not a valid identifier", b.name),
            ));
        }
        self.check_functions();
        for (i, e) in b.equations.iter().enumerate() {
            for t in [e.lhs(), e.rhs()] {
                self.check_symbols(t, Site::Equation(i), None);
            }
        }
        self.check_roles();
        self.check_exchange();
        self.check_goals();
        self.out
    }

    fn check_functions(&mut self) {
        let bundle_names: BTreeSet<String> = self
            .b
            .bundles
            .iter()
            .flat_map(|b| b.symbols())
            .map(|s| s.name().to_owned())
            .collect();
        let mut seen = BTreeSet::new();
        for (i, f) in self.b.functions.iter().enumerate() {
            if bundle_names.contains(f.name()) {
                self.push(Violation::new(
                    Code::DuplicateFunction,
                    Site::Function(i),
                    format!("function `{}` is already provided by a bundle", f.name()),
                ));
            } else if !seen.insert(f.name()) {
                self.push(Violation::new(
                    Code::DuplicateFunction,
                    Site::Function(i),
                    format!("function `{}` is declared twice", f.name()),
                ));
            }
        }
    }

    fn check_roles(&mut self) {
        let b = self.b;
        if b.roles.is_empty() {
            self.push(Violation::new(
                Code::Cardinality,
                Site::Protocol,
                "a protocol needs at least one role",
            ));
        }
        let mut names = BTreeSet::new();
        // name -> (role position, kind) for fresh values and long-term keys
        let mut secrets: BTreeMap<&str, (usize, Option<KeyKind>)> = BTreeMap::new();
        for (ri, role) in b.roles.iter().enumerate() {
            if !is_identifier(&role.name) {
                self.push(Violation::new(
                    Code::BadValue,
                    Site::Role(ri),
                    format!("role name `{}` is not a valid identifier", role.name),
                ));
            }
            if !names.insert(role.name.as_str()) {
                self.push(Violation::new(
                    Code::DuplicateRole,
                    Site::Role(ri),
                    format!("role `{}` is declared twice", role.name),
                ));
            }
            let mut local = BTreeSet::new();
            for (fi, v) in role.fresh_values.iter().enumerate() {
                let site = Site::Fresh(ri, fi);
                self.check_var(v, site, None);
                if v.sort != Sort::Fresh {
                    self.push(Violation::new(
                        Code::BadSort,
                        site,
                        format!("fresh value `{}` must have sort fresh", v.name),
                    ));
                }
                if !local.insert(v.name.as_str()) {
                    self.push(Violation::new(
                        Code::DuplicateFresh,
                        site,
                        format!("`{}` is declared twice in role `{}`", v.name, role.name),
                    ));
                    continue;
                }
                self.claim_secret(&mut secrets, &v.name, ri, None, site);
            }
            let mut asymmetric = 0;
            for (ki, k) in role.long_term_keys.iter().enumerate() {
                let site = Site::Ltk(ri, ki);
                self.check_var(&k.var, site, None);
                if k.var.sort != Sort::Fresh {
                    self.push(Violation::new(
                        Code::BadSort,
                        site,
                        format!("long-term key `{}` must have sort fresh", k.var.name),
                    ));
                }
                if k.kind == KeyKind::AsymmetricPrivate {
                    asymmetric += 1;
                    if asymmetric > 1 {
                        self.push(Violation::new(
                            Code::Cardinality,
                            site,
                            format!("role `{}` declares more than one asymmetric key", role.name),
                        ));
                    }
                    if !self.sig.contains_key("pk") {
                        self.push(Violation::new(
                            Code::UndeclaredFunction,
                            site,
                            "asymmetric keys need `pk`: enable asymmetric-encryption or signing",
                        ));
                    }
                }
                if !local.insert(k.var.name.as_str()) {
                    self.push(Violation::new(
                        Code::DuplicateFresh,
                        site,
                        format!("`{}` is declared twice in role `{}`", k.var.name, role.name),
                    ));
                    continue;
                }
                self.claim_secret(&mut secrets, &k.var.name, ri, Some(k.kind), site);
            }
            for (ti, t) in role.initial_knowledge.iter().enumerate() {
                let site = Site::Knows(ri, ti);
                self.check_term(t, site, None);
                for v in t.vars() {
                    if v.sort != Sort::Fresh {
                        continue;
                    }
                    if role.fresh_values.contains(&v) {
                        self.push(Violation::new(
                            Code::DuplicateFresh,
                            site,
                            format!("`{}` is both a fresh value and initial knowledge", v.name),
                        ));
                    } else if !role.long_term_keys.iter().any(|k| k.var == v) {
                        self.push(Violation::new(
                            Code::ForeignFresh,
                            site,
                            format!(
                                "initial knowledge of `{}` mentions fresh value `{}` it does not own",
                                role.name, v.name
                            ),
                        ));
                    }
                }
            }
        }
    }

    fn claim_secret<'n>(
        &mut self,
        secrets: &mut BTreeMap<&'n str, (usize, Option<KeyKind>)>,
        name: &'n str,
        role: usize,
        kind: Option<KeyKind>,
        site: Site,
    ) {
        match secrets.get(name) {
            None => {
                secrets.insert(name, (role, kind));
            }
            Some((_, Some(KeyKind::Symmetric))) if kind == Some(KeyKind::Symmetric) => {}
            Some((other, _)) => {
                let step = self.first_step_mentioning(name);
                let other = &self.b.roles[*other].name;
                self.push(
                    Violation::new(
                        Code::DuplicateFresh,
                        site,
                        format!(
                            "`{name}` is already generated by role `{other}`; fresh values must be unique"
                        ),
                    )
                    .step(step),
                );
            }
        }
    }

    fn first_step_mentioning(&self, name: &str) -> Option<usize> {
        self.b
            .exchange
            .iter()
            .find(|s| s.payload.vars().iter().any(|v| v.name == name))
            .map(|s| s.index)
    }

    fn check_exchange(&mut self) {
        let b = self.b;
        let roles: BTreeSet<&str> = b.roles.iter().map(|r| r.name.as_str()).collect();
        for (pos, step) in b.exchange.iter().enumerate() {
            let site = Site::Step(pos);
            let idx = Some(step.index);
            if step.index != pos + 1 {
                self.push(
                    Violation::new(
                        Code::StepIndex,
                        site,
                        format!("message index {} should be {}", step.index, pos + 1),
                    )
                    .step(idx),
                );
            }
            for r in [&step.from, &step.to] {
                if !roles.contains(r.as_str()) {
                    self.push(
                        Violation::new(
                            Code::UndeclaredRole,
                            site,
                            format!("role `{r}` is not declared"),
                        )
                        .step(idx),
                    );
                }
            }
            if step.from == step.to {
                self.push(
                    Violation::new(
                        Code::SelfMessage,
                        site,
                        format!("role `{}` sends a message to itself", step.from),
                    )
                    .step(idx),
                );
            }
            self.check_term(&step.payload, site, idx);
        }
    }

    fn check_goals(&mut self) {
        let b = self.b;
        let roles: BTreeSet<&str> = b.roles.iter().map(|r| r.name.as_str()).collect();
        for (gi, goal) in b.goals.iter().enumerate() {
            let site = Site::Goal(gi);
            let (named, terms): (Vec<&String>, Vec<&Term>) = match goal {
                SecurityGoal::Secrecy { term, viewpoint } => (vec![viewpoint], vec![term]),
                SecurityGoal::Agreement {
                    claimer,
                    peer,
                    terms,
                } => {
                    if claimer == peer {
                        self.push(Violation::new(
                            Code::BadValue,
                            site,
                            format!("agreement of `{claimer}` with itself"),
                        ));
                    }
                    if terms.is_empty() {
                        self.push(Violation::new(
                            Code::Cardinality,
                            site,
                            "an agreement goal needs at least one term",
                        ));
                    }
                    (vec![claimer, peer], terms.iter().collect())
                }
            };
            for r in named {
                if !roles.contains(r.as_str()) {
                    self.push(Violation::new(
                        Code::UndeclaredRole,
                        site,
                        format!("role `{r}` is not declared"),
                    ));
                }
            }
            for t in terms {
                self.check_term(t, site, None);
            }
        }
    }

    fn check_var(&mut self, v: &Var, site: Site, step: Option<usize>) {
        if !is_identifier(&v.name) {
            self.push(
                Violation::new(
                    Code::BadValue,
                    site,
                    format!("`{}` is not a valid identifier", v.name),
                )
                .step(step),
            );
        }
        match self.sorts.get(&v.name) {
            None => {
                self.sorts.insert(v.name.clone(), v.sort);
            }
            Some(&s) if s != v.sort => {
                self.push(
                    Violation::new(
                        Code::SortConflict,
                        site,
                        format!(
                            "variable `{}` is used with sort {} and sort {}",
                            v.name,
                            sort_name(s),
                            sort_name(v.sort)
                        ),
                    )
                    .step(step),
                );
            }
            Some(_) => {}
        }
    }

    fn check_term(&mut self, t: &Term, site: Site, step: Option<usize>) {
        self.check_symbols(t, site, step);
        let mut atoms = Vec::new();
        t.visit(&mut |s| {
            if s.is_atom() {
                atoms.push(s.clone());
            }
        });
        for a in atoms {
            match a {
                Term::Var(v) => self.check_var(&v, site, step),
                Term::Const(c) => {
                    if !is_identifier(&c.name) {
                        self.push(
                            Violation::new(
                                Code::BadValue,
                                site,
                                format!("`{}` is not a valid identifier", c.name),
                            )
                            .step(step),
                        );
                    }
                    if c.sort == Sort::Fresh {
                        self.push(
                            Violation::new(
                                Code::BadSort,
                                site,
                                format!("constant `{}` cannot have sort fresh", c.name),
                            )
                            .step(step),
                        );
                    }
                }
                _ => {}
            }
        }
    }

    fn check_symbols(&mut self, t: &Term, site: Site, step: Option<usize>) {
        let mut bad = Vec::new();
        t.visit(&mut |s| {
            if let Term::Apply(app) = s {
                let f = app.symbol();
                match self.sig.get(f.name()) {
                    None => bad.push((
                        Code::UndeclaredFunction,
                        format!("function `{}` is not declared", f.name()),
                    )),
                    Some(d) if d.arity() != f.arity() => bad.push((
                        Code::Arity,
                        format!(
                            "`{}` expects {} argument(s), found {}",
                            f.name(),
                            d.arity(),
                            f.arity()
                        ),
                    )),
                    Some(d) if d != f => bad.push((
                        Code::UndeclaredFunction,
                        format!("function `{}` is used with a different visibility", f.name()),
                    )),
                    Some(_) => {}
                }
            }
        });
        for (code, msg) in bad {
            self.push(Violation::new(code, site, msg).step(step));
        }
    }
}

pub(crate) fn sort_name(s: Sort) -> &'static str {
    match s {
        Sort::Message => "msg",
        Sort::Fresh => "fresh",
        Sort::Public => "pub",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::term::Visibility;

    fn senc(m: Term, k: Term) -> Term {
        let f = Bundle::SymmetricEncryption.symbols()[0].clone();
        Term::apply(&f, vec![m, k]).unwrap()
    }

    fn base() -> ProtocolSpecBuilder {
        ProtocolSpec::builder("P")
            .bundle(Bundle::SymmetricEncryption)
            .role(Role::new("A").fresh("na").ltk("k", KeyKind::Symmetric))
            .role(Role::new("B").ltk("k", KeyKind::Symmetric))
    }

    fn codes(b: ProtocolSpecBuilder) -> Vec<Code> {
        b.build().unwrap_err().into_iter().map(|v| v.code).collect()
    }

    #[test]
    fn valid_spec_builds() {
        let spec = base()
            .send("A", "B", senc(Term::fresh("na"), Term::fresh("k")))
            .build()
            .unwrap();
        assert_eq!(spec.roles().len(), 2);
        assert_eq!(spec.exchange()[0].index, 1);
        assert_eq!(spec.owner_of(&Var::new("na", Sort::Fresh)).unwrap().name, "A");
    }

    #[test]
    fn minimal_spec() {
        let spec = ProtocolSpec::builder("M").role(Role::new("A")).build().unwrap();
        assert_eq!(spec.roles().len(), 1);
        assert!(spec.exchange().is_empty());
        assert!(spec.goals().is_empty());
    }

    #[test]
    fn rejects_missing_roles_and_bad_name() {
        assert_eq!(
            codes(ProtocolSpec::builder("")),
            vec![Code::BadValue, Code::Cardinality]
        );
    }

    #[test]
    fn duplicate_role_points_at_second() {
        let errs = base().role(Role::new("A")).build().unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].code, Code::DuplicateRole);
        assert_eq!(errs[0].site, Site::Role(2));
    }

    #[test]
    fn undeclared_role_in_step() {
        let errs = base().send("A", "C", Term::fresh("na")).build().unwrap_err();
        assert_eq!(errs[0].code, Code::UndeclaredRole);
        assert!(errs[0].message.contains("`C`"));
        assert_eq!(errs[0].step, Some(1));
    }

    #[test]
    fn step_rules() {
        let mut b = base().send("A", "A", Term::fresh("na"));
        b.exchange_mut()[0].index = 2;
        assert_eq!(codes(b), vec![Code::StepIndex, Code::SelfMessage]);
    }

    #[test]
    fn fresh_rules() {
        // reuse across roles, reported at the later declaration with the
        // first step mentioning it
        let errs = base()
            .role(Role::new("C").fresh("na"))
            .send("A", "B", Term::fresh("na"))
            .build()
            .unwrap_err();
        assert_eq!(errs[0].code, Code::DuplicateFresh);
        assert_eq!(errs[0].site, Site::Fresh(2, 0));
        assert_eq!(errs[0].step, Some(1));

        assert_eq!(
            codes(base().role(Role::new("C").fresh("x").fresh("x"))),
            vec![Code::DuplicateFresh]
        );
        assert_eq!(
            codes(base().role(Role::new("C").fresh("x").knows(Term::fresh("x")))),
            vec![Code::DuplicateFresh]
        );
        assert_eq!(
            codes(base().role(Role::new("C").knows(Term::fresh("na")))),
            vec![Code::ForeignFresh]
        );
        // a shared symmetric key clashing with an asymmetric one
        assert_eq!(
            codes(
                base()
                    .bundle(Bundle::AsymmetricEncryption)
                    .role(Role::new("C").ltk("k", KeyKind::AsymmetricPrivate))
            ),
            vec![Code::DuplicateFresh]
        );
    }

    #[test]
    fn asymmetric_key_rules() {
        assert_eq!(
            codes(base().role(Role::new("C").ltk("skC", KeyKind::AsymmetricPrivate))),
            vec![Code::UndeclaredFunction]
        );
        assert_eq!(
            codes(
                base().bundle(Bundle::AsymmetricEncryption).role(
                    Role::new("C")
                        .ltk("s1", KeyKind::AsymmetricPrivate)
                        .ltk("s2", KeyKind::AsymmetricPrivate)
                )
            ),
            vec![Code::Cardinality]
        );
    }

    #[test]
    fn sort_rules() {
        assert_eq!(
            codes(base().send("A", "B", Term::msg("na"))),
            vec![Code::SortConflict]
        );
        assert_eq!(
            codes(base().send("A", "B", Term::constant("c", Sort::Fresh))),
            vec![Code::BadSort]
        );
    }

    #[test]
    fn function_rules() {
        let f = FunctionSymbol::new("senc", 2, Visibility::Public).unwrap();
        assert_eq!(codes(base().function(f)), vec![Code::DuplicateFunction]);
        let h = FunctionSymbol::new("h", 1, Visibility::Public).unwrap();
        assert_eq!(
            codes(base().function(h.clone()).function(h.clone())),
            vec![Code::DuplicateFunction]
        );
        let h2 = FunctionSymbol::new("h", 2, Visibility::Public).unwrap();
        let bad = Term::apply(&h2, vec![Term::msg("a"), Term::msg("b")]).unwrap();
        assert_eq!(codes(base().function(h).send("A", "B", bad)), vec![Code::Arity]);
        let q = FunctionSymbol::new("q", 1, Visibility::Public).unwrap();
        let t = Term::apply(&q, vec![Term::msg("a")]).unwrap();
        assert_eq!(
            codes(base().send("A", "B", t)),
            vec![Code::UndeclaredFunction]
        );
    }

    #[test]
    fn goal_rules() {
        let g = SecurityGoal::Agreement {
            claimer: "A".into(),
            peer: "A".into(),
            terms: vec![],
        };
        assert_eq!(codes(base().goal(g)), vec![Code::BadValue, Code::Cardinality]);
        let g = SecurityGoal::Secrecy {
            term: Term::fresh("na"),
            viewpoint: "Z".into(),
        };
        assert_eq!(codes(base().goal(g)), vec![Code::UndeclaredRole]);
    }

    #[test]
    fn public_terms_collects_identities_and_constants() {
        let spec = ProtocolSpec::builder("D")
            .bundle(Bundle::DiffieHellman)
            .role(Role::new("A").knows(Term::constant("c", Sort::Public)))
            .build()
            .unwrap();
        let names: Vec<String> = spec.public_terms().iter().map(|t| t.to_string()).collect();
        assert_eq!(names, vec!["$A", "'g'", "'c'"]);
    }
}
