use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::ast::{Fact, Lemma, LemmaKind, Restriction, TTerm, TamarinRule, TamarinTheory, VarSort};
use super::names::Names;
use crate::analysis::{check_executability, check_goals, derivable, trace, Context, KnowledgeState};
use crate::diagnostic::{has_errors, Code, Diagnostic};
use crate::model::{
    exp_chain, match_term, substitute_unchecked, Bundle, Delivery, Equation, KeyKind, Orientation,
    ProtocolSpec, Role, SecurityGoal, Sort, Substitution, Term, Var, Visibility,
};

/// A compiled theory and the warnings raised on the way.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub theory: TamarinTheory,
    pub warnings: Vec<Diagnostic>,
}

pub fn builtin_name(b: Bundle) -> Option<&'static str> {
    match b {
        Bundle::SymmetricEncryption => Some("symmetric-encryption"),
        Bundle::AsymmetricEncryption => Some("asymmetric-encryption"),
        Bundle::Signing => Some("signing"),
        Bundle::Hashing => Some("hashing"),
        Bundle::DiffieHellman => Some("diffie-hellman"),
        Bundle::Pairing => None,
    }
}

/// Compiles an executable specification. Specifications with executability
/// or goal errors, or with constructs the target cannot express, are
/// rejected with diagnostics.
pub fn compile_tamarin(spec: &ProtocolSpec) -> Result<Compiled, Vec<Diagnostic>> {
    let report = check_executability(spec);
    let mut errors: Vec<Diagnostic> = report.violations.iter().map(|v| v.to_diagnostic()).collect();
    errors.extend(check_goals(spec, &report));
    if has_errors(&errors) {
        return Err(errors);
    }
    Compiler::new(spec).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Pos {
    Init,
    Send(usize),
    Recv(usize),
}

#[derive(Debug, Clone)]
enum Label {
    Finish,
    Secret(usize, Term),
    /// Goal number, claimer, terms.
    Running(usize, String, Vec<Term>),
    /// Goal number, peer, terms.
    Commit(usize, String, Vec<Term>),
}

fn last_pos(spec: &ProtocolSpec, role: &str) -> Pos {
    spec.exchange()
        .iter()
        .rev()
        .find(|s| s.involves(role))
        .map(|s| if s.from == role { Pos::Send(s.index) } else { Pos::Recv(s.index) })
        .unwrap_or(Pos::Init)
}

fn step_of(p: Pos) -> usize {
    match p {
        Pos::Init => 0,
        Pos::Send(i) | Pos::Recv(i) => i,
    }
}

fn plan_labels(spec: &ProtocolSpec) -> BTreeMap<(String, Pos), Vec<Label>> {
    let states = trace(spec).states;
    let ctx = Context::for_spec(spec);
    let mut plan: BTreeMap<(String, Pos), Vec<Label>> = BTreeMap::new();
    let (mut secrecy, mut agreement) = (0, 0);
    for g in spec.goals() {
        match g {
            SecurityGoal::Secrecy { term, viewpoint } => {
                secrecy += 1;
                let key = (viewpoint.clone(), last_pos(spec, viewpoint));
                plan.entry(key).or_default().push(Label::Secret(secrecy, term.clone()));
            }
            SecurityGoal::Agreement {
                claimer,
                peer,
                terms,
            } => {
                agreement += 1;
                let commit = spec
                    .exchange()
                    .iter()
                    .rev()
                    .find(|s| &s.to == claimer)
                    .map(|s| Pos::Recv(s.index))
                    .unwrap_or_else(|| last_pos(spec, claimer));
                let running = running_pos(spec, &states, &ctx, peer, step_of(commit), terms);
                plan.entry((peer.clone(), running))
                    .or_default()
                    .push(Label::Running(agreement, claimer.clone(), terms.clone()));
                plan.entry((claimer.clone(), commit))
                    .or_default()
                    .push(Label::Commit(agreement, peer.clone(), terms.clone()));
            }
        }
    }
    for r in spec.roles() {
        plan.entry((r.name.clone(), last_pos(spec, &r.name)))
            .or_default()
            .push(Label::Finish);
    }
    plan
}

/// The peer's latest rule up to the claimer's commit step whose knowledge
/// covers the agreed terms: sends of that step or earlier first, then
/// earlier receives, then the init rule. Falls back to the peer's last rule.
fn running_pos(
    spec: &ProtocolSpec,
    states: &BTreeMap<String, Vec<KnowledgeState>>,
    ctx: &Context,
    peer: &str,
    commit: usize,
    terms: &[Term],
) -> Pos {
    let history = &states[peer];
    let knows_at = |k: usize| terms.iter().all(|t| derivable(&history[k].known, t, ctx));
    let sends = spec
        .exchange()
        .iter()
        .rev()
        .filter(|s| s.index <= commit && s.from == peer)
        .map(|s| (Pos::Send(s.index), s.index - 1));
    let recvs = spec
        .exchange()
        .iter()
        .rev()
        .filter(|s| s.index < commit && s.to == peer)
        .map(|s| (Pos::Recv(s.index), s.index));
    sends
        .chain(recvs)
        .chain([(Pos::Init, 0)])
        .find(|(_, k)| knows_at(*k))
        .map(|(p, _)| p)
        .unwrap_or_else(|| last_pos(spec, peer))
}

fn slug(t: &Term) -> String {
    let mut out = String::new();
    for c in t.to_string().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    let out = out.trim_end_matches('_').to_owned();
    if out.is_empty() {
        "term".to_owned()
    } else {
        out
    }
}

/// Lemmas for a specification: executability when messages are exchanged,
/// then one lemma per goal in declaration order.
pub fn gen_lemmas(spec: &ProtocolSpec) -> Vec<Lemma> {
    let mut out = Vec::new();
    let mut used = BTreeSet::new();
    let mut unique = |base: String| {
        let mut name = base.clone();
        let mut i = 2;
        while !used.insert(name.clone()) {
            name = format!("{base}_{i}");
            i += 1;
        }
        name
    };
    if !spec.exchange().is_empty() {
        let roles = spec.roles();
        let times: Vec<String> = (1..=roles.len()).map(|i| format!("#i{i}")).collect();
        let facts: Vec<String> = roles
            .iter()
            .enumerate()
            .map(|(i, r)| format!("Finish_{}()@i{}", r.name, i + 1))
            .collect();
        out.push(Lemma {
            name: unique("executable".into()),
            kind: LemmaKind::ExistsTrace,
            formula: format!("Ex {}. {}", times.join(" "), facts.join(" & ")),
        });
    }
    let (mut secrecy, mut agreement) = (0, 0);
    for g in spec.goals() {
        match g {
            SecurityGoal::Secrecy { term, viewpoint } => {
                secrecy += 1;
                out.push(Lemma {
                    name: unique(format!("secrecy_{}_{}", slug(term), viewpoint)),
                    kind: LemmaKind::AllTraces,
                    formula: format!(
                        "All x #i. Secret_{secrecy}(x)@i ==> not (Ex #j. K(x)@j)"
                    ),
                });
            }
            SecurityGoal::Agreement { claimer, peer, .. } => {
                agreement += 1;
                let commit = format!("Commit_{claimer}_{agreement}");
                let running = format!("Running_{peer}_{agreement}");
                out.push(Lemma {
                    name: unique(format!("agreement_{claimer}_{peer}")),
                    kind: LemmaKind::AllTraces,
                    formula: format!(
                        "All a b t #i. {commit}(a, b, t)@i ==> (Ex #j. {running}(b, a, t)@j & j < i) & not (Ex a2 b2 #i2. {commit}(a2, b2, t)@i2 & not (#i2 = #i))"
                    ),
                });
            }
        }
    }
    out
}

/// Per-role compilation state: what the role can refer to and the variables
/// carried in its state facts.
#[derive(Debug, Clone)]
struct Thread {
    env: BTreeMap<Term, TTerm>,
    bound: Vec<TTerm>,
    tid: TTerm,
    st: usize,
}

impl Thread {
    fn bind(&mut self, t: Term, r: TTerm) {
        for (name, sort) in r.vars() {
            let v = TTerm::var(name, sort);
            if v != self.tid && !self.bound.contains(&v) {
                self.bound.push(v);
            }
        }
        self.env.insert(t, r);
    }

    fn state(&self, role: &str) -> Fact {
        let mut args = vec![self.tid.clone()];
        args.extend(self.bound.iter().cloned());
        Fact::new(format!("St_{role}_{}", self.st), args)
    }
}

#[derive(Debug, Clone, Default)]
struct Draft {
    premises: Vec<Fact>,
    actions: Vec<Fact>,
    conclusions: Vec<Fact>,
}

fn attempt<T>(
    th: &mut Thread,
    d: &mut Draft,
    f: impl FnOnce(&mut Thread, &mut Draft) -> Option<T>,
) -> Option<T> {
    let saved = (th.clone(), d.clone());
    let r = f(th, d);
    if r.is_none() {
        *th = saved.0;
        *d = saved.1;
    }
    r
}

fn eq_fact(a: TTerm, b: TTerm) -> Fact {
    Fact::new("Eq", vec![a, b])
}

fn tuple_or_single(mut items: Vec<TTerm>) -> TTerm {
    if items.len() == 1 {
        items.remove(0)
    } else {
        TTerm::Tuple(items)
    }
}

/// Destructor equation, main argument position and its matching binding.
type Match<'e> = (&'e Equation, usize, Substitution);

struct Compiler<'s> {
    spec: &'s ProtocolSpec,
    ctx: Context,
    names: Names,
    destructors: Vec<(Equation, usize)>,
    reducible: BTreeSet<String>,
    pk_vars: BTreeMap<String, String>,
    tids: BTreeMap<String, String>,
}

impl<'s> Compiler<'s> {
    fn new(spec: &'s ProtocolSpec) -> Self {
        let mut names = Names::for_spec(spec);
        let all = spec.all_equations();
        let reducible = all
            .iter()
            .filter(|e| e.orientation() == Orientation::Destructor)
            .filter_map(|e| match e.lhs() {
                Term::Apply(app) => Some(app.symbol().name().to_owned()),
                _ => None,
            })
            .collect();
        let destructors = all
            .into_iter()
            .filter(|e| e.orientation() == Orientation::Destructor)
            .filter(|e| matches!(e.lhs(), Term::Apply(app) if app.symbol().is_public()))
            .filter_map(|e| e.main_argument().map(|i| (e, i)))
            .collect();
        let mut tids = BTreeMap::new();
        let mut pk_vars = BTreeMap::new();
        for r in spec.roles() {
            tids.insert(r.name.clone(), names.claim(&format!("tid{}", r.name)));
        }
        for r in spec.roles() {
            if r.asymmetric_key().is_some() {
                pk_vars.insert(r.name.clone(), names.claim(&format!("pk{}", r.name)));
            }
        }
        Compiler {
            spec,
            ctx: Context::for_spec(spec),
            names,
            destructors,
            reducible,
            pk_vars,
            tids,
        }
    }

    fn run(mut self) -> Result<Compiled, Vec<Diagnostic>> {
        let spec = self.spec;
        let mut theory = TamarinTheory::new(spec.name());
        let mut warnings = Vec::new();
        let mut errors = Vec::new();

        theory.builtins = spec
            .bundles()
            .iter()
            .filter_map(|b| builtin_name(*b))
            .map(str::to_owned)
            .collect();
        let builtin: BTreeSet<String> = spec
            .bundles()
            .iter()
            .flat_map(|b| b.symbols())
            .map(|s| s.name().to_owned())
            .collect();
        for f in spec.functions() {
            if builtin.contains(f.name()) {
                continue;
            }
            let private = if f.visibility() == Visibility::Private { " [private]" } else { "" };
            theory
                .functions
                .push(format!("{}/{}{private}", self.names.fun_name(f.name()), f.arity()));
        }
        for e in spec.equations() {
            if e.orientation() == Orientation::Unoriented {
                errors.push(Diagnostic::error(
                    Code::Unsupported,
                    format!(
                        "unoriented equation `{} = {}` has no Tamarin counterpart; declare it as a destructor",
                        e.lhs(),
                        e.rhs()
                    ),
                ));
                continue;
            }
            theory
                .equations
                .push(format!("{} = {}", self.plain(e.lhs()), self.plain(e.rhs())));
        }
        let mut msg_consts = BTreeSet::new();
        for t in spec.all_terms() {
            t.visit(&mut |s| {
                if let Term::Const(c) = s {
                    if c.sort == Sort::Message && msg_consts.insert(c.name.clone()) {
                        warnings.push(Diagnostic::warning(
                            Code::PrivateConstRendered,
                            format!(
                                "message constant `{}` is rendered as the public constant '{}'",
                                c.name, c.name
                            ),
                        ));
                    }
                }
            });
        }
        if !errors.is_empty() {
            return Err(errors);
        }

        for r in spec.roles() {
            if let Some(sk) = r.asymmetric_key() {
                theory.rules.push(self.register_rule(r, sk));
            }
        }

        let plan = plan_labels(spec);
        let labels_at = |role: &str, pos: Pos| -> &[Label] {
            plan.get(&(role.to_owned(), pos)).map(Vec::as_slice).unwrap_or(&[])
        };
        let last: BTreeMap<&str, Pos> =
            spec.roles().iter().map(|r| (r.name.as_str(), last_pos(spec, &r.name))).collect();

        let setup = self.setup_values();
        let mut threads: BTreeMap<String, Thread> = BTreeMap::new();
        for r in spec.roles() {
            let (rule, th) = self.init_rule(r, &setup, labels_at(&r.name, Pos::Init), last[r.name.as_str()] == Pos::Init);
            match rule {
                Ok(rule) => theory.rules.push(rule),
                Err(d) => errors.push(d),
            }
            threads.insert(r.name.clone(), th);
        }

        for step in spec.exchange() {
            for (pos, role_name) in [(Pos::Send(step.index), &step.from), (Pos::Recv(step.index), &step.to)] {
                let role = spec.role(role_name).expect("validated role");
                let th = threads.get_mut(role_name).expect("thread per role");
                let is_last = last[role_name.as_str()] == pos;
                let rule = match pos {
                    Pos::Send(_) => self.send_rule(role, th, step.index, &step.payload, labels_at(role_name, pos), is_last),
                    _ => self.recv_rule(role, th, step.index, &step.payload, step.delivery, labels_at(role_name, pos), is_last),
                };
                match rule {
                    Ok(rule) => theory.rules.push(rule),
                    Err(d) => errors.push(d.in_step(Some(step.index))),
                }
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }

        let uses_eq = theory
            .rules
            .iter()
            .any(|r| r.actions.iter().any(|f| f.name == "Eq"));
        if uses_eq {
            theory.restrictions.push(Restriction {
                name: "Equality".into(),
                formula: "All x y #i. Eq(x, y)@i ==> x = y".into(),
            });
        }
        theory.lemmas = gen_lemmas(spec);
        Ok(Compiled { theory, warnings })
    }

    /// Rendering of equation sides: variables keep their sort prefix.
    fn plain(&self, t: &Term) -> TTerm {
        match t {
            Term::Var(v) => TTerm::var(self.names.var_name(&v.name), var_sort(v.sort)),
            Term::Const(c) => TTerm::Const(c.name.clone()),
            Term::Tuple(tu) => TTerm::Tuple(tu.items().iter().map(|i| self.plain(i)).collect()),
            Term::Apply(app) => {
                let args: Vec<TTerm> = app.args().iter().map(|a| self.plain(a)).collect();
                self.apply(app.symbol().name(), args)
            }
        }
    }

    fn apply(&self, fun: &str, mut args: Vec<TTerm>) -> TTerm {
        if fun == "exp" && args.len() == 2 {
            let e = args.pop().expect("two args");
            let b = args.pop().expect("two args");
            return TTerm::Exp(Box::new(b), Box::new(e));
        }
        TTerm::app(self.names.fun_name(fun), args)
    }

    fn identity(&self, r: &Role) -> TTerm {
        TTerm::var(self.names.var_name(&r.name), VarSort::Public)
    }

    fn register_rule(&self, r: &Role, sk: &Var) -> TamarinRule {
        let id = self.identity(r);
        let k = TTerm::var(self.names.var_name(&sk.name), VarSort::Fresh);
        let pk = TTerm::app("pk", vec![k.clone()]);
        TamarinRule {
            name: format!("Register_pk_{}", r.name),
            premises: vec![Fact::new("Fr", vec![k.clone()])],
            actions: vec![],
            conclusions: vec![
                Fact::persistent("Ltk", vec![id.clone(), k]),
                Fact::persistent("Pk", vec![id, pk.clone()]),
                Fact::new("Out", vec![pk]),
            ],
        }
    }

    /// Secrets a role holds before the run other than its asymmetric key
    /// and fresh values: symmetric keys and non-public variables of its
    /// initial knowledge. Maps each to the roles holding it, in role order.
    fn setup_values(&self) -> BTreeMap<Var, Vec<String>> {
        let mut out: BTreeMap<Var, Vec<String>> = BTreeMap::new();
        for r in self.spec.roles() {
            for v in role_setup(r) {
                out.entry(v).or_default().push(r.name.clone());
            }
        }
        out
    }

    fn init_rule(
        &self,
        r: &Role,
        setup: &BTreeMap<Var, Vec<String>>,
        labels: &[Label],
        is_last: bool,
    ) -> (Result<TamarinRule, Diagnostic>, Thread) {
        let tid = TTerm::var(self.tids[&r.name].clone(), VarSort::Fresh);
        let mut th = Thread {
            env: BTreeMap::new(),
            bound: Vec::new(),
            tid: tid.clone(),
            st: 0,
        };
        let mut d = Draft::default();
        d.premises.push(Fact::new("Fr", vec![tid]));
        let id = self.identity(r);
        th.bind(Term::Var(r.identity()), id.clone());
        if let Some(sk) = r.asymmetric_key() {
            let k = TTerm::var(self.names.var_name(&sk.name), VarSort::Fresh);
            d.premises.push(Fact::persistent("Ltk", vec![id, k.clone()]));
            th.bind(Term::Var(sk.clone()), k);
        }
        let mut shared = Vec::new();
        for v in role_setup(r) {
            let name = self.names.var_name(&v.name);
            let k = TTerm::var(name.clone(), VarSort::Fresh);
            let holders = &setup[&v];
            let fact = Fact::persistent(format!("Shared_{name}"), vec![k.clone()]);
            if holders[0] == r.name {
                d.premises.push(Fact::new("Fr", vec![k.clone()]));
                if holders.len() > 1 {
                    shared.push(fact);
                }
            } else {
                d.premises.push(fact);
            }
            th.bind(Term::Var(v), k);
        }
        let rule = self.finish_rule(r, &mut th, d, labels, is_last, format!("Init_{}", r.name), shared);
        (rule, th)
    }

    fn send_rule(
        &self,
        r: &Role,
        th: &mut Thread,
        index: usize,
        payload: &Term,
        labels: &[Label],
        is_last: bool,
    ) -> Result<TamarinRule, Diagnostic> {
        let mut d = Draft::default();
        d.premises.push(th.state(&r.name));
        th.st += 1;
        let out = self.render(r, th, &mut d, payload).ok_or_else(|| {
            Diagnostic::error(
                Code::Unsupported,
                format!("{} cannot express `{payload}` from its state", r.name),
            )
        })?;
        let name = format!("{}_send_{index}", r.name);
        self.finish_rule(r, th, d, labels, is_last, name, vec![Fact::new("Out", vec![out])])
    }

    #[allow(clippy::too_many_arguments)]
    fn recv_rule(
        &mut self,
        r: &Role,
        th: &mut Thread,
        index: usize,
        payload: &Term,
        delivery: Delivery,
        labels: &[Label],
        is_last: bool,
    ) -> Result<TamarinRule, Diagnostic> {
        let mut d = Draft::default();
        let state = th.state(&r.name);
        th.st += 1;
        let input = match delivery {
            Delivery::Decompose => {
                let mut pending = Vec::new();
                let pat = self.pattern(r, th, &mut d, &mut pending, payload);
                for (eq, main, binding, sig) in pending {
                    self.add_check(r, th, &mut d, &eq, main, &binding, sig);
                }
                pat
            }
            Delivery::Atomic => {
                let m = TTerm::var(self.names.claim(&format!("m{index}")), VarSort::Msg);
                self.decompose(r, th, &mut d, payload, m.clone());
                m
            }
        };
        let mut premises = vec![state, Fact::new("In", vec![input])];
        premises.append(&mut d.premises);
        d.premises = premises;
        let name = format!("{}_recv_{index}", r.name);
        self.finish_rule(r, th, d, labels, is_last, name, vec![])
    }

    /// Adds labels and the successor state, then advances the thread.
    #[allow(clippy::too_many_arguments)]
    fn finish_rule(
        &self,
        r: &Role,
        th: &mut Thread,
        mut d: Draft,
        labels: &[Label],
        is_last: bool,
        name: String,
        mut conclusions: Vec<Fact>,
    ) -> Result<TamarinRule, Diagnostic> {
        for l in labels {
            let f = self.label(r, th, &mut d, l).ok_or_else(|| {
                Diagnostic::error(
                    Code::LabelUnbound,
                    format!("rule `{name}` cannot bind the terms of its goal label"),
                )
            })?;
            d.actions.push(f);
        }
        d.conclusions.append(&mut conclusions);
        if !is_last {
            d.conclusions.push(th.state(&r.name));
        }
        Ok(TamarinRule {
            name,
            premises: d.premises,
            actions: d.actions,
            conclusions: d.conclusions,
        })
    }

    fn label(&self, r: &Role, th: &mut Thread, d: &mut Draft, l: &Label) -> Option<Fact> {
        let id = |name: &str| {
            let role = self.spec.role(name).expect("validated role");
            self.identity(role)
        };
        match l {
            Label::Finish => Some(Fact::new(format!("Finish_{}", r.name), vec![])),
            Label::Secret(n, t) => {
                let t = self.render(r, th, d, t)?;
                Some(Fact::new(format!("Secret_{n}"), vec![t]))
            }
            Label::Running(n, claimer, terms) => {
                let ts = self.render_all(r, th, d, terms)?;
                Some(Fact::new(
                    format!("Running_{}_{n}", r.name),
                    vec![id(&r.name), id(claimer), tuple_or_single(ts)],
                ))
            }
            Label::Commit(n, peer, terms) => {
                let ts = self.render_all(r, th, d, terms)?;
                Some(Fact::new(
                    format!("Commit_{}_{n}", r.name),
                    vec![id(&r.name), id(peer), tuple_or_single(ts)],
                ))
            }
        }
    }

    fn render_all(&self, r: &Role, th: &mut Thread, d: &mut Draft, ts: &[Term]) -> Option<Vec<TTerm>> {
        attempt(th, d, |th, d| ts.iter().map(|t| self.render(r, th, d, t)).collect())
    }

    /// Expresses `t` from what the thread holds, adding `Fr` premises for
    /// fresh values at first use and `!Pk` premises for peer keys. Leaves
    /// the thread untouched on failure.
    fn render(&self, r: &Role, th: &mut Thread, d: &mut Draft, t: &Term) -> Option<TTerm> {
        attempt(th, d, |th, d| self.render_inner(r, th, d, t))
    }

    fn render_inner(&self, r: &Role, th: &mut Thread, d: &mut Draft, t: &Term) -> Option<TTerm> {
        let n = self.ctx.normalize(t);
        if let Some(e) = th.env.get(&n) {
            return Some(e.clone());
        }
        match &n {
            Term::Var(v) => {
                let out = match v.sort {
                    Sort::Public => TTerm::var(self.names.var_name(&v.name), VarSort::Public),
                    Sort::Fresh if r.fresh_values.contains(v) => {
                        let x = TTerm::var(self.names.var_name(&v.name), VarSort::Fresh);
                        d.premises.push(Fact::new("Fr", vec![x.clone()]));
                        x
                    }
                    _ => return None,
                };
                th.bind(n, out.clone());
                Some(out)
            }
            Term::Const(c) => Some(TTerm::Const(c.name.clone())),
            Term::Tuple(tu) => {
                let items = tu
                    .items()
                    .iter()
                    .map(|i| self.render_inner(r, th, d, i))
                    .collect::<Option<Vec<_>>>()?;
                Some(TTerm::Tuple(items))
            }
            Term::Apply(app) => {
                if let Some(owner) = self.peer_key_owner(r, &n) {
                    let id = self.identity(owner);
                    th.bind(Term::Var(owner.identity()), id.clone());
                    let pk = TTerm::var(self.pk_vars[&owner.name].clone(), VarSort::Msg);
                    d.premises.push(Fact::persistent("Pk", vec![id, pk.clone()]));
                    th.bind(n, pk.clone());
                    return Some(pk);
                }
                let structural = attempt(th, d, |th, d| {
                    let args = app
                        .args()
                        .iter()
                        .map(|a| self.render_inner(r, th, d, a))
                        .collect::<Option<Vec<_>>>()?;
                    Some(self.apply(app.symbol().name(), args))
                });
                if structural.is_some() || !Bundle::is_exp(app.symbol()) {
                    return structural;
                }
                self.render_subchain(r, th, d, &n)
            }
        }
    }

    /// `k^e1^..^en` where `k` is a held exponentiation with the same base
    /// and a sub-multiset of the exponents.
    fn render_subchain(&self, r: &Role, th: &mut Thread, d: &mut Draft, n: &Term) -> Option<TTerm> {
        let (base, exps) = exp_chain(n)?;
        let candidates: Vec<(Term, TTerm)> =
            th.env.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        for (k, held) in candidates {
            let Some((kbase, kexps)) = exp_chain(&k) else { continue };
            if kbase != base || kexps.len() >= exps.len() {
                continue;
            }
            let mut rest: Vec<&Term> = exps.clone();
            let mut ok = true;
            for e in kexps {
                match rest.iter().position(|x| *x == e) {
                    Some(i) => {
                        rest.remove(i);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let built = attempt(th, d, |th, d| {
                rest.iter().try_fold(held.clone(), |acc, e| {
                    let e = self.render_inner(r, th, d, e)?;
                    Some(TTerm::Exp(Box::new(acc), Box::new(e)))
                })
            });
            if built.is_some() {
                return built;
            }
        }
        None
    }

    /// The role owning the asymmetric key inside `pk(sk)`, when that is
    /// another role.
    fn peer_key_owner(&self, r: &Role, t: &Term) -> Option<&'s Role> {
        let Term::Apply(app) = t else { return None };
        if app.symbol().name() != "pk" || app.args().len() != 1 {
            return None;
        }
        let v = app.args()[0].as_var()?;
        self.spec
            .roles()
            .iter()
            .find(|o| o.asymmetric_key() == Some(v))
            .filter(|o| o.name != r.name)
    }

    fn is_reducible(&self, t: &TTerm) -> bool {
        match t {
            TTerm::Var { .. } | TTerm::Const(_) => false,
            TTerm::App { fun, args } => {
                fun == "fst" || fun == "snd" || self.reducible.contains(fun) || args.iter().any(|a| self.is_reducible(a))
            }
            TTerm::Tuple(items) => items.iter().any(|a| self.is_reducible(a)),
            TTerm::Exp(b, e) => self.is_reducible(b) || self.is_reducible(e),
        }
    }

    fn opaque(&mut self, base: &str) -> TTerm {
        TTerm::var(self.names.claim(base), VarSort::Msg)
    }

    /// A destructor with a constant result whose main argument matches `t`.
    fn checker_for(&self, t: &Term) -> Option<Match<'_>> {
        self.destructors.iter().find_map(|(eq, main)| {
            if matches!(eq.rhs(), Term::Var(_)) {
                return None;
            }
            let Term::Apply(lhs) = eq.lhs() else { return None };
            let mut binding = Substitution::new();
            match_term(&lhs.args()[*main], t, &mut binding).then_some((eq, *main, binding))
        })
    }

    /// In-pattern for a decomposed receive. Unknown variables become pattern
    /// variables; subterms a pattern cannot contain become opaque variables
    /// checked through `Eq` actions.
    fn pattern(
        &mut self,
        r: &Role,
        th: &mut Thread,
        d: &mut Draft,
        pending: &mut Vec<(Equation, usize, Substitution, TTerm)>,
        t: &Term,
    ) -> TTerm {
        let n = self.ctx.normalize(t);
        if let Some(e) = th.env.get(&n).cloned() {
            if !self.is_reducible(&e) {
                return e;
            }
            let o = self.opaque("x");
            d.actions.push(eq_fact(o.clone(), e));
            return o;
        }
        match t {
            Term::Var(v) => {
                let sort = match v.sort {
                    Sort::Public => VarSort::Public,
                    Sort::Fresh if r.owns(v) => VarSort::Fresh,
                    _ => VarSort::Msg,
                };
                let x = TTerm::var(self.names.var_name(&v.name), sort);
                th.bind(n, x.clone());
                x
            }
            Term::Const(c) => TTerm::Const(c.name.clone()),
            Term::Tuple(tu) => TTerm::Tuple(
                tu.items()
                    .iter()
                    .map(|i| self.pattern(r, th, d, pending, i))
                    .collect(),
            ),
            Term::Apply(app) => {
                if self.peer_key_owner(r, &n).is_some() {
                    return self.render(r, th, d, &n).expect("peer keys always render");
                }
                if self.reducible.contains(app.symbol().name()) {
                    let o = self.opaque("x");
                    if let Some(e) = self.render(r, th, d, &n) {
                        d.actions.push(eq_fact(o.clone(), e));
                    }
                    th.bind(n, o.clone());
                    return o;
                }
                let checker = self
                    .checker_for(&n)
                    .map(|(eq, main, b)| (eq.clone(), main, b));
                if let Some((eq, main, binding)) = checker {
                    if self.render(r, th, d, &n).is_none() {
                        let s = self.opaque("sig");
                        th.bind(n, s.clone());
                        pending.push((eq, main, binding, s.clone()));
                        return s;
                    }
                }
                let args: Vec<TTerm> = app
                    .args()
                    .iter()
                    .map(|a| self.pattern(r, th, d, pending, a))
                    .collect();
                self.apply(app.symbol().name(), args)
            }
        }
    }

    /// `Eq(d(x, side args..), c)` for a destructor with constant result `c`,
    /// when the side arguments can be expressed.
    #[allow(clippy::too_many_arguments)]
    fn add_check(
        &self,
        r: &Role,
        th: &mut Thread,
        d: &mut Draft,
        eq: &Equation,
        main: usize,
        binding: &Substitution,
        x: TTerm,
    ) {
        let Term::Apply(lhs) = eq.lhs() else { return };
        let built = attempt(th, d, |th, d| {
            let mut args = Vec::new();
            for (i, a) in lhs.args().iter().enumerate() {
                if i == main {
                    args.push(x.clone());
                } else {
                    args.push(self.render(r, th, d, &substitute_unchecked(a, binding))?);
                }
            }
            let rhs = self.render(r, th, d, &substitute_unchecked(eq.rhs(), binding))?;
            Some(eq_fact(self.apply(lhs.symbol().name(), args), rhs))
        });
        if let Some(f) = built {
            d.actions.push(f);
        }
    }

    /// Atomic receive: the message is bound to `m` and taken apart with
    /// projections and destructors. Parts already known are checked with
    /// `Eq` actions.
    fn decompose(&self, r: &Role, th: &mut Thread, d: &mut Draft, payload: &Term, m: TTerm) {
        let mut queue: VecDeque<(Term, TTerm)> = VecDeque::new();
        queue.push_back((self.ctx.normalize(payload), m));
        while let Some((t, e)) = queue.pop_front() {
            if let Some(known) = self.render(r, th, d, &t) {
                d.actions.push(eq_fact(e, known));
                continue;
            }
            th.bind(t.clone(), e.clone());
            if let Term::Tuple(tu) = &t {
                let items = tu.items();
                let mut rest = e.clone();
                for (i, item) in items.iter().enumerate() {
                    if i + 1 == items.len() {
                        queue.push_back((item.clone(), rest.clone()));
                    } else {
                        queue.push_back((item.clone(), TTerm::app("fst", vec![rest.clone()])));
                        rest = TTerm::app("snd", vec![rest]);
                    }
                }
            }
            for (eq, main) in &self.destructors {
                let Term::Apply(lhs) = eq.lhs() else { continue };
                let mut binding = Substitution::new();
                if !match_term(&lhs.args()[*main], &t, &mut binding) {
                    continue;
                }
                let args = attempt(th, d, |th, d| {
                    let mut args = Vec::new();
                    for (i, a) in lhs.args().iter().enumerate() {
                        if i == *main {
                            args.push(e.clone());
                        } else {
                            args.push(self.render(r, th, d, &substitute_unchecked(a, &binding))?);
                        }
                    }
                    Some(args)
                });
                let Some(args) = args else { continue };
                let applied = self.apply(lhs.symbol().name(), args);
                let result = self.ctx.normalize(&substitute_unchecked(eq.rhs(), &binding));
                if matches!(eq.rhs(), Term::Var(_)) {
                    queue.push_back((result, applied));
                } else if let Some(c) = self.render(r, th, d, &result) {
                    d.actions.push(eq_fact(applied, c));
                }
            }
        }
    }
}

fn var_sort(s: Sort) -> VarSort {
    match s {
        Sort::Fresh => VarSort::Fresh,
        Sort::Public => VarSort::Public,
        Sort::Message => VarSort::Msg,
    }
}

fn role_setup(r: &Role) -> Vec<Var> {
    let mut out: Vec<Var> = r
        .long_term_keys
        .iter()
        .filter(|k| k.kind == KeyKind::Symmetric)
        .map(|k| k.var.clone())
        .collect();
    for t in &r.initial_knowledge {
        for v in t.vars() {
            if v.sort != Sort::Public
                && !r.fresh_values.contains(&v)
                && r.asymmetric_key() != Some(&v)
                && !out.contains(&v)
            {
                out.push(v);
            }
        }
    }
    out
}
