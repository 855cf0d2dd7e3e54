//! Seeded generator of valid, executable specifications shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use metacp_core::analysis::{check_executability, saturate, Context};
use metacp_core::model::{
    Bundle, BundleSet, Equation, FunctionSymbol, KeyKind, MessageStep, Orientation, ProtocolSpec,
    Role, SecurityGoal, Sort, Term, Visibility,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROLE_NAMES: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

struct Sig {
    bundles: BundleSet,
    user: Option<(FunctionSymbol, FunctionSymbol, Equation)>,
}

impl Sig {
    fn sym(&self, name: &str) -> Option<FunctionSymbol> {
        self.bundles
            .iter()
            .flat_map(|b| b.symbols())
            .find(|s| s.name() == name)
    }

    fn app(&self, name: &str, args: Vec<Term>) -> Option<Term> {
        Term::apply(&self.sym(name)?, args).ok()
    }
}

fn pick_bundles(rng: &mut ChaCha8Rng) -> BundleSet {
    let mut out = BundleSet::new();
    for b in Bundle::ALL {
        if rng.random_bool(0.5) {
            out.insert(b);
        }
    }
    out
}

fn user_functions(rng: &mut ChaCha8Rng) -> Option<(FunctionSymbol, FunctionSymbol, Equation)> {
    if !rng.random_bool(0.3) {
        return None;
    }
    let wrap = FunctionSymbol::new("wrap", 2, Visibility::Public).unwrap();
    let unwrap = FunctionSymbol::new("unwrap", 2, Visibility::Public).unwrap();
    let (x, y) = (Term::msg("x"), Term::msg("y"));
    let lhs = Term::apply(&unwrap, vec![Term::apply(&wrap, vec![x.clone(), y.clone()]).unwrap(), y]).unwrap();
    let eq = Equation::new(lhs, x, Orientation::Destructor).unwrap();
    Some((wrap, unwrap, eq))
}

/// Terms of depth at most `depth` the role can build from `parts`.
fn compose(rng: &mut ChaCha8Rng, sig: &Sig, parts: &[Term], own_sk: Option<&Term>, depth: usize) -> Term {
    let leaf = parts.choose(rng).unwrap().clone();
    if depth <= 1 || rng.random_bool(0.3) {
        return leaf;
    }
    let sub = |rng: &mut ChaCha8Rng| compose(rng, sig, parts, own_sk, depth - 1);
    for _ in 0..8 {
        let built = match rng.random_range(0..7) {
            0 => {
                let n = rng.random_range(2..=3);
                Term::tuple((0..n).map(|_| sub(rng)).collect()).ok()
            }
            1 => {
                let (m, k) = (sub(rng), sub(rng));
                sig.app("senc", vec![m, k])
            }
            2 => {
                let keys: Vec<&Term> = parts
                    .iter()
                    .filter(|t| matches!(t, Term::Apply(a) if a.symbol().name() == "pk"))
                    .collect();
                match keys.choose(rng) {
                    Some(k) if sig.bundles.contains(&Bundle::AsymmetricEncryption) && depth >= 3 => {
                        let m = compose(rng, sig, parts, own_sk, depth - 2);
                        sig.app("aenc", vec![m, (*k).clone()])
                    }
                    _ => None,
                }
            }
            3 => match own_sk {
                Some(sk) if sig.bundles.contains(&Bundle::Signing) => {
                    let m = sub(rng);
                    sig.app("sign", vec![m, sk.clone()])
                }
                _ => None,
            },
            4 => {
                let m = sub(rng);
                sig.app("h", vec![m])
            }
            5 => {
                let exps: Vec<&Term> = parts.iter().filter(|t| t.sort() == Sort::Fresh).collect();
                match exps.choose(rng) {
                    Some(e) if sig.bundles.contains(&Bundle::DiffieHellman) => {
                        let bases: Vec<&Term> = parts
                            .iter()
                            .filter(|t| {
                                matches!(t, Term::Apply(a) if a.symbol().name() == "exp")
                                    && t.depth() < depth
                            })
                            .collect();
                        let base = match bases.choose(rng) {
                            Some(b) if rng.random_bool(0.5) => (*b).clone(),
                            _ => Term::constant("g", Sort::Public),
                        };
                        sig.app("exp", vec![base, (*e).clone()])
                    }
                    _ => None,
                }
            }
            _ => match &sig.user {
                Some((wrap, _, _)) => Term::apply(wrap, vec![sub(rng), sub(rng)]).ok(),
                None => None,
            },
        };
        if let Some(t) = built {
            if t.depth() <= depth {
                return t;
            }
        }
    }
    leaf
}

fn attempt(rng: &mut ChaCha8Rng, index: usize) -> Option<ProtocolSpec> {
    let bundles = pick_bundles(rng);
    let sig = Sig {
        bundles: bundles.clone(),
        user: user_functions(rng),
    };
    let n_roles = rng.random_range(1..=6);
    let n_msgs = if n_roles == 1 { 0 } else { rng.random_range(0..=12) };
    let keyed = bundles.contains(&Bundle::AsymmetricEncryption) || bundles.contains(&Bundle::Signing);

    let mut roles: Vec<Role> = Vec::new();
    for name in &ROLE_NAMES[..n_roles] {
        let mut r = Role::new(*name);
        for k in 1..=rng.random_range(1..=2) {
            r = r.fresh(format!("n{name}{k}"));
        }
        if keyed && rng.random_bool(0.7) {
            r = r.ltk(format!("sk{name}"), KeyKind::AsymmetricPrivate);
        }
        if rng.random_bool(0.2) {
            r = r.knows(Term::constant("c", Sort::Public));
        }
        roles.push(r);
    }
    if n_roles >= 2 && rng.random_bool(0.4) {
        let k = if rng.random_bool(0.5) { "kS" } else { "kT" };
        for r in roles.iter_mut().take(2) {
            if k == "kS" {
                *r = r.clone().ltk("kS", KeyKind::Symmetric);
            } else {
                *r = r.clone().knows(Term::msg("kT"));
            }
        }
    }
    if rng.random_bool(0.1) {
        roles[0] = roles[0].clone().knows(Term::constant("label", Sort::Message));
    }

    let mut equations: Vec<Equation> = bundles.iter().flat_map(|b| b.equations()).collect();
    if let Some((_, _, eq)) = &sig.user {
        equations.push(eq.clone());
    }
    let ctx = Context::new(bundles.clone(), equations);
    let pks: Vec<Term> = roles
        .iter()
        .filter_map(|r| r.asymmetric_key())
        .filter_map(|sk| sig.app("pk", vec![Term::Var(sk.clone())]))
        .collect();
    let mut known: Vec<BTreeSet<Term>> = roles
        .iter()
        .map(|r| {
            let mut s: BTreeSet<Term> = r.initial_knowledge.iter().cloned().collect();
            s.extend(r.fresh_values.iter().cloned().map(Term::Var));
            s.extend(r.long_term_keys.iter().map(|k| Term::Var(k.var.clone())));
            s.extend(roles.iter().map(|o| Term::Var(o.identity())));
            s.extend(pks.iter().cloned());
            if bundles.contains(&Bundle::DiffieHellman) {
                s.insert(Term::constant("g", Sort::Public));
            }
            s
        })
        .collect();

    let mut steps = Vec::new();
    for i in 1..=n_msgs {
        let from = rng.random_range(0..n_roles);
        let mut to = rng.random_range(0..n_roles - 1);
        if to >= from {
            to += 1;
        }
        let sat = saturate(&known[from], &ctx);
        let parts: Vec<Term> = sat.into_iter().filter(|t| t.depth() <= 2).collect();
        let own_sk = roles[from].asymmetric_key().map(|v| Term::Var(v.clone()));
        let payload = compose(rng, &sig, &parts, own_sk.as_ref(), 4);
        known[to].insert(payload.clone());
        let mut step = MessageStep::new(i, ROLE_NAMES[from], ROLE_NAMES[to], payload);
        if rng.random_bool(0.15) {
            step = step.atomic();
        }
        steps.push(step);
    }

    let mut b = ProtocolSpec::builder(format!("Gen{index}"));
    for bundle in &bundles {
        b = b.bundle(*bundle);
    }
    if let Some((wrap, unwrap, eq)) = &sig.user {
        b = b.function(wrap.clone()).function(unwrap.clone()).equation(eq.clone());
    }
    for r in roles {
        b = b.role(r);
    }
    for s in steps {
        b = b.message(s);
    }
    let mut spec = b.build().ok()?;
    let report = check_executability(&spec);
    if !report.ok {
        let mut b = spec.into_builder();
        for s in b.exchange_mut() {
            s.delivery = Default::default();
        }
        spec = b.build().ok()?;
        if !check_executability(&spec).ok {
            return None;
        }
    }
    add_goals(rng, spec)
}

fn add_goals(rng: &mut ChaCha8Rng, spec: ProtocolSpec) -> Option<ProtocolSpec> {
    let report = check_executability(&spec);
    let mut goals = Vec::new();
    for r in spec.roles() {
        if rng.random_bool(0.3) {
            goals.push(SecurityGoal::Secrecy {
                term: Term::Var(r.fresh_values[0].clone()),
                viewpoint: r.name.clone(),
            });
        }
    }
    if spec.roles().len() >= 2 && rng.random_bool(0.4) {
        let (c, p) = (&spec.roles()[0].name, &spec.roles()[1].name);
        let (kc, kp) = (&report.final_knowledge[c].known, &report.final_knowledge[p].known);
        let shared: Vec<Term> = kc
            .intersection(kp)
            .filter(|t| t.sort() == Sort::Fresh)
            .cloned()
            .collect();
        if !shared.is_empty() {
            let n = rng.random_range(1..=shared.len().min(2));
            goals.push(SecurityGoal::Agreement {
                claimer: c.clone(),
                peer: p.clone(),
                terms: shared[..n].to_vec(),
            });
        }
    }
    let mut b = spec.into_builder();
    b.goals_mut().extend(goals);
    b.build().ok()
}

/// `n` valid, executable specifications from `seed`.
pub fn random_specs(seed: u64, n: usize) -> Vec<ProtocolSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        assert!(tries < n * 20, "generator rejects too many candidates");
        if let Some(s) = attempt(&mut rng, out.len()) {
            out.push(s);
        }
    }
    out
}
