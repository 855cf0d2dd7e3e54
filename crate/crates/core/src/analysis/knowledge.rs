use std::collections::BTreeSet;

use crate::model::{
    exp_chain, match_term, normalize, substitute_unchecked, Bundle, BundleSet, Equation,
    Orientation, ProtocolSpec, Substitution, Term,
};

/// What the derivability relation needs from a specification: the active
/// bundles (for normalization) and the usable destructor equations.
#[derive(Debug, Clone)]
pub struct Context {
    bundles: BundleSet,
    destructors: Vec<(Equation, usize)>,
}

impl Context {
    /// Keeps destructor-oriented equations whose root symbol is public;
    /// everything else plays no part in derivability.
    pub fn new(bundles: BundleSet, equations: impl IntoIterator<Item = Equation>) -> Self {
        let destructors = equations
            .into_iter()
            .filter(|e| e.orientation() == Orientation::Destructor)
            .filter(|e| matches!(e.lhs(), Term::Apply(app) if app.symbol().is_public()))
            .filter_map(|e| e.main_argument().map(|i| (e, i)))
            .collect();
        Context {
            bundles,
            destructors,
        }
    }

    pub fn for_spec(spec: &ProtocolSpec) -> Self {
        Context::new(spec.bundles().clone(), spec.all_equations())
    }

    pub fn bundles(&self) -> &BundleSet {
        &self.bundles
    }

    pub fn normalize(&self, t: &Term) -> Term {
        normalize(t, &self.bundles)
    }

    fn dh(&self) -> bool {
        self.bundles.contains(&Bundle::DiffieHellman)
    }

    /// Terms obtained from `t` by one projection or destructor step.
    fn decompose(&self, t: &Term, known: &BTreeSet<Term>) -> Vec<Term> {
        let mut out = Vec::new();
        if let Term::Tuple(tuple) = t {
            out.extend(tuple.items().iter().cloned());
        }
        for (eq, main) in &self.destructors {
            let Term::Apply(lhs) = eq.lhs() else { continue };
            let mut binding = Substitution::new();
            if !match_term(&lhs.args()[*main], t, &mut binding) {
                continue;
            }
            let sides_ok = lhs
                .args()
                .iter()
                .enumerate()
                .filter(|(i, _)| i != main)
                .all(|(_, a)| self.compose(known, &self.normalize(&substitute_unchecked(a, &binding))));
            if sides_ok {
                out.push(self.normalize(&substitute_unchecked(eq.rhs(), &binding)));
            }
        }
        out
    }

    /// Top-down composition check on a normalized goal.
    fn compose(&self, known: &BTreeSet<Term>, goal: &Term) -> bool {
        if known.contains(goal) {
            return true;
        }
        match goal {
            Term::Var(_) | Term::Const(_) => false,
            Term::Tuple(t) => t.items().iter().all(|i| self.compose(known, i)),
            Term::Apply(app) => {
                if !app.symbol().is_public() {
                    return false;
                }
                if app.args().iter().all(|a| self.compose(known, a)) {
                    return true;
                }
                self.dh() && Bundle::is_exp(app.symbol()) && self.compose_exp(known, goal)
            }
        }
    }

    /// Builds an exponentiation from a known partial chain with the same
    /// base, raising it to the remaining exponents.
    fn compose_exp(&self, known: &BTreeSet<Term>, goal: &Term) -> bool {
        let Some((base, exps)) = exp_chain(goal) else {
            return false;
        };
        known.iter().any(|k| {
            let Some((kbase, kexps)) = exp_chain(k) else {
                return false;
            };
            if kbase != base || kexps.len() >= exps.len() {
                return false;
            }
            let mut rest = exps.clone();
            for e in kexps {
                match rest.iter().position(|r| *r == e) {
                    Some(i) => {
                        rest.remove(i);
                    }
                    None => return false,
                }
            }
            rest.into_iter().all(|e| self.compose(known, e))
        })
    }
}

/// Least superset of `known` closed under tuple projection and destructor
/// application. Every added term is a subterm of a known term or a
/// destructor's constant result, so the loop terminates.
pub fn saturate(known: &BTreeSet<Term>, ctx: &Context) -> BTreeSet<Term> {
    let mut set: BTreeSet<Term> = known.iter().map(|t| ctx.normalize(t)).collect();
    loop {
        let mut fresh = Vec::new();
        for t in &set {
            for d in ctx.decompose(t, &set) {
                if !set.contains(&d) {
                    fresh.push(d);
                }
            }
        }
        if fresh.is_empty() {
            return set;
        }
        set.extend(fresh);
    }
}

/// Whether `goal` can be built from the saturated set `known` using public
/// symbols, modulo normalization.
pub fn derivable(known: &BTreeSet<Term>, goal: &Term, ctx: &Context) -> bool {
    ctx.compose(known, &ctx.normalize(goal))
}

/// First non-derivable subterm of `goal` in pre-order, descending only
/// through structure that composition could have built. Public keys are
/// reported whole: they are expected from the key infrastructure, not
/// composed from the private key.
pub fn missing_subterm(known: &BTreeSet<Term>, goal: &Term, ctx: &Context) -> Option<Term> {
    let goal = ctx.normalize(goal);
    missing(known, &goal, ctx)
}

fn missing(known: &BTreeSet<Term>, goal: &Term, ctx: &Context) -> Option<Term> {
    if ctx.compose(known, goal) {
        return None;
    }
    let descend = match goal {
        Term::Tuple(_) => true,
        Term::Apply(app) => app.symbol().is_public() && !is_public_key(goal, ctx),
        _ => false,
    };
    if descend {
        for c in goal.children() {
            if let Some(m) = missing(known, c, ctx) {
                return Some(m);
            }
        }
    }
    Some(goal.clone())
}

fn is_public_key(t: &Term, ctx: &Context) -> bool {
    let keyed = ctx.bundles.contains(&Bundle::AsymmetricEncryption)
        || ctx.bundles.contains(&Bundle::Signing);
    matches!(t, Term::Apply(app) if keyed && app.symbol().name() == "pk" && app.args().len() == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FunctionSymbol, Visibility};

    fn ctx(bundles: &[Bundle]) -> Context {
        let set: BundleSet = bundles.iter().copied().collect();
        let eqs: Vec<Equation> = set.iter().flat_map(|b| b.equations()).collect();
        Context::new(set, eqs)
    }

    fn app(name: &str, args: Vec<Term>) -> Term {
        let f = FunctionSymbol::new(name, args.len(), Visibility::Public).unwrap();
        Term::apply(&f, args).unwrap()
    }

    fn set(ts: &[Term]) -> BTreeSet<Term> {
        ts.iter().cloned().collect()
    }

    #[test]
    fn projection() {
        let (a, b) = (Term::msg("a"), Term::msg("b"));
        let c = ctx(&[Bundle::Pairing]);
        let pair = Term::pair(a.clone(), b.clone());
        assert_eq!(saturate(&set(&[pair.clone()]), &c), set(&[pair, a, b]));
    }

    #[test]
    fn symmetric_decryption_needs_the_key() {
        let c = ctx(&[Bundle::SymmetricEncryption]);
        let (m, k) = (Term::msg("m"), Term::msg("k"));
        let ct = app("senc", vec![m.clone(), k.clone()]);
        assert_eq!(
            saturate(&set(&[ct.clone(), k.clone()]), &c),
            set(&[ct.clone(), k, m.clone()])
        );
        let s = saturate(&set(&[ct.clone()]), &c);
        assert!(!derivable(&s, &m, &c));
    }

    #[test]
    fn hash_has_no_destructor() {
        let c = ctx(&[Bundle::Hashing]);
        let h = app("h", vec![Term::msg("m")]);
        assert_eq!(saturate(&set(&[h.clone()]), &c), set(&[h]));
    }

    #[test]
    fn dh_composition_modulo_normalization() {
        let c = ctx(&[Bundle::DiffieHellman]);
        let g = Term::constant("g", crate::model::Sort::Public);
        let (x, y) = (Term::fresh("x"), Term::fresh("y"));
        let gx = app("exp", vec![g.clone(), x.clone()]);
        assert!(derivable(&set(&[g.clone(), x.clone()]), &gx, &c));
        let known = saturate(&set(&[gx.clone(), y.clone()]), &c);
        let gyx = app("exp", vec![app("exp", vec![g.clone(), y.clone()]), x.clone()]);
        assert!(derivable(&known, &gyx, &c));
        // neither exponent is known on its own
        let known = saturate(&set(&[gx, app("exp", vec![g, y])]), &c);
        assert!(!derivable(&known, &gyx, &c));
    }

    #[test]
    fn private_symbols_are_not_composed() {
        let c = ctx(&[]);
        let f = FunctionSymbol::new("f", 1, Visibility::Private).unwrap();
        let a = Term::msg("a");
        let fa = Term::apply(&f, vec![a.clone()]).unwrap();
        assert!(!derivable(&set(&[a.clone()]), &fa, &c));
        assert!(derivable(&set(&[fa.clone()]), &fa, &c));
        assert_eq!(missing_subterm(&set(&[a]), &fa, &c), Some(fa));
    }

    #[test]
    fn missing_subterm_is_first_in_preorder() {
        let c = ctx(&[Bundle::AsymmetricEncryption]);
        let (na, a) = (Term::fresh("na"), Term::public("A"));
        let pkc = app("pk", vec![Term::fresh("skC")]);
        let payload = app("aenc", vec![Term::pair(na.clone(), a.clone()), pkc.clone()]);
        let known = set(&[na.clone(), a.clone()]);
        assert_eq!(missing_subterm(&known, &payload, &c), Some(pkc));
        let nb = Term::fresh("nb");
        let known = set(&[a.clone()]);
        let t = Term::tuple(vec![na.clone(), nb, a]).unwrap();
        assert_eq!(missing_subterm(&known, &t, &c), Some(na));
    }
}
