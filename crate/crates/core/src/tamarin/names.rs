use std::collections::{BTreeMap, BTreeSet};

use crate::model::{ProtocolSpec, Term};

/// Keywords of the theory language and function names the builtins
/// introduce. Identifiers equal to one of these get a numeric suffix.
const RESERVED: &[&str] = &[
    "theory", "begin", "end", "rule", "lemma", "restriction", "axiom", "builtins", "functions",
    "equations", "let", "in", "All", "Ex", "not", "F", "T", "all", "ex", "exists", "forall",
    "heuristic", "export", "predicates", "options", "macros", "diff", "tactic", "process", "new",
    "out", "if", "then", "else", "event", "insert", "delete", "lookup", "lock", "unlock", "as",
    "rules", "induction", "reuse", "sources", "hide_lemma", "left", "right", "last", "private",
    "fst", "snd", "pair", "inv", "one", "zero", "xor", "mult", "pmult", "em", "true", "exp", "pk",
    "aenc", "adec", "senc", "sdec", "sign", "verify", "revealSign", "revealVerify", "getMessage",
    "h",
];

/// Deterministic identifier assignment. Earlier claims win; later clashing
/// names become `name1`, `name2`, ...
#[derive(Debug, Clone)]
pub(crate) struct Names {
    taken: BTreeSet<String>,
    vars: BTreeMap<String, String>,
    funcs: BTreeMap<String, String>,
}

impl Names {
    pub(crate) fn for_spec(spec: &ProtocolSpec) -> Names {
        let mut n = Names {
            taken: RESERVED.iter().map(|s| s.to_string()).collect(),
            vars: BTreeMap::new(),
            funcs: BTreeMap::new(),
        };
        let builtin: BTreeSet<String> = spec
            .bundles()
            .iter()
            .flat_map(|b| b.symbols())
            .map(|s| s.name().to_owned())
            .collect();
        for f in spec.functions() {
            if !builtin.contains(f.name()) && !n.funcs.contains_key(f.name()) {
                let m = n.claim(f.name());
                n.funcs.insert(f.name().to_owned(), m);
            }
        }
        for r in spec.roles() {
            n.var(&r.name);
            for v in &r.fresh_values {
                n.var(&v.name);
            }
            for k in &r.long_term_keys {
                n.var(&k.var.name);
            }
        }
        let mut terms: Vec<&Term> = spec.all_terms();
        let eqs = spec.equations();
        for e in eqs {
            terms.push(e.lhs());
            terms.push(e.rhs());
        }
        for t in terms {
            for v in t.vars() {
                n.var(&v.name);
            }
        }
        n
    }

    fn var(&mut self, name: &str) {
        if !self.vars.contains_key(name) {
            let m = self.claim(name);
            self.vars.insert(name.to_owned(), m);
        }
    }

    /// Reserves `base` or the first free `base<n>`.
    pub(crate) fn claim(&mut self, base: &str) -> String {
        let mut name = base.to_owned();
        let mut i = 1usize;
        while self.taken.contains(&name) {
            name = format!("{base}{i}");
            i += 1;
        }
        self.taken.insert(name.clone());
        name
    }

    pub(crate) fn var_name(&self, name: &str) -> String {
        self.vars.get(name).cloned().unwrap_or_else(|| name.to_owned())
    }

    /// Builtin symbols keep their names.
    pub(crate) fn fun_name(&self, name: &str) -> String {
        self.funcs.get(name).cloned().unwrap_or_else(|| name.to_owned())
    }
}
