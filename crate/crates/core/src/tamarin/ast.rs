use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarSort {
    Fresh,
    Public,
    Msg,
}

/// A term as it appears in the generated theory.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TTerm {
    Var { name: String, sort: VarSort },
    /// Quoted public constant `'c'`.
    Const(String),
    App { fun: String, args: Vec<TTerm> },
    Exp(Box<TTerm>, Box<TTerm>),
    Tuple(Vec<TTerm>),
}

impl TTerm {
    pub fn var(name: impl Into<String>, sort: VarSort) -> TTerm {
        TTerm::Var {
            name: name.into(),
            sort,
        }
    }

    pub fn app(fun: impl Into<String>, args: Vec<TTerm>) -> TTerm {
        TTerm::App {
            fun: fun.into(),
            args,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, TTerm::Var { .. })
    }

    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<(String, VarSort)> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<(String, VarSort)>) {
        match self {
            TTerm::Var { name, sort } => {
                let v = (name.clone(), *sort);
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            TTerm::Const(_) => {}
            TTerm::App { args, .. } | TTerm::Tuple(args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            TTerm::Exp(b, e) => {
                b.collect_vars(out);
                e.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for TTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TTerm::Var { name, sort } => match sort {
                VarSort::Fresh => write!(f, "~{name}"),
                VarSort::Public => write!(f, "${name}"),
                VarSort::Msg => f.write_str(name),
            },
            TTerm::Const(c) => write!(f, "'{c}'"),
            TTerm::App { fun, args } if args.is_empty() => f.write_str(fun),
            TTerm::App { fun, args } => {
                write!(f, "{fun}(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            TTerm::Exp(base, exp) => {
                match **base {
                    TTerm::Exp(..) => write!(f, "({base})")?,
                    _ => write!(f, "{base}")?,
                }
                match **exp {
                    TTerm::Var { .. } | TTerm::Const(_) => write!(f, "^{exp}"),
                    _ => write!(f, "^({exp})"),
                }
            }
            TTerm::Tuple(items) => {
                f.write_str("<")?;
                write_args(f, items)?;
                f.write_str(">")
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[TTerm]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub name: String,
    pub persistent: bool,
    pub args: Vec<TTerm>,
}

impl Fact {
    pub fn new(name: impl Into<String>, args: Vec<TTerm>) -> Fact {
        Fact {
            name: name.into(),
            persistent: false,
            args,
        }
    }

    pub fn persistent(name: impl Into<String>, args: Vec<TTerm>) -> Fact {
        Fact {
            persistent: true,
            ..Fact::new(name, args)
        }
    }

    pub fn vars(&self) -> Vec<(String, VarSort)> {
        let mut out = Vec::new();
        for a in &self.args {
            for v in a.vars() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.persistent {
            f.write_str("!")?;
        }
        write!(f, "{}(", self.name)?;
        write_args(f, &self.args)?;
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamarinRule {
    pub name: String,
    pub premises: Vec<Fact>,
    pub actions: Vec<Fact>,
    pub conclusions: Vec<Fact>,
}

impl TamarinRule {
    /// Non-public variables of actions and conclusions that no premise
    /// binds. Public variables range over public names and need no binding.
    pub fn unbound_vars(&self) -> Vec<(String, VarSort)> {
        let bound: BTreeSet<(String, VarSort)> =
            self.premises.iter().flat_map(Fact::vars).collect();
        let mut out = Vec::new();
        for f in self.actions.iter().chain(&self.conclusions) {
            for v in f.vars() {
                if v.1 != VarSort::Public && !bound.contains(&v) && !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Names `x` used with more than one sort inside this rule.
    pub fn sort_clashes(&self) -> Vec<String> {
        let mut seen: std::collections::BTreeMap<String, VarSort> = Default::default();
        let mut out = Vec::new();
        let facts = self.premises.iter().chain(&self.actions).chain(&self.conclusions);
        for (name, sort) in facts.flat_map(Fact::vars) {
            match seen.get(&name) {
                Some(s) if *s != sort => {
                    if !out.contains(&name) {
                        out.push(name);
                    }
                }
                Some(_) => {}
                None => {
                    seen.insert(name, sort);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaKind {
    ExistsTrace,
    AllTraces,
}

impl LemmaKind {
    pub fn keyword(self) -> &'static str {
        match self {
            LemmaKind::ExistsTrace => "exists-trace",
            LemmaKind::AllTraces => "all-traces",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lemma {
    pub name: String,
    pub kind: LemmaKind,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restriction {
    pub name: String,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamarinTheory {
    pub name: String,
    pub builtins: Vec<String>,
    /// `name/arity` with an optional ` [private]` suffix.
    pub functions: Vec<String>,
    /// `lhs = rhs`
    pub equations: Vec<String>,
    pub restrictions: Vec<Restriction>,
    pub rules: Vec<TamarinRule>,
    pub lemmas: Vec<Lemma>,
}

impl TamarinTheory {
    pub fn new(name: impl Into<String>) -> Self {
        TamarinTheory {
            name: name.into(),
            builtins: Vec::new(),
            functions: Vec::new(),
            equations: Vec::new(),
            restrictions: Vec::new(),
            rules: Vec::new(),
            lemmas: Vec::new(),
        }
    }
}

/// Deterministic `.spthy` text.
pub fn render_theory(t: &TamarinTheory) -> String {
    let mut out = format!("theory {}\nbegin\n\n", t.name);
    if !t.builtins.is_empty() {
        out.push_str(&format!("builtins: {}\n\n", t.builtins.join(", ")));
    }
    if !t.functions.is_empty() {
        out.push_str(&format!("functions: {}\n\n", t.functions.join(", ")));
    }
    if !t.equations.is_empty() {
        for e in &t.equations {
            out.push_str(&format!("equations: {e}\n"));
        }
        out.push('\n');
    }
    for r in &t.restrictions {
        out.push_str(&format!("restriction {}:\n  \"{}\"\n\n", r.name, r.formula));
    }
    for r in &t.rules {
        out.push_str(&format!("rule {}:\n", r.name));
        facts(&mut out, "    [ ", "    ]\n", &r.premises);
        if r.actions.is_empty() {
            out.push_str("  -->\n");
        } else {
            facts(&mut out, "  --[ ", "    ]->\n", &r.actions);
        }
        facts(&mut out, "    [ ", "    ]\n", &r.conclusions);
        out.push('\n');
    }
    for l in &t.lemmas {
        out.push_str(&format!(
            "lemma {}:\n  {}\n  \"{}\"\n\n",
            l.name,
            l.kind.keyword(),
            l.formula
        ));
    }
    out.push_str("end\n");
    out
}

fn facts(out: &mut String, open: &str, close: &str, facts: &[Fact]) {
    if facts.is_empty() {
        out.push_str(open.trim_end());
        out.push_str(" ]\n");
        return;
    }
    for (i, f) in facts.iter().enumerate() {
        if i == 0 {
            out.push_str(open);
        } else {
            out.push_str("    , ");
        }
        out.push_str(&f.to_string());
        out.push('\n');
    }
    out.push_str(close);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh(n: &str) -> TTerm {
        TTerm::var(n, VarSort::Fresh)
    }

    #[test]
    fn empty_theory_is_header_only() {
        assert_eq!(render_theory(&TamarinTheory::new("T")), "theory T\nbegin\n\nend\n");
    }

    #[test]
    fn term_syntax() {
        let g = TTerm::Const("g".into());
        let gx = TTerm::Exp(Box::new(g), Box::new(fresh("x")));
        let gxy = TTerm::Exp(Box::new(gx.clone()), Box::new(TTerm::var("y", VarSort::Msg)));
        assert_eq!(gx.to_string(), "'g'^~x");
        assert_eq!(gxy.to_string(), "('g'^~x)^y");
        let t = TTerm::Tuple(vec![fresh("na"), TTerm::var("A", VarSort::Public)]);
        assert_eq!(t.to_string(), "<~na, $A>");
        assert_eq!(TTerm::app("true", vec![]).to_string(), "true");
    }

    #[test]
    fn persistent_premise_syntax() {
        let rule = TamarinRule {
            name: "R".into(),
            premises: vec![Fact::persistent(
                "Ltk",
                vec![TTerm::var("A", VarSort::Public), TTerm::var("ltkA", VarSort::Msg)],
            )],
            actions: vec![],
            conclusions: vec![],
        };
        let mut t = TamarinTheory::new("T");
        t.rules.push(rule);
        let text = render_theory(&t);
        assert!(text.contains("!Ltk($A, ltkA)"));
        assert!(text.contains("  -->\n"));
    }

    #[test]
    fn unbound_scan_ignores_public_vars() {
        let rule = TamarinRule {
            name: "R".into(),
            premises: vec![Fact::new("Fr", vec![fresh("k")])],
            actions: vec![Fact::new("A", vec![TTerm::var("X", VarSort::Public)])],
            conclusions: vec![Fact::new("Out", vec![TTerm::Tuple(vec![fresh("k"), fresh("n")])])],
        };
        assert_eq!(rule.unbound_vars(), [("n".to_owned(), VarSort::Fresh)]);
    }
}
