use crate::model::{
    sort_name, Delivery, KeyKind, Orientation, ProtocolSpec, SecurityGoal, Sort, Term, Visibility,
};

use super::{PsvDocument, FORMAT_VERSION};

/// Canonical bytes: fixed section order, attributes sorted by name, two-space
/// indentation, LF line endings, default attribute values omitted.
pub fn serialize_psv(doc: &PsvDocument) -> Vec<u8> {
    serialize_spec(&doc.spec).into_bytes()
}

pub fn serialize_spec(spec: &ProtocolSpec) -> String {
    let mut w = Writer::default();
    w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    w.open("protocol", &[("format", FORMAT_VERSION), ("name", spec.name())]);

    let has_decls =
        !spec.bundles().is_empty() || !spec.functions().is_empty() || !spec.equations().is_empty();
    if has_decls {
        w.open("declarations", &[]);
        for b in spec.bundles() {
            w.empty("bundle", &[("name", b.xml_name())]);
        }
        for f in spec.functions() {
            let arity = f.arity().to_string();
            let vis = match f.visibility() {
                Visibility::Public => "public",
                Visibility::Private => "private",
            };
            w.empty(
                "function",
                &[("arity", &arity), ("name", f.name()), ("visibility", vis)],
            );
        }
        for e in spec.equations() {
            let orientation = match e.orientation() {
                Orientation::Destructor => "destructor",
                Orientation::Unoriented => "unoriented",
            };
            w.open("equation", &[("orientation", orientation)]);
            w.open("lhs", &[]);
            w.term(e.lhs());
            w.close("lhs");
            w.open("rhs", &[]);
            w.term(e.rhs());
            w.close("rhs");
            w.close("equation");
        }
        w.close("declarations");
    } else {
        w.empty("declarations", &[]);
    }

    w.open("roles", &[]);
    for r in spec.roles() {
        if r.initial_knowledge.is_empty() && r.fresh_values.is_empty() && r.long_term_keys.is_empty()
        {
            w.empty("role", &[("name", &r.name)]);
            continue;
        }
        w.open("role", &[("name", &r.name)]);
        for t in &r.initial_knowledge {
            w.open("knows", &[]);
            w.term(t);
            w.close("knows");
        }
        for v in &r.fresh_values {
            w.empty("fresh", &[("name", &v.name)]);
        }
        for k in &r.long_term_keys {
            let kind = match k.kind {
                KeyKind::AsymmetricPrivate => "asymmetric",
                KeyKind::Symmetric => "symmetric",
            };
            w.empty("ltk", &[("kind", kind), ("name", &k.var.name)]);
        }
        w.close("role");
    }
    w.close("roles");

    if spec.exchange().is_empty() {
        w.empty("exchange", &[]);
    } else {
        w.open("exchange", &[]);
        for s in spec.exchange() {
            let index = s.index.to_string();
            let mut attrs = vec![("from", s.from.as_str()), ("index", &index), ("to", &s.to)];
            if s.delivery == Delivery::Atomic {
                attrs.insert(0, ("delivery", "atomic"));
            }
            w.open("message", &attrs);
            w.term(&s.payload);
            w.close("message");
        }
        w.close("exchange");
    }

    if spec.goals().is_empty() {
        w.empty("goals", &[]);
    } else {
        w.open("goals", &[]);
        for g in spec.goals() {
            match g {
                SecurityGoal::Secrecy { term, viewpoint } => {
                    w.open("secrecy", &[("role", viewpoint)]);
                    w.term(term);
                    w.close("secrecy");
                }
                SecurityGoal::Agreement {
                    claimer,
                    peer,
                    terms,
                } => {
                    w.open("agreement", &[("claimer", claimer), ("peer", peer)]);
                    for t in terms {
                        w.open("on", &[]);
                        w.term(t);
                        w.close("on");
                    }
                    w.close("agreement");
                }
            }
        }
        w.close("goals");
    }
    w.close("protocol");
    w.out
}

#[derive(Default)]
struct Writer {
    out: String,
    depth: usize,
}

impl Writer {
    fn start(&mut self, name: &str, attrs: &[(&str, &str)]) {
        debug_assert!(attrs.windows(2).all(|w| w[0].0 < w[1].0));
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in attrs {
            self.out.push(' ');
            self.out.push_str(k);
            self.out.push_str("=\"");
            escape_into(&mut self.out, v);
            self.out.push('"');
        }
    }

    fn open(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.start(name, attrs);
        self.out.push_str(">\n");
        self.depth += 1;
    }

    fn empty(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.start(name, attrs);
        self.out.push_str("/>\n");
    }

    fn close(&mut self, name: &str) {
        self.depth -= 1;
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str("</");
        self.out.push_str(name);
        self.out.push_str(">\n");
    }

    fn term(&mut self, t: &Term) {
        match t {
            Term::Var(v) => {
                if v.sort == Sort::Message {
                    self.empty("var", &[("name", &v.name)]);
                } else {
                    self.empty("var", &[("name", &v.name), ("sort", sort_name(v.sort))]);
                }
            }
            Term::Const(c) => {
                if c.sort == Sort::Public {
                    self.empty("const", &[("name", &c.name)]);
                } else {
                    self.empty("const", &[("name", &c.name), ("sort", sort_name(c.sort))]);
                }
            }
            Term::Apply(app) => {
                let fun = app.symbol().name();
                if app.args().is_empty() {
                    self.empty("apply", &[("fun", fun)]);
                } else {
                    self.open("apply", &[("fun", fun)]);
                    for a in app.args() {
                        self.term(a);
                    }
                    self.close("apply");
                }
            }
            Term::Tuple(tuple) => {
                self.open("tuple", &[]);
                for item in tuple.items() {
                    self.term(item);
                }
                self.close("tuple");
            }
        }
    }
}

fn escape_into(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}
