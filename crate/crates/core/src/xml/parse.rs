use std::collections::{BTreeMap, HashMap};

use roxmltree::{Node, NodeType, ParsingOptions, TextPos};

use crate::diagnostic::{sort_diagnostics, Code, Diagnostic, Location};
use crate::model::{
    Bundle, BundleSet, Delivery, Equation, EquationError, FunctionSymbol, KeyKind, MessageStep,
    Orientation, ProtocolSpec, ProtocolSpecBuilder, Role, SecurityGoal, Site, Sort, Term,
    Visibility,
};

use super::{PsvDocument, FORMAT_VERSION, XML_VERSION};

/// Default document size cap.
pub const DEFAULT_MAX_BYTES: usize = 4 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub max_bytes: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_bytes: DEFAULT_MAX_BYTES,
        }
    }
}

pub fn parse_psv(input: &[u8]) -> Result<PsvDocument, Vec<Diagnostic>> {
    parse_psv_with(input, &ParseOptions::default())
}

/// Diagnostics `parse_psv` would report; empty iff parsing succeeds.
pub fn validate_schema(input: &[u8]) -> Vec<Diagnostic> {
    match parse_psv(input) {
        Ok(_) => Vec::new(),
        Err(d) => d,
    }
}

pub fn parse_psv_with(input: &[u8], opts: &ParseOptions) -> Result<PsvDocument, Vec<Diagnostic>> {
    parse_psv_mapped(input, opts).map(|(doc, _)| doc)
}

/// Source positions of the elements behind a parsed specification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceMap {
    sites: HashMap<Site, Location>,
}

impl SourceMap {
    pub fn get(&self, site: Site) -> Option<Location> {
        self.sites.get(&site).copied()
    }

    pub fn step(&self, index: usize) -> Option<Location> {
        index.checked_sub(1).and_then(|pos| self.get(Site::Step(pos)))
    }
}

/// Like [`parse_psv_with`], also returning where each element was found.
pub fn parse_psv_mapped(
    input: &[u8],
    opts: &ParseOptions,
) -> Result<(PsvDocument, SourceMap), Vec<Diagnostic>> {
    if input.len() > opts.max_bytes {
        return Err(vec![Diagnostic::error(
            Code::SizeLimit,
            format!(
                "document is {} bytes, the limit is {} bytes",
                input.len(),
                opts.max_bytes
            ),
        )]);
    }
    let text = match std::str::from_utf8(input) {
        Ok(t) => t,
        Err(e) => {
            let loc = byte_location(input, e.valid_up_to());
            return Err(vec![Diagnostic::error(
                Code::Encoding,
                "document is not valid UTF-8",
            )
            .at(Some(loc))]);
        }
    };
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let xml_opts = ParsingOptions {
        allow_dtd: false,
        nodes_limit: u32::MAX,
    };
    let doc = match roxmltree::Document::parse_with_options(text, xml_opts) {
        Ok(d) => d,
        Err(e) => {
            let code = match e {
                roxmltree::Error::DtdDetected => Code::DtdForbidden,
                _ => Code::XmlSyntax,
            };
            let msg = match code {
                Code::DtdForbidden => "document type declarations are not allowed".to_owned(),
                _ => e.to_string(),
            };
            return Err(vec![Diagnostic::error(code, msg).at(Some(pos(e.pos())))]);
        }
    };
    let mut p = Parser {
        doc: &doc,
        diags: Vec::new(),
        sites: HashMap::new(),
        sig: BTreeMap::new(),
        step: None,
    };
    let spec = p.protocol(doc.root_element());
    let mut diags = p.diags;
    match spec {
        Some(Ok(spec)) if diags.is_empty() => Ok((
            PsvDocument {
                xml_version: XML_VERSION.to_owned(),
                format_version: FORMAT_VERSION.to_owned(),
                spec,
            },
            SourceMap { sites: p.sites },
        )),
        Some(Err(violations)) => {
            diags.extend(
                violations
                    .iter()
                    .map(|v| v.to_diagnostic(|s| p.sites.get(&s).copied())),
            );
            sort_diagnostics(&mut diags);
            Err(diags)
        }
        _ => {
            sort_diagnostics(&mut diags);
            Err(diags)
        }
    }
}

fn pos(p: TextPos) -> Location {
    Location {
        line: p.row,
        column: p.col,
    }
}

fn byte_location(input: &[u8], offset: usize) -> Location {
    let before = &input[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    Location {
        line: line as u32,
        column: (offset - line_start + 1) as u32,
    }
}

struct Parser<'a, 'input> {
    doc: &'a roxmltree::Document<'input>,
    diags: Vec<Diagnostic>,
    sites: HashMap<Site, Location>,
    sig: BTreeMap<String, FunctionSymbol>,
    /// Index of the message being parsed, attached to term diagnostics.
    step: Option<usize>,
}

impl<'a, 'input> Parser<'a, 'input> {
    fn loc(&self, n: Node) -> Location {
        pos(self.doc.text_pos_at(n.range().start))
    }

    fn err(&mut self, code: Code, n: Node, msg: impl Into<String>) {
        let d = Diagnostic::error(code, msg)
            .at(Some(self.loc(n)))
            .in_step(self.step);
        self.diags.push(d);
    }

    /// Child elements, reporting stray text and namespaced elements.
    fn elements(&mut self, n: Node<'a, 'input>) -> Vec<Node<'a, 'input>> {
        let mut out = Vec::new();
        for c in n.children() {
            match c.node_type() {
                NodeType::Element => {
                    if c.tag_name().namespace().is_some() {
                        self.err(
                            Code::UnknownElement,
                            c,
                            format!("namespaced element <{}> is not allowed", c.tag_name().name()),
                        );
                    } else {
                        out.push(c);
                    }
                }
                NodeType::Text if !c.text().unwrap_or("").trim().is_empty() => {
                    self.err(
                        Code::UnexpectedText,
                        c,
                        format!("unexpected text inside <{}>", n.tag_name().name()),
                    );
                }
                _ => {}
            }
        }
        out
    }

    /// Reports unknown attributes and missing required ones; returns the
    /// values of `names` in order.
    fn attrs(
        &mut self,
        n: Node<'a, 'input>,
        required: &[&str],
        optional: &[&str],
    ) -> Vec<Option<&'a str>> {
        let tag = n.tag_name().name();
        for a in n.attributes() {
            let known = a.namespace().is_none()
                && (required.contains(&a.name()) || optional.contains(&a.name()));
            if !known {
                self.err(
                    Code::UnknownAttribute,
                    n,
                    format!("unknown attribute `{}` on <{tag}>", a.name()),
                );
            }
        }
        let mut out = Vec::new();
        for name in required {
            let v = n.attribute(*name);
            if v.is_none() {
                self.err(
                    Code::MissingAttribute,
                    n,
                    format!("<{tag}> requires attribute `{name}`"),
                );
            }
            out.push(v);
        }
        for name in optional {
            out.push(n.attribute(*name));
        }
        out
    }

    fn protocol(&mut self, root: Node<'a, 'input>) -> Option<Result<ProtocolSpec, Vec<crate::model::Violation>>> {
        if root.tag_name().name() != "protocol" || root.tag_name().namespace().is_some() {
            self.err(
                Code::UnknownElement,
                root,
                format!("expected <protocol>, found <{}>", root.tag_name().name()),
            );
            return None;
        }
        let a = self.attrs(root, &["format", "name"], &[]);
        let format = a[0]?;
        if format != FORMAT_VERSION {
            self.diags = vec![Diagnostic::error(
                Code::FormatVersion,
                format!("format version `{format}` is not supported, expected `{FORMAT_VERSION}`"),
            )
            .at(Some(self.loc(root)))];
            return None;
        }
        let name = a[1].unwrap_or("");
        self.sites.insert(Site::Protocol, self.loc(root));

        let mut sections: BTreeMap<&str, Node<'a, 'input>> = BTreeMap::new();
        for c in self.elements(root) {
            let tag = c.tag_name().name();
            match tag {
                "declarations" | "roles" | "exchange" | "goals" => {
                    if sections.insert(tag, c).is_some() {
                        self.err(Code::Cardinality, c, format!("<{tag}> appears more than once"));
                    }
                }
                _ => self.err(
                    Code::UnknownElement,
                    c,
                    format!("unknown element <{tag}> in <protocol>"),
                ),
            }
        }
        let mut b = ProtocolSpec::builder(name);
        if let Some(&d) = sections.get("declarations") {
            b = self.declarations(d, b);
        }
        let roles = sections.get("roles").copied();
        match roles {
            Some(r) => b = self.roles(r, b),
            None => self.err(Code::Cardinality, root, "<protocol> requires a <roles> section"),
        }
        if let Some(&e) = sections.get("exchange") {
            b = self.exchange(e, b);
        }
        if let Some(&g) = sections.get("goals") {
            b = self.goals(g, b);
        }
        roles?;
        Some(b.build())
    }

    fn declarations(
        &mut self,
        n: Node<'a, 'input>,
        mut b: ProtocolSpecBuilder,
    ) -> ProtocolSpecBuilder {
        self.attrs(n, &[], &[]);
        let children = self.elements(n);
        // bundles and functions first so equations can refer to them
        // regardless of element order
        let mut bundles = BundleSet::new();
        let mut functions = Vec::new();
        for &c in &children {
            match c.tag_name().name() {
                "bundle" => {
                    let a = self.attrs(c, &["name"], &[]);
                    let Some(v) = a[0] else { continue };
                    match Bundle::from_xml_name(v) {
                        Some(bundle) => {
                            if !bundles.insert(bundle) {
                                self.err(
                                    Code::DuplicateBundle,
                                    c,
                                    format!("bundle `{v}` is listed twice"),
                                );
                            }
                        }
                        None => self.err(Code::BadValue, c, format!("unknown bundle `{v}`")),
                    }
                }
                "function" => {
                    if let Some(f) = self.function(c) {
                        functions.push((f, c));
                    }
                }
                "equation" => {}
                other => self.err(
                    Code::UnknownElement,
                    c,
                    format!("unknown element <{other}> in <declarations>"),
                ),
            }
        }
        for bundle in &bundles {
            b = b.bundle(*bundle);
            for s in bundle.symbols() {
                self.sig.insert(s.name().to_owned(), s);
            }
        }
        for (i, (f, c)) in functions.into_iter().enumerate() {
            self.sites.insert(Site::Function(i), self.loc(c));
            self.sig.entry(f.name().to_owned()).or_insert_with(|| f.clone());
            b = b.function(f);
        }
        let mut eq_index = 0;
        for &c in &children {
            if c.tag_name().name() == "equation" {
                if let Some(e) = self.equation(c) {
                    self.sites.insert(Site::Equation(eq_index), self.loc(c));
                    eq_index += 1;
                    b = b.equation(e);
                }
            }
        }
        b
    }

    fn function(&mut self, c: Node<'a, 'input>) -> Option<FunctionSymbol> {
        let a = self.attrs(c, &["arity", "name", "visibility"], &[]);
        self.no_children(c);
        let (arity, name, vis) = (a[0]?, a[1]?, a[2]?);
        let Ok(arity) = arity.parse::<usize>() else {
            self.err(Code::BadValue, c, format!("arity `{arity}` is not a non-negative integer"));
            return None;
        };
        let vis = match vis {
            "public" => Visibility::Public,
            "private" => Visibility::Private,
            other => {
                self.err(Code::BadValue, c, format!("visibility must be public or private, found `{other}`"));
                return None;
            }
        };
        match FunctionSymbol::new(name, arity, vis) {
            Ok(f) => Some(f),
            Err(e) => {
                self.err(Code::BadValue, c, e.to_string());
                None
            }
        }
    }

    fn equation(&mut self, c: Node<'a, 'input>) -> Option<Equation> {
        let a = self.attrs(c, &["orientation"], &[]);
        let orientation = match a[0]? {
            "destructor" => Orientation::Destructor,
            "unoriented" => Orientation::Unoriented,
            other => {
                self.err(Code::BadValue, c, format!("orientation must be destructor or unoriented, found `{other}`"));
                return None;
            }
        };
        let mut lhs = None;
        let mut rhs = None;
        let mut ok = true;
        for side in self.elements(c) {
            let slot = match side.tag_name().name() {
                "lhs" => &mut lhs,
                "rhs" => &mut rhs,
                other => {
                    self.err(Code::UnknownElement, side, format!("unknown element <{other}> in <equation>"));
                    ok = false;
                    continue;
                }
            };
            if slot.is_some() {
                self.err(Code::Cardinality, side, format!("<{}> appears more than once", side.tag_name().name()));
                ok = false;
                continue;
            }
            self.attrs(side, &[], &[]);
            match self.single_term(side) {
                Some(t) => *slot = Some(t),
                None => ok = false,
            }
        }
        if !ok {
            return None;
        }
        let (Some(lhs), Some(rhs)) = (lhs, rhs) else {
            self.err(Code::Cardinality, c, "<equation> needs one <lhs> and one <rhs>");
            return None;
        };
        match Equation::new(lhs, rhs, orientation) {
            Ok(e) => Some(e),
            Err(e) => {
                let code = match e {
                    EquationError::RhsVars(_) => Code::EquationVars,
                    _ => Code::DestructorShape,
                };
                self.err(code, c, e.to_string());
                None
            }
        }
    }

    fn roles(&mut self, n: Node<'a, 'input>, mut b: ProtocolSpecBuilder) -> ProtocolSpecBuilder {
        self.attrs(n, &[], &[]);
        let mut ri = 0;
        for c in self.elements(n) {
            if c.tag_name().name() != "role" {
                self.err(Code::UnknownElement, c, format!("unknown element <{}> in <roles>", c.tag_name().name()));
                continue;
            }
            let a = self.attrs(c, &["name"], &[]);
            let Some(name) = a[0] else { continue };
            let mut role = Role::new(name);
            self.sites.insert(Site::Role(ri), self.loc(c));
            for item in self.elements(c) {
                match item.tag_name().name() {
                    "knows" => {
                        self.attrs(item, &[], &[]);
                        if let Some(t) = self.single_term(item) {
                            let i = role.initial_knowledge.len();
                            self.sites.insert(Site::Knows(ri, i), self.loc(item));
                            role.initial_knowledge.push(t);
                        }
                    }
                    "fresh" => {
                        let a = self.attrs(item, &["name"], &[]);
                        self.no_children(item);
                        if let Some(v) = a[0] {
                            let i = role.fresh_values.len();
                            self.sites.insert(Site::Fresh(ri, i), self.loc(item));
                            role = role.fresh(v);
                        }
                    }
                    "ltk" => {
                        let a = self.attrs(item, &["kind", "name"], &[]);
                        self.no_children(item);
                        let (Some(kind), Some(v)) = (a[0], a[1]) else { continue };
                        let kind = match kind {
                            "asymmetric" => KeyKind::AsymmetricPrivate,
                            "symmetric" => KeyKind::Symmetric,
                            other => {
                                self.err(Code::BadValue, item, format!("key kind must be asymmetric or symmetric, found `{other}`"));
                                continue;
                            }
                        };
                        let i = role.long_term_keys.len();
                        self.sites.insert(Site::Ltk(ri, i), self.loc(item));
                        role = role.ltk(v, kind);
                    }
                    other => self.err(Code::UnknownElement, item, format!("unknown element <{other}> in <role>")),
                }
            }
            b = b.role(role);
            ri += 1;
        }
        b
    }

    fn exchange(&mut self, n: Node<'a, 'input>, mut b: ProtocolSpecBuilder) -> ProtocolSpecBuilder {
        self.attrs(n, &[], &[]);
        let mut pos = 0;
        for c in self.elements(n) {
            if c.tag_name().name() != "message" {
                self.err(Code::UnknownElement, c, format!("unknown element <{}> in <exchange>", c.tag_name().name()));
                continue;
            }
            let a = self.attrs(c, &["from", "index", "to"], &["delivery"]);
            let index = match a[1] {
                Some(v) => match v.parse::<usize>() {
                    Ok(i) => Some(i),
                    Err(_) => {
                        self.err(Code::BadValue, c, format!("message index `{v}` is not an integer"));
                        None
                    }
                },
                None => None,
            };
            self.step = index;
            let delivery = match a[3] {
                None | Some("decompose") => Some(Delivery::Decompose),
                Some("atomic") => Some(Delivery::Atomic),
                Some(other) => {
                    self.err(Code::BadValue, c, format!("delivery must be decompose or atomic, found `{other}`"));
                    None
                }
            };
            let payload = self.single_term(c);
            self.step = None;
            let (Some(from), Some(to), Some(index), Some(delivery)) = (a[0], a[2], index, delivery)
            else {
                continue;
            };
            // keep the step so later indices stay aligned; the placeholder is
            // never observable because the term error fails the parse
            let payload = payload.unwrap_or_else(|| Term::constant("invalid", Sort::Public));
            self.sites.insert(Site::Step(pos), self.loc(c));
            pos += 1;
            let mut step = MessageStep::new(index, from, to, payload);
            step.delivery = delivery;
            b = b.message(step);
        }
        b
    }

    fn goals(&mut self, n: Node<'a, 'input>, mut b: ProtocolSpecBuilder) -> ProtocolSpecBuilder {
        self.attrs(n, &[], &[]);
        let mut gi = 0;
        for c in self.elements(n) {
            let goal = match c.tag_name().name() {
                "secrecy" => {
                    let a = self.attrs(c, &["role"], &[]);
                    let term = self.single_term(c);
                    match (a[0], term) {
                        (Some(r), Some(term)) => Some(SecurityGoal::Secrecy {
                            term,
                            viewpoint: r.to_owned(),
                        }),
                        _ => None,
                    }
                }
                "agreement" => {
                    let a = self.attrs(c, &["claimer", "peer"], &[]);
                    let mut terms = Vec::new();
                    let mut ok = true;
                    for on in self.elements(c) {
                        if on.tag_name().name() != "on" {
                            self.err(Code::UnknownElement, on, format!("unknown element <{}> in <agreement>", on.tag_name().name()));
                            ok = false;
                            continue;
                        }
                        self.attrs(on, &[], &[]);
                        match self.single_term(on) {
                            Some(t) => terms.push(t),
                            None => ok = false,
                        }
                    }
                    if ok && terms.is_empty() {
                        self.err(Code::Cardinality, c, "<agreement> needs at least one <on>");
                        ok = false;
                    }
                    match (a[0], a[1], ok) {
                        (Some(cl), Some(p), true) => Some(SecurityGoal::Agreement {
                            claimer: cl.to_owned(),
                            peer: p.to_owned(),
                            terms,
                        }),
                        _ => None,
                    }
                }
                other => {
                    self.err(Code::UnknownElement, c, format!("unknown element <{other}> in <goals>"));
                    None
                }
            };
            if let Some(goal) = goal {
                self.sites.insert(Site::Goal(gi), self.loc(c));
                gi += 1;
                b = b.goal(goal);
            }
        }
        b
    }

    fn no_children(&mut self, n: Node<'a, 'input>) {
        for c in self.elements(n) {
            self.err(
                Code::Cardinality,
                c,
                format!("<{}> takes no child elements", n.tag_name().name()),
            );
        }
    }

    /// Exactly one term element inside `n`.
    fn single_term(&mut self, n: Node<'a, 'input>) -> Option<Term> {
        let children = self.elements(n);
        if children.len() != 1 {
            self.err(
                Code::Cardinality,
                n,
                format!(
                    "<{}> must contain exactly one term, found {}",
                    n.tag_name().name(),
                    children.len()
                ),
            );
            for c in children {
                self.term(c);
            }
            return None;
        }
        self.term(children[0])
    }

    fn term(&mut self, n: Node<'a, 'input>) -> Option<Term> {
        match n.tag_name().name() {
            "var" => {
                let a = self.attrs(n, &["name"], &["sort"]);
                self.no_children(n);
                let sort = match a[1] {
                    None | Some("msg") => Sort::Message,
                    Some("fresh") => Sort::Fresh,
                    Some("pub") => Sort::Public,
                    Some(other) => {
                        self.err(Code::BadValue, n, format!("unknown sort `{other}`"));
                        return None;
                    }
                };
                Some(Term::var(a[0]?, sort))
            }
            "const" => {
                let a = self.attrs(n, &["name"], &["sort"]);
                self.no_children(n);
                let sort = match a[1] {
                    None | Some("pub") => Sort::Public,
                    Some("msg") => Sort::Message,
                    Some("fresh") => {
                        self.err(Code::BadSort, n, "constants cannot have sort fresh");
                        return None;
                    }
                    Some(other) => {
                        self.err(Code::BadValue, n, format!("unknown sort `{other}`"));
                        return None;
                    }
                };
                Some(Term::constant(a[0]?, sort))
            }
            "apply" => {
                let a = self.attrs(n, &["fun"], &[]);
                let args: Vec<Option<Term>> =
                    self.elements(n).into_iter().map(|c| self.term(c)).collect();
                let fun = a[0]?;
                let Some(symbol) = self.sig.get(fun).cloned() else {
                    self.err(Code::UndeclaredFunction, n, format!("function `{fun}` is not declared"));
                    return None;
                };
                if args.len() != symbol.arity() {
                    self.err(
                        Code::Arity,
                        n,
                        format!("`{fun}` expects {} argument(s), found {}", symbol.arity(), args.len()),
                    );
                    return None;
                }
                let args: Option<Vec<Term>> = args.into_iter().collect();
                Term::apply(&symbol, args?).ok()
            }
            "tuple" => {
                self.attrs(n, &[], &[]);
                let items: Vec<Option<Term>> =
                    self.elements(n).into_iter().map(|c| self.term(c)).collect();
                if items.len() < 2 {
                    self.err(Code::Cardinality, n, format!("<tuple> needs at least two items, found {}", items.len()));
                    return None;
                }
                let items: Option<Vec<Term>> = items.into_iter().collect();
                Term::tuple(items?).ok()
            }
            other => {
                self.err(Code::UnknownElement, n, format!("<{other}> is not a term"));
                None
            }
        }
    }
}
