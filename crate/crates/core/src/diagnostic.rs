//! Located diagnostics and the stable code registry.
//!
//! Every code is listed in [`Code::ALL`]; the README carries the same table.
//! Codes never change meaning once released.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Error family a code belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Kind {
    XmlSyntaxError,
    VersionError,
    SchemaError,
    ReferenceError,
    SortError,
    ExecutabilityError,
    GoalError,
    UnsupportedConstruct,
}

macro_rules! codes {
    ($( $variant:ident => $id:literal, $slug:literal, $kind:ident; )*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Code {
            $( $variant, )*
        }

        impl Code {
            pub const ALL: &'static [Code] = &[ $( Code::$variant, )* ];

            pub fn as_str(self) -> &'static str {
                match self { $( Code::$variant => $id, )* }
            }

            /// Short mnemonic, e.g. `dup-role`.
            pub fn slug(self) -> &'static str {
                match self { $( Code::$variant => $slug, )* }
            }

            pub fn kind(self) -> Kind {
                match self { $( Code::$variant => Kind::$kind, )* }
            }

            pub fn from_str_id(id: &str) -> Option<Code> {
                match id { $( $id => Some(Code::$variant), )* _ => None }
            }
        }
    };
}

codes! {
    XmlSyntax => "PSV001", "xml-syntax", XmlSyntaxError;
    Encoding => "PSV002", "encoding", XmlSyntaxError;
    SizeLimit => "PSV003", "size-limit", XmlSyntaxError;
    DtdForbidden => "PSV004", "dtd-forbidden", XmlSyntaxError;
    FormatVersion => "PSV010", "format-version", VersionError;
    UnknownElement => "PSV020", "unknown-element", SchemaError;
    UnknownAttribute => "PSV021", "unknown-attribute", SchemaError;
    MissingAttribute => "PSV022", "missing-attribute", SchemaError;
    Cardinality => "PSV023", "cardinality", SchemaError;
    BadValue => "PSV024", "bad-value", SchemaError;
    UnexpectedText => "PSV025", "unexpected-text", SchemaError;
    StepIndex => "PSV026", "step-index", SchemaError;
    UndeclaredRole => "PSV030", "undeclared-role", ReferenceError;
    UndeclaredFunction => "PSV031", "undeclared-function", ReferenceError;
    DuplicateRole => "PSV032", "dup-role", ReferenceError;
    DuplicateFunction => "PSV033", "dup-function", ReferenceError;
    DuplicateFresh => "PSV034", "dup-fresh", ReferenceError;
    SelfMessage => "PSV035", "self-message", ReferenceError;
    DuplicateBundle => "PSV036", "dup-bundle", ReferenceError;
    Arity => "PSV040", "arity", SortError;
    SortConflict => "PSV041", "sort-conflict", SortError;
    BadSort => "PSV042", "bad-sort", SortError;
    EquationVars => "PSV043", "equation-vars", SortError;
    DestructorShape => "PSV044", "destructor-shape", SortError;
    ForeignFresh => "PSV045", "foreign-fresh", SortError;
    NotConstructible => "EXE001", "not-constructible", ExecutabilityError;
    AtomicUndecomposable => "EXE002", "atomic-undecomposable", ExecutabilityError;
    UnorientedIgnored => "EXE003", "unoriented-ignored", ExecutabilityError;
    GoalUnknown => "GOAL001", "goal-unknown", GoalError;
    Unsupported => "TAM001", "unsupported-construct", UnsupportedConstruct;
    PrivateConstRendered => "TAM002", "msg-constant", UnsupportedConstruct;
    LabelUnbound => "TAM003", "label-unbound", UnsupportedConstruct;
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Code {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Code {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let id = String::deserialize(d)?;
        Code::from_str_id(&id)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown diagnostic code {id}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    pub location: Option<Location>,
    pub step_index: Option<usize>,
}

impl Diagnostic {
    pub fn error(code: Code, message: impl Into<String>) -> Self {
        Self::new(Severity::Error, code, message)
    }

    pub fn warning(code: Code, message: impl Into<String>) -> Self {
        Self::new(Severity::Warning, code, message)
    }

    fn new(severity: Severity, code: Code, message: impl Into<String>) -> Self {
        let message = message.into();
        debug_assert!(!message.is_empty());
        Diagnostic {
            severity,
            code,
            message,
            location: None,
            step_index: None,
        }
    }

    pub fn at(mut self, location: Option<Location>) -> Self {
        self.location = location;
        self
    }

    pub fn in_step(mut self, step: Option<usize>) -> Self {
        self.step_index = step;
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `file:line:col: severity code message`; line and column are omitted
    /// when unknown.
    pub fn render(&self, file: &str) -> String {
        let mut out = String::from(file);
        if let Some(loc) = self.location {
            out.push_str(&format!(":{}:{}", loc.line, loc.column));
        }
        out.push_str(&format!(": {} {} {}", self.severity, self.code, self.message));
        if let (None, Some(step)) = (self.location, self.step_index) {
            out.push_str(&format!(" (step {step})"));
        }
        out
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}

/// Stable document order: located diagnostics by position, then the rest in
/// emission order.
pub fn sort_diagnostics(diagnostics: &mut [Diagnostic]) {
    diagnostics.sort_by_key(|d| match d.location {
        Some(loc) => (0, loc.line, loc.column),
        None => (1, 0, 0),
    });
}
