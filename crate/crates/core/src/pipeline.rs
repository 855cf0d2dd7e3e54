//! The validate / compile / format pipeline shared by the command-line tool
//! and the HTTP service.

use serde::Serialize;

use crate::analysis::{check_executability, check_goals_located, equation_warnings};
use crate::diagnostic::{has_errors, sort_diagnostics, Diagnostic};
use crate::model::{ProtocolSpec, Site};
use crate::plugin::{get_plugin, NotFound};
use crate::xml::{parse_psv_mapped, serialize_psv, ParseOptions};

/// Process exit codes of the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    /// Diagnostics with at least one error, or `fmt --check` on a
    /// non-canonical file.
    Diagnostics,
    Usage,
    Io,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Diagnostics => 1,
            ExitStatus::Usage => 2,
            ExitStatus::Io => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip)]
    pub spec: Option<ProtocolSpec>,
}

/// Schema validation, executability and goal checks. Diagnostics are in
/// document order.
pub fn validate(input: &[u8]) -> Validation {
    let (doc, map) = match parse_psv_mapped(input, &ParseOptions::default()) {
        Ok(parsed) => parsed,
        Err(diagnostics) => {
            return Validation {
                ok: false,
                diagnostics,
                spec: None,
            }
        }
    };
    let spec = doc.spec;
    let locate = |site: Site| map.get(site);
    let report = check_executability(&spec);
    let mut diagnostics: Vec<Diagnostic> = report
        .violations
        .iter()
        .map(|v| v.to_diagnostic().at(map.step(v.step_index)))
        .collect();
    diagnostics.extend(check_goals_located(&spec, &report, &locate));
    diagnostics.extend(equation_warnings(&spec, &locate));
    sort_diagnostics(&mut diagnostics);
    Validation {
        ok: !has_errors(&diagnostics),
        diagnostics,
        spec: Some(spec),
    }
}

#[derive(Debug, Clone)]
pub struct CompileOutput {
    pub text: String,
    pub extension: &'static str,
    /// Warnings from validation and from the backend.
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone)]
pub enum CompileError {
    Backend(NotFound),
    Invalid(Vec<Diagnostic>),
}

/// Validates `input` and hands it to `backend`. Nothing is produced when
/// validation reports errors.
pub fn compile(input: &[u8], backend: &str) -> Result<CompileOutput, CompileError> {
    let plugin = get_plugin(backend).map_err(CompileError::Backend)?;
    let v = validate(input);
    let spec = match v.spec {
        Some(spec) if v.ok => spec,
        _ => return Err(CompileError::Invalid(v.diagnostics)),
    };
    let out = plugin.compile(&spec).map_err(CompileError::Invalid)?;
    let mut diagnostics = v.diagnostics;
    diagnostics.extend(out.diagnostics);
    Ok(CompileOutput {
        text: out.text,
        extension: plugin.extension(),
        diagnostics,
    })
}

/// Canonical bytes of a schema-valid document.
pub fn format(input: &[u8]) -> Result<Vec<u8>, Vec<Diagnostic>> {
    parse_psv_mapped(input, &ParseOptions::default()).map(|(doc, _)| serialize_psv(&doc))
}

/// `file:line:col: severity code message`, one per line.
pub fn render_diagnostics(file: &str, diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(|d| d.render(file) + "\n")
        .collect()
}

/// `{"ok": .., "diagnostics": [..]}`
pub fn diagnostics_json(diagnostics: &[Diagnostic]) -> serde_json::Value {
    serde_json::json!({
        "ok": !has_errors(diagnostics),
        "diagnostics": diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostic::Code;
    use crate::fixtures;

    #[test]
    fn exit_codes_are_stable() {
        let codes: Vec<u8> = [
            ExitStatus::Success,
            ExitStatus::Diagnostics,
            ExitStatus::Usage,
            ExitStatus::Io,
        ]
        .iter()
        .map(|s| s.code())
        .collect();
        assert_eq!(codes, [0, 1, 2, 3]);
    }

    #[test]
    fn fixtures_validate_clean() {
        for f in fixtures::ALL {
            let v = validate(f.psv.as_bytes());
            assert!(v.ok && v.diagnostics.is_empty(), "{}", f.name);
        }
        let json = diagnostics_json(&validate(fixtures::DHKE.psv.as_bytes()).diagnostics);
        assert_eq!(json.to_string(), r#"{"diagnostics":[],"ok":true}"#);
    }

    #[test]
    fn executability_errors_are_located_at_the_step() {
        let src = fixtures::NSP.psv.replacen(
            "<message from=\"B\" index=\"2\" to=\"A\">",
            "<message from=\"A\" index=\"2\" to=\"B\">",
            1,
        );
        let v = validate(src.as_bytes());
        assert!(!v.ok);
        let d = v.diagnostics.iter().find(|d| d.code == Code::NotConstructible).unwrap();
        assert_eq!(d.step_index, Some(2));
        assert_eq!(d.location.map(|l| l.line), Some(28));
    }

    #[test]
    fn compile_requires_known_backend_and_valid_input() {
        assert!(matches!(
            compile(fixtures::DHKE.psv.as_bytes(), "proverif"),
            Err(CompileError::Backend(_))
        ));
        assert!(matches!(compile(b"<x/>", "tamarin"), Err(CompileError::Invalid(_))));
        let out = compile(fixtures::DHKE.psv.as_bytes(), "tamarin").unwrap();
        assert_eq!(out.extension, "spthy");
        assert!(out.text.starts_with("theory DHKE\n"));
    }
}
