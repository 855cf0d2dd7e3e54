//! Back-end plugins. Each plugin translates a validated specification into
//! the text of one target language.

use std::fmt;

use crate::diagnostic::Diagnostic;
use crate::model::ProtocolSpec;
use crate::tamarin::{compile_tamarin, render_theory};

/// Text produced by a plugin plus its non-fatal diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PluginOutput {
    pub text: String,
    pub diagnostics: Vec<Diagnostic>,
}

pub trait BackendPlugin: Send + Sync {
    fn id(&self) -> &'static str;

    /// File extension of the output, without the dot.
    fn extension(&self) -> &'static str;

    /// Pure and deterministic.
    fn compile(&self, spec: &ProtocolSpec) -> Result<PluginOutput, Vec<Diagnostic>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TamarinPlugin;

impl BackendPlugin for TamarinPlugin {
    fn id(&self) -> &'static str {
        "tamarin"
    }

    fn extension(&self) -> &'static str {
        "spthy"
    }

    fn compile(&self, spec: &ProtocolSpec) -> Result<PluginOutput, Vec<Diagnostic>> {
        let c = compile_tamarin(spec)?;
        Ok(PluginOutput {
            text: render_theory(&c.theory),
            diagnostics: c.warnings,
        })
    }
}

static PLUGINS: &[&dyn BackendPlugin] = &[&TamarinPlugin];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotFound {
    pub id: String,
}

impl fmt::Display for NotFound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown backend `{}`; available: {}",
            self.id,
            list_plugins().join(", ")
        )
    }
}

impl std::error::Error for NotFound {}

pub fn list_plugins() -> Vec<&'static str> {
    PLUGINS.iter().map(|p| p.id()).collect()
}

pub fn get_plugin(id: &str) -> Result<&'static dyn BackendPlugin, NotFound> {
    PLUGINS
        .iter()
        .copied()
        .find(|p| p.id() == id)
        .ok_or_else(|| NotFound { id: id.to_owned() })
}
