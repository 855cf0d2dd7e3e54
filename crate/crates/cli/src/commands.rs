//! Subcommand implementations. Output goes to the given writers so tests can
//! capture it.

use std::io::Write;
use std::path::{Path, PathBuf};

use metacp_core::pipeline::{
    self, compile, diagnostics_json, render_diagnostics, validate, CompileError, ExitStatus,
};

fn read_input(path: &Path, err: &mut dyn Write) -> Result<Vec<u8>, ExitStatus> {
    std::fs::read(path).map_err(|e| {
        let _ = writeln!(err, "{}: cannot read: {e}", path.display());
        ExitStatus::Io
    })
}

pub fn cmd_validate(path: &Path, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let input = match read_input(path, err) {
        Ok(i) => i,
        Err(s) => return s,
    };
    let v = validate(&input);
    let written = if json {
        writeln!(out, "{}", diagnostics_json(&v.diagnostics))
    } else {
        write!(err, "{}", render_diagnostics(&path.display().to_string(), &v.diagnostics))
    };
    if written.is_err() {
        return ExitStatus::Io;
    }
    if v.ok {
        ExitStatus::Success
    } else {
        ExitStatus::Diagnostics
    }
}

/// `<dir>/<stem>.<ext>` next to the input, with `.psv.xml` or the last
/// extension removed.
pub fn default_output(input: &Path, extension: &str) -> PathBuf {
    let file = input.file_name().and_then(|f| f.to_str()).unwrap_or("out");
    let stem = file
        .strip_suffix(".psv.xml")
        .or_else(|| file.rsplit_once('.').map(|(s, _)| s))
        .unwrap_or(file);
    input.with_file_name(format!("{stem}.{extension}"))
}

pub fn cmd_compile(
    path: &Path,
    backend: &str,
    output: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    if let Err(e) = metacp_core::plugin::get_plugin(backend) {
        let _ = writeln!(err, "{e}");
        return ExitStatus::Usage;
    }
    let input = match read_input(path, err) {
        Ok(i) => i,
        Err(s) => return s,
    };
    let file = path.display().to_string();
    let compiled = match compile(&input, backend) {
        Ok(c) => c,
        Err(CompileError::Backend(e)) => {
            let _ = writeln!(err, "{e}");
            return ExitStatus::Usage;
        }
        Err(CompileError::Invalid(diags)) => {
            let _ = write!(err, "{}", render_diagnostics(&file, &diags));
            return ExitStatus::Diagnostics;
        }
    };
    let _ = write!(err, "{}", render_diagnostics(&file, &compiled.diagnostics));
    match output {
        Some(p) if p == Path::new("-") => match out.write_all(compiled.text.as_bytes()) {
            Ok(()) => ExitStatus::Success,
            Err(_) => ExitStatus::Io,
        },
        _ => {
            let target = output
                .map(Path::to_path_buf)
                .unwrap_or_else(|| default_output(path, compiled.extension));
            match std::fs::write(&target, compiled.text) {
                Ok(()) => ExitStatus::Success,
                Err(e) => {
                    let _ = writeln!(err, "{}: cannot write: {e}", target.display());
                    ExitStatus::Io
                }
            }
        }
    }
}

pub fn cmd_fmt(path: &Path, check: bool, err: &mut dyn Write) -> ExitStatus {
    let input = match read_input(path, err) {
        Ok(i) => i,
        Err(s) => return s,
    };
    let file = path.display().to_string();
    let canonical = match pipeline::format(&input) {
        Ok(c) => c,
        Err(diags) => {
            let _ = write!(err, "{}", render_diagnostics(&file, &diags));
            return ExitStatus::Diagnostics;
        }
    };
    if canonical == input {
        return ExitStatus::Success;
    }
    if check {
        let _ = writeln!(err, "{file}: not in canonical form");
        return ExitStatus::Diagnostics;
    }
    match write_replacing(path, &canonical) {
        Ok(()) => ExitStatus::Success,
        Err(e) => {
            let _ = writeln!(err, "{file}: cannot write: {e}");
            ExitStatus::Io
        }
    }
}

fn write_replacing(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
