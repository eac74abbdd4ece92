use std::io::Write;
use std::sync::Arc;

use compovm_core::types::{Implementation, Native};
use compovm_core::{Type, TypeLoader};

use super::{loader, EXIT_ERROR};
use crate::source::FileSource;
use crate::textio::write_type;

/// Prints every registered name and every type found on the type path.
/// Synthesized array and variable types are left out.
pub(super) fn list(source: &FileSource, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let names = source.scan();
    let loader = loader(source.clone());
    let mut code = 0;
    for name in names {
        if let Err(e) = loader.resolve(&name) {
            let _ = writeln!(err, "{name}: {e}");
            code = EXIT_ERROR;
        }
    }
    for name in loader.names() {
        if !name.contains('<') && !name.ends_with("[]") {
            let _ = writeln!(out, "{name}");
        }
    }
    code
}

fn kind(t: &Type) -> &'static str {
    match t.implementation() {
        Implementation::Native(Native::Value(_)) => "value",
        Implementation::Native(Native::Array(_)) => "array",
        Implementation::Native(Native::Behavior(_)) => "native",
        Implementation::Native(Native::Foreign(_)) => "foreign",
        Implementation::Composed(_) => "composed",
        Implementation::SynthesizedVariable(_) => "variable",
    }
}

/// Interface table, plus the canonical text for composed types.
pub(super) fn show(loader: &Arc<TypeLoader>, name: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let t = match loader.resolve(name) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_ERROR;
        }
    };
    let _ = writeln!(out, "{} ({})", t.name(), kind(&t));
    let mut rows = vec![["name", "valueType", "access", "default", "category"].map(String::from)];
    for p in t.interface().properties() {
        rows.push([
            p.name().to_string(),
            p.value_type().name().to_string(),
            p.access().to_string(),
            p.default_value().map_or("-".to_string(), |v| v.to_string()),
            p.category().to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..5).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    for row in &rows {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    if let Ok(text) = write_type(&t) {
        let _ = write!(out, "\n{text}");
    }
    0
}
