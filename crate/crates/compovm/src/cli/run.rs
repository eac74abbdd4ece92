use std::io::Write;
use std::sync::Arc;

use compovm_core::{Error, InstanceId, Space, TypeLoader};

use super::{EXIT_ERROR, EXIT_EXPECT};
use crate::textio::{self, parse_literal};

/// Parses `(label, text)` files in order, instantiates the single scene and
/// applies the script. Returns the exit code.
pub fn run_scene(
    loader: &Arc<TypeLoader>,
    files: &[(String, String)],
    script: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let mut scenes = Vec::new();
    for (label, text) in files {
        match textio::parse(text, loader) {
            Ok(parsed) => scenes.extend(parsed.scene.map(|s| (label, s))),
            Err(e) => {
                let _ = writeln!(err, "{label}:{e}");
                return EXIT_ERROR;
            }
        }
    }
    let scene = match scenes.as_slice() {
        [(_, scene)] => scene.clone(),
        [] => {
            let _ = writeln!(err, "no scene block in the given files");
            return EXIT_ERROR;
        }
        many => {
            let labels: Vec<&str> = many.iter().map(|(l, _)| l.as_str()).collect();
            let _ = writeln!(err, "more than one scene block: {}", labels.join(", "));
            return EXIT_ERROR;
        }
    };
    let mut space = Space::new(loader.clone());
    let root = match space.instantiate(&scene) {
        Ok(id) => id,
        Err(e) => {
            let _ = writeln!(err, "cannot instantiate scene: {e}");
            return EXIT_ERROR;
        }
    };
    space.pump();
    report_faults(&mut space, err);
    match script {
        Some(text) => run_script(&mut space, root, text, out, err),
        None => 0,
    }
}

fn report_faults(space: &mut Space, err: &mut dyn Write) {
    for fault in space.take_faults() {
        let _ = writeln!(err, "warning: {fault}");
    }
}

/// Resolves `def.def.prop` below `root`.
fn resolve(space: &Space, root: InstanceId, path: &str) -> Result<(InstanceId, String), Error> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let prop = parts.pop().filter(|_| !parts.is_empty()).ok_or_else(|| Error::UnknownName(path.to_string()))?;
    let mut at = root;
    for def in parts {
        at = space.inner_named(at, def).ok_or_else(|| Error::UnknownName(def.to_string()))?;
    }
    Ok((at, prop.to_string()))
}

/// Applies script lines; each `set` is followed by a pump.
pub fn run_script(space: &mut Space, root: InstanceId, text: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let (path, literal) = rest.split_once(char::is_whitespace).map_or((rest, ""), |(p, l)| (p, l.trim()));
        let result: Result<Option<bool>, String> = (|| match verb {
            "pump" => {
                space.pump();
                Ok(None)
            }
            "set" => {
                let (id, prop) = resolve(space, root, path).map_err(|e| e.to_string())?;
                let value = parse_literal(literal).map_err(|e| e.to_string())?;
                space.set(id, prop.as_str(), value).map_err(|e| e.to_string())?;
                space.pump();
                Ok(None)
            }
            "trace" => {
                let (id, prop) = resolve(space, root, path).map_err(|e| e.to_string())?;
                let value = space.get(id, prop.as_str()).map_err(|e| e.to_string())?;
                let _ = writeln!(out, "{path} = {value}");
                Ok(None)
            }
            "expect" => {
                let (id, prop) = resolve(space, root, path).map_err(|e| e.to_string())?;
                let want = parse_literal(literal).map_err(|e| e.to_string())?;
                let got = space.get(id, prop.as_str()).map_err(|e| e.to_string())?;
                if got == want {
                    let _ = writeln!(out, "ok {path} = {got}");
                    Ok(Some(true))
                } else {
                    let _ = writeln!(out, "FAIL {path}: expected {want}, got {got}");
                    Ok(Some(false))
                }
            }
            other => Err(format!("unknown script verb `{other}`")),
        })();
        report_faults(space, err);
        match result {
            Ok(Some(false)) => return EXIT_EXPECT,
            Ok(_) => {}
            Err(message) => {
                let _ = writeln!(err, "script line {}: {message}", n + 1);
                return EXIT_ERROR;
            }
        }
    }
    0
}
