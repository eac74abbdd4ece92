use std::io::{BufRead, Write};
use std::sync::Arc;

use compovm_core::prototype::AccessTarget;
use compovm_core::{create_from_prototype, AccessSet, Error, Prototype, Space, Type, TypeLoader};

use crate::textio::{parse_literal, write_type};

/// A line-oriented composition session. Each verb maps onto one prototype
/// operation; errors are reported and the session continues.
pub struct Shell {
    space: Space,
    proto: Option<Prototype>,
    frozen: Option<Arc<Type>>,
}

fn flags(text: &str) -> Result<AccessSet, String> {
    let inner = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')).unwrap_or(text);
    AccessSet::parse(inner).map_err(|e| e.to_string())
}

fn split_path(path: &str) -> (&str, Option<&str>) {
    match path.split_once('.') {
        Some((a, b)) => (a, Some(b)),
        None => (path, None),
    }
}

fn port(path: &str) -> Result<(&str, &str), String> {
    path.split_once('.').ok_or_else(|| format!("expected NAME.PROP, found `{path}`"))
}

fn usage(verb: &str) -> String {
    let form = match verb {
        "proto" => "proto NAME",
        "iface" => "iface [FLAGS] TYPE NAME [= LIT]",
        "add" => "add DEF TYPE",
        "set" => "set DEF.PROP LIT | set DEF.PROP USE NAME | set NAME LIT",
        "share" => "share DEF.PROP NAME",
        "route" => "route A.P -> B.Q",
        "deny" => "deny NAME|DEF.PROP FLAGS",
        "get" => "get NAME|DEF.PROP",
        "save" => "save FILE",
        _ => "proto iface add set share route deny get pump freeze save quit",
    };
    format!("usage: {form}")
}

impl Shell {
    pub fn new(loader: Arc<TypeLoader>) -> Shell {
        Shell { space: Space::new(loader), proto: None, frozen: None }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    /// The type produced by the last successful `freeze`.
    pub fn frozen(&self) -> Option<&Arc<Type>> {
        self.frozen.as_ref()
    }

    pub fn run(&mut self, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write, prompt: bool) -> i32 {
        let mut line = String::new();
        loop {
            if prompt {
                let _ = write!(out, "> ");
                let _ = out.flush();
            }
            line.clear();
            match input.read_line(&mut line) {
                Ok(0) => return 0,
                Ok(_) => {}
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return 0;
                }
            }
            let trimmed = line.trim();
            if trimmed == "quit" {
                return 0;
            }
            if let Err(message) = self.execute(trimmed, out) {
                let _ = writeln!(err, "error: {message}");
            }
        }
    }

    fn proto(&mut self) -> Result<(&mut Prototype, &mut Space), String> {
        match &mut self.proto {
            Some(p) => Ok((p, &mut self.space)),
            None => Err("no prototype; start one with `proto NAME`".into()),
        }
    }

    /// Executes one line. Output goes to `out`; the error is the diagnostic.
    pub fn execute(&mut self, line: &str, out: &mut dyn Write) -> Result<(), String> {
        if line.is_empty() || line.starts_with('#') {
            return Ok(());
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let verb = words[0];
        let err = |e: Error| e.to_string();
        match (verb, &words[1..]) {
            ("proto", [name]) => {
                self.proto = Some(Prototype::new(&mut self.space, name));
            }
            ("iface", [access, ty, name, rest @ ..]) => {
                let access = flags(access)?;
                let default = match rest {
                    [] => None,
                    ["=", ..] => {
                        let text = line.split_once('=').map(|(_, l)| l.trim()).unwrap_or_default();
                        Some(parse_literal(text).map_err(|e| e.to_string())?)
                    }
                    _ => return Err(usage(verb)),
                };
                let (p, s) = self.proto()?;
                p.add_interface_property(s, name, ty, access, default).map_err(err)?;
            }
            ("add", [def, ty]) => {
                let (p, s) = self.proto()?;
                p.add_component_named(s, def, ty).map_err(err)?;
            }
            ("set", [path, "USE", name]) => {
                let (def, prop) = port(path)?;
                let (p, s) = self.proto()?;
                if p.interface_property(name).is_some() {
                    p.share_property(s, def, prop, name).map_err(err)?;
                } else {
                    p.link_child(s, def, prop, name).map_err(err)?;
                }
            }
            ("set", [path, ..]) if words.len() >= 3 => {
                let text = line[line.find(path).unwrap() + path.len()..].trim();
                let value = parse_literal(text).map_err(|e| e.to_string())?;
                let (p, s) = self.proto()?;
                match split_path(path) {
                    (def, Some(prop)) => p.set_field(s, def, prop, value).map_err(err)?,
                    (name, None) => {
                        let var = p.interface_property(name).ok_or_else(|| format!("unknown name `{name}`"))?;
                        s.set(var.instance(), "value", value).map_err(err)?;
                    }
                }
            }
            ("share", [path, source]) => {
                let (def, prop) = port(path)?;
                let (p, s) = self.proto()?;
                p.share_property(s, def, prop, source).map_err(err)?;
            }
            ("route", [src, "->", dst]) => {
                let (src, dst) = (port(src)?, port(dst)?);
                let (p, s) = self.proto()?;
                p.add_route(s, src, dst).map_err(err)?;
            }
            ("deny", [target, access]) => {
                let deny = flags(access)?;
                let target = match split_path(target) {
                    (def, Some(prop)) => AccessTarget::Slot(def, prop),
                    (name, None) => AccessTarget::Interface(name),
                };
                let (p, s) = self.proto()?;
                p.restrict_access(s, target, deny).map_err(err)?;
            }
            ("get", [path]) => {
                let (p, s) = self.proto()?;
                let (name, prop) = split_path(path);
                let ep = p.endpoint(s, name, prop.unwrap_or("value")).map_err(err)?;
                let value = s.get(ep.instance, ep.prop).map_err(err)?;
                let _ = writeln!(out, "{path} = {value}");
            }
            ("pump", []) => {
                let delivered = self.space.pump();
                let _ = writeln!(out, "pumped {delivered}");
                let faults = self.space.take_faults();
                if !faults.is_empty() {
                    let list: Vec<String> = faults.iter().map(ToString::to_string).collect();
                    return Err(list.join("; "));
                }
            }
            ("freeze", []) => {
                let (p, s) = self.proto()?;
                match create_from_prototype(s, p) {
                    Ok(t) => {
                        let _ = writeln!(out, "frozen {}", t.name());
                        self.frozen = Some(t);
                    }
                    Err(Error::ValidationFault(faults)) => {
                        let list: Vec<String> = faults.iter().map(|f| format!("  {f}")).collect();
                        return Err(format!("validation failed:\n{}", list.join("\n")));
                    }
                    Err(e) => return Err(e.to_string()),
                }
            }
            ("save", [file]) => {
                let t = self.frozen.as_ref().ok_or("nothing frozen yet")?;
                let text = write_type(t).map_err(err)?;
                std::fs::write(file, text).map_err(|e| format!("{file}: {e}"))?;
                let _ = writeln!(out, "saved {file}");
            }
            _ => return Err(usage(verb)),
        }
        Ok(())
    }
}
