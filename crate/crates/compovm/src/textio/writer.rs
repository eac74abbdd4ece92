use std::fmt::Write;

use compovm_core::composer::{ComposedImplementation, Init, Port};
use compovm_core::{Category, Error, Type, Value};

use super::ParsedFile;

/// Canonical text of a composed type: properties in index order, nodes in
/// instantiation order, then access restrictions, then routes.
pub fn write_type(t: &Type) -> Result<String, Error> {
    let imp = t.composed().ok_or_else(|| Error::NotSerializable(t.name().to_string()))?;
    let mut out = format!("type {} {{\n", t.name());
    let props = t.interface().properties();
    if props.is_empty() {
        out.push_str("  interface {}\n");
    } else {
        out.push_str("  interface {\n");
        for p in props {
            let _ = write!(out, "    [{}] {} {}", p.access(), p.value_type().name(), p.name());
            match p.default_value() {
                Some(Value::Nil) | None => {}
                Some(d) => {
                    let _ = write!(out, " = {d}");
                }
            }
            out.push('\n');
        }
        out.push_str("  }\n");
    }
    let items = impl_lines(t, imp);
    if items.is_empty() {
        out.push_str("  impl {}\n");
    } else {
        out.push_str("  impl {\n");
        for line in items {
            let _ = writeln!(out, "    {line}");
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    Ok(out)
}

/// A scene block for an interface-less composed type.
pub fn write_scene(t: &Type) -> Result<String, Error> {
    let imp = t.composed().ok_or_else(|| Error::NotSerializable(t.name().to_string()))?;
    let items = impl_lines(t, imp);
    if items.is_empty() {
        return Ok("scene {}\n".to_string());
    }
    let mut out = String::from("scene {\n");
    for line in items {
        let _ = writeln!(out, "  {line}");
    }
    out.push_str("}\n");
    Ok(out)
}

pub fn write_file(file: &ParsedFile) -> Result<String, Error> {
    let mut blocks = file.types.iter().map(|t| write_type(t)).collect::<Result<Vec<_>, _>>()?;
    if let Some(scene) = &file.scene {
        blocks.push(write_scene(scene)?);
    }
    Ok(blocks.join("\n"))
}

fn impl_lines(t: &Type, imp: &ComposedImplementation) -> Vec<String> {
    let iface = |k: usize| t.property(k).map(|p| p.name().to_string()).unwrap_or_default();
    let mut lines = Vec::new();
    let mut denies = Vec::new();
    for c in &imp.composing {
        let mut fields = Vec::new();
        for (p, slot) in c.slots.iter().enumerate() {
            let prop = c.component.property(p).expect("slot per property");
            match (&slot.category, &slot.init) {
                (Category::External(k), _) => fields.push(format!("{}: USE {}", prop.name(), iface(*k))),
                (_, Some(init)) => fields.push(format!("{}: {}", prop.name(), init_text(imp, init))),
                _ => {}
            }
            let denied = prop.access() - slot.access;
            if denied != compovm_core::AccessSet::NONE {
                denies.push(format!("deny {}.{} [{denied}]", c.def, prop.name()));
            }
        }
        if fields.is_empty() {
            lines.push(format!("DEF {} {} {{}}", c.def, c.component.name()));
        } else {
            lines.push(format!("DEF {} {} {{ {} }}", c.def, c.component.name(), fields.join(" ")));
        }
    }
    lines.extend(denies);
    let port = |p: Port| match p {
        Port::Interface(k) => format!("{}.value", iface(k)),
        Port::Inner(i, prop) => {
            let c = &imp.composing[i];
            format!("{}.{}", c.def, c.component.property(prop).map(|p| p.name()).unwrap_or_default())
        }
    };
    for r in &imp.routes {
        lines.push(format!("route {} -> {}", port(r.src), port(r.dst)));
    }
    lines
}

fn init_text(imp: &ComposedImplementation, init: &Init) -> String {
    match init {
        Init::Literal(v) => v.to_string(),
        Init::Def(i) => format!("USE {}", imp.composing[*i].def),
        Init::Array(items) => {
            let parts: Vec<String> = items.iter().map(|i| init_text(imp, i)).collect();
            format!("[{}]", parts.join(" "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::parse;
    use compovm_core::{kit, TypeLoader};

    #[test]
    fn native_types_are_not_serializable() {
        let loader = TypeLoader::new();
        kit::register(&loader).unwrap();
        let adder = loader.resolve("std.Adder").unwrap();
        assert!(matches!(write_type(&adder), Err(Error::NotSerializable(_))));
    }

    #[test]
    fn empty_type_writes_empty_blocks() {
        let loader = TypeLoader::new();
        let t = &parse("type e.E { interface {} impl {} }", &loader).unwrap().types[0];
        assert_eq!(write_type(t).unwrap(), "type e.E {\n  interface {}\n  impl {}\n}\n");
    }

    #[test]
    fn floats_and_strings_round_trip() {
        let loader = TypeLoader::new();
        let src = "type e.F {\n  interface {\n    [RW] Float64 f = 2.0\n    [RW] Float64 g = -inf\n    [RW] String s = \"a\\\"b\"\n  }\n  impl {}\n}\n";
        let t = &parse(src, &loader).unwrap().types[0];
        assert_eq!(write_type(t).unwrap(), src);
    }
}
