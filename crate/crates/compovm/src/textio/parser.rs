use std::sync::Arc;

use compovm_core::prototype::AccessTarget;
use compovm_core::{composer, AccessSet, Error, Prototype, Space, Type, TypeLoader, Value};

use super::lexer::{tokenize, Pos, Tok, Token};
use super::TextError;

/// Name given to the type a `scene` block freezes into.
pub const SCENE_NAME: &str = "scene";

/// The types a file defined, in order, plus its scene if it has one. Types
/// are registered in the loader as they are parsed; the scene is not.
#[derive(Debug, Default)]
pub struct ParsedFile {
    pub types: Vec<Arc<Type>>,
    pub scene: Option<Arc<Type>>,
}

pub fn parse(text: &str, loader: &Arc<TypeLoader>) -> Result<ParsedFile, TextError> {
    let mut p = Parser { toks: tokenize(text)?, at: 0, loader, space: Space::new(loader.clone()) };
    p.file()
}

/// Parses a single value literal such as `4`, `-2.5e3`, `"s"` or `[1 2]`.
pub fn parse_literal(text: &str) -> Result<Value, TextError> {
    let loader = TypeLoader::new();
    let mut p = Parser { toks: tokenize(text)?, at: 0, loader: &loader, space: Space::new(loader.clone()) };
    let v = p.literal()?;
    p.expect(Tok::Eof)?;
    Ok(v)
}

enum Val {
    Lit(Value),
    Use(String),
    Node(String),
    Array(Vec<Val>),
}

struct Parser<'a> {
    toks: Vec<Token>,
    at: usize,
    loader: &'a Arc<TypeLoader>,
    space: Space,
}

fn at<T>(pos: Pos) -> impl FnOnce(Error) -> TextError {
    move |source| TextError::Semantic { pos, source }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn unexpected<T>(&self, what: &str) -> Result<T, TextError> {
        Err(TextError::syntax(self.pos(), format!("expected {what}, found {}", self.peek().describe())))
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, TextError> {
        if *self.peek() == tok {
            Ok(self.next().pos)
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, TextError> {
        if self.is_kw(kw) {
            Ok(self.next().pos)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn name(&mut self) -> Result<(String, Pos), TextError> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.next().pos)),
            _ => self.unexpected("a name"),
        }
    }

    fn qname(&mut self) -> Result<(String, Pos), TextError> {
        let (mut name, pos) = self.name()?;
        while *self.peek() == Tok::Dot {
            self.next();
            name.push('.');
            name.push_str(&self.name()?.0);
        }
        Ok((name, pos))
    }

    /// A qualified name with optional `[]` suffixes.
    fn typeref(&mut self) -> Result<(String, Pos), TextError> {
        let (mut name, pos) = self.qname()?;
        while *self.peek() == Tok::LBracket && self.toks[self.at + 1].tok == Tok::RBracket {
            self.at += 2;
            name.push_str("[]");
        }
        Ok((name, pos))
    }

    fn file(&mut self) -> Result<ParsedFile, TextError> {
        let mut parsed = ParsedFile::default();
        loop {
            if self.is_kw("type") {
                parsed.types.push(self.typedef()?);
            } else if self.is_kw("scene") {
                parsed.scene = Some(self.scene()?);
                self.expect(Tok::Eof)?;
                return Ok(parsed);
            } else if *self.peek() == Tok::Eof {
                return Ok(parsed);
            } else {
                return self.unexpected("`type` or `scene`");
            }
        }
    }

    fn typedef(&mut self) -> Result<Arc<Type>, TextError> {
        self.keyword("type")?;
        let (name, pos) = self.qname()?;
        if self.loader.is_bound(&name) {
            return Err(TextError::Semantic { pos, source: Error::NameConflict(name) });
        }
        let mut proto = Prototype::new(&mut self.space, &name);
        self.expect(Tok::LBrace)?;
        self.keyword("interface")?;
        self.expect(Tok::LBrace)?;
        while *self.peek() != Tok::RBrace {
            self.prop(&mut proto)?;
        }
        self.next();
        self.keyword("impl")?;
        self.expect(Tok::LBrace)?;
        self.items(&mut proto)?;
        self.expect(Tok::RBrace)?;
        composer::create_from_prototype(&mut self.space, &mut proto).map_err(at::<()>(pos))
    }

    fn scene(&mut self) -> Result<Arc<Type>, TextError> {
        let pos = self.keyword("scene")?;
        let mut proto = Prototype::new(&mut self.space, SCENE_NAME);
        self.expect(Tok::LBrace)?;
        self.items(&mut proto)?;
        composer::freeze(&mut self.space, &mut proto).map(Arc::new).map_err(at::<()>(pos))
    }

    fn flags(&mut self) -> Result<AccessSet, TextError> {
        self.expect(Tok::LBracket)?;
        let access = match self.peek().clone() {
            Tok::Ident(text) => {
                let pos = self.next().pos;
                AccessSet::parse(&text).map_err(at::<()>(pos))?
            }
            _ => AccessSet::NONE,
        };
        self.expect(Tok::RBracket)?;
        Ok(access)
    }

    fn prop(&mut self, proto: &mut Prototype) -> Result<(), TextError> {
        let access = self.flags()?;
        let (ty, _) = self.typeref()?;
        let (name, pos) = self.name()?;
        let default = if *self.peek() == Tok::Eq {
            self.next();
            Some(self.literal()?)
        } else {
            None
        };
        proto.add_interface_property(&mut self.space, &name, &ty, access, default).map_err(at::<()>(pos))?;
        Ok(())
    }

    /// Items up to and including the closing brace.
    fn items(&mut self, proto: &mut Prototype) -> Result<(), TextError> {
        loop {
            if *self.peek() == Tok::RBrace {
                self.next();
                return Ok(());
            } else if self.is_kw("route") {
                let pos = self.next().pos;
                let src = self.port()?;
                self.expect(Tok::Arrow)?;
                let dst = self.port()?;
                proto
                    .add_route(&mut self.space, (&src.0, &src.1), (&dst.0, &dst.1))
                    .map_err(at::<()>(pos))?;
            } else if self.is_kw("deny") {
                let pos = self.next().pos;
                let (def, prop) = self.port()?;
                let deny = self.flags()?;
                proto
                    .restrict_access(&mut self.space, AccessTarget::Slot(&def, &prop), deny)
                    .map_err(at::<()>(pos))?;
            } else if matches!(self.peek(), Tok::Ident(_)) {
                self.node(proto)?;
            } else {
                return self.unexpected("a node, `route` or `}`");
            }
        }
    }

    fn port(&mut self) -> Result<(String, String), TextError> {
        let (name, _) = self.name()?;
        self.expect(Tok::Dot)?;
        let (prop, _) = self.name()?;
        Ok((name, prop))
    }

    fn fresh_name(&self, proto: &Prototype) -> String {
        (1..)
            .map(|i| format!("_{i}"))
            .find(|n| proto.interface_property(n).is_none() && proto.composing_instance(n).is_none())
            .unwrap()
    }

    fn node(&mut self, proto: &mut Prototype) -> Result<String, TextError> {
        let def = if self.is_kw("DEF") {
            self.next();
            Some(self.name()?)
        } else {
            None
        };
        let (ty, ty_pos) = self.typeref()?;
        let ty = self.loader.resolve(&ty).map_err(at::<()>(ty_pos))?;
        let (def, pos) = def.unwrap_or_else(|| (self.fresh_name(proto), ty_pos));
        proto.add_component(&mut self.space, &def, &ty).map_err(at::<()>(pos))?;
        self.expect(Tok::LBrace)?;
        while *self.peek() != Tok::RBrace {
            let (field, pos) = self.name()?;
            self.expect(Tok::Colon)?;
            let value = self.value(proto)?;
            self.apply(proto, &def, &field, value).map_err(at::<()>(pos))?;
        }
        self.next();
        Ok(def)
    }

    fn apply(&mut self, proto: &mut Prototype, def: &str, field: &str, value: Val) -> Result<(), Error> {
        let space = &mut self.space;
        match value {
            Val::Lit(v) => proto.set_field(space, def, field, v),
            Val::Use(name) if proto.interface_property(&name).is_some() => {
                proto.share_property(space, def, field, &name)
            }
            Val::Use(name) => proto.link_child(space, def, field, &name),
            Val::Node(child) => proto.link_child(space, def, field, &child),
            Val::Array(items) => {
                let v = array_value(space, proto, items)?;
                proto.set_field(space, def, field, v)
            }
        }
    }

    fn value(&mut self, proto: &mut Prototype) -> Result<Val, TextError> {
        match self.peek().clone() {
            Tok::Ident(kw) if kw == "USE" => {
                self.next();
                Ok(Val::Use(self.name()?.0))
            }
            Tok::LBracket => {
                self.next();
                let mut items = Vec::new();
                while *self.peek() != Tok::RBracket {
                    items.push(self.value(proto)?);
                }
                self.next();
                Ok(Val::Array(items))
            }
            Tok::Ident(kw) if !is_literal_word(&kw) => Ok(Val::Node(self.node(proto)?)),
            _ => Ok(Val::Lit(self.literal()?)),
        }
    }

    fn literal(&mut self) -> Result<Value, TextError> {
        let v = match self.peek().clone() {
            Tok::Int(v) => Value::Int(v),
            Tok::Float(v) => Value::Float(v),
            Tok::Str(s) => Value::str(&s),
            Tok::Ident(w) if is_literal_word(&w) => match w.as_str() {
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                "nil" => Value::Nil,
                "nan" => Value::Float(f64::NAN),
                _ => Value::Float(f64::INFINITY),
            },
            Tok::LBracket => {
                self.next();
                let mut items = Vec::new();
                while *self.peek() != Tok::RBracket {
                    items.push(self.literal()?);
                }
                self.next();
                return Ok(Value::array(items));
            }
            _ => return self.unexpected("a literal"),
        };
        self.next();
        Ok(v)
    }
}

fn is_literal_word(w: &str) -> bool {
    matches!(w, "true" | "false" | "nil" | "nan" | "inf")
}

fn array_value(space: &Space, proto: &Prototype, items: Vec<Val>) -> Result<Value, Error> {
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        out.push(match item {
            Val::Lit(v) => v,
            Val::Use(name) | Val::Node(name) => match proto.composing_instance(&name) {
                Some(id) => space.handle(id)?,
                None => return Err(Error::UnknownName(name)),
            },
            Val::Array(inner) => array_value(space, proto, inner)?,
        });
    }
    Ok(Value::array(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use compovm_core::kit;

    fn loader() -> Arc<TypeLoader> {
        let loader = TypeLoader::new();
        kit::register(&loader).unwrap();
        loader
    }

    const DOUBLER: &str = "type demo.Doubler {
      interface { [RWB] Int32 x = 0   [RB] Int32 y = 0 }
      impl { DEF add std.Adder { a: USE x  b: USE x  sum: USE y } }
    }";

    #[test]
    fn doubler_parses_and_doubles() {
        let loader = loader();
        let parsed = parse(DOUBLER, &loader).unwrap();
        assert_eq!(parsed.types.len(), 1);
        assert!(parsed.scene.is_none());
        let t = loader.resolve("demo.Doubler").unwrap();
        let mut s = Space::new(loader);
        let d = s.instantiate(&t).unwrap();
        s.set(d, "x", 21.into()).unwrap();
        s.pump();
        assert_eq!(s.get(d, "y").unwrap(), Value::Int(42));
    }

    #[test]
    fn errors_point_at_the_offending_token() {
        let loader = loader();
        let err = parse("type a.B {\n  interface {}\n  impl { DEF n std.Adder { a: USE nope } }\n}", &loader).unwrap_err();
        assert_eq!((err.pos().line, err.pos().col), (3, 28));
        assert!(matches!(err.model_error(), Some(Error::UnknownName(_))));

        let err = parse("type a.C {\n  interface { [RW] Int32 }\n  impl {} }", &loader).unwrap_err();
        assert!(matches!(err, TextError::Syntax { .. }));
        assert_eq!((err.pos().line, err.pos().col), (2, 26));
    }

    #[test]
    fn duplicate_definitions_conflict() {
        let loader = loader();
        let text = format!("{DOUBLER}\n{DOUBLER}");
        let err = parse(&text, &loader).unwrap_err();
        assert!(matches!(err.model_error(), Some(Error::NameConflict(_))));
        assert_eq!(err.pos().line, 5);
    }

    #[test]
    fn literal_typing_is_nominal() {
        let loader = loader();
        let err = parse("type a.F { interface { [RW] Float64 f = 1 } impl {} }", &loader).unwrap_err();
        assert!(matches!(err.model_error(), Some(Error::TypeMismatch { .. })));
        parse("type a.G { interface { [RW] Float64 f = 1.0 [RWIRIW] Int32[] xs = [1 2] } impl {} }", &loader)
            .unwrap();
    }

    #[test]
    fn scene_must_come_last() {
        let loader = loader();
        let parsed = parse("scene { DEF c std.Counter {} }", &loader).unwrap();
        assert_eq!(parsed.scene.unwrap().name(), SCENE_NAME);
        assert!(!loader.is_bound(SCENE_NAME));
        assert!(parse("scene {} type a.T { interface {} impl {} }", &loader).is_err());
    }

    #[test]
    fn inline_nodes_get_fresh_names() {
        let loader = loader();
        let t = &parse(
            "type a.N { interface {} impl { DEF g std.Group { left: std.Relay {} right: std.Relay {} } } }",
            &loader,
        )
        .unwrap()
        .types[0];
        let defs: Vec<&str> = t.composed().unwrap().composing.iter().map(|c| c.def.as_str()).collect();
        assert_eq!(defs, ["_1", "_2", "g"]);
    }

    #[test]
    fn literals() {
        assert_eq!(parse_literal("-7").unwrap(), Value::Int(-7));
        assert_eq!(parse_literal("[1 [true] \"s\"]").unwrap().to_string(), "[1 [true] \"s\"]");
        assert!(parse_literal("1 2").is_err());
        assert!(matches!(parse_literal("nan").unwrap(), Value::Float(f) if f.is_nan()));
    }
}
