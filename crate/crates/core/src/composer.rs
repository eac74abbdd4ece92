//! Freezing prototypes into composed types, and instantiating those types.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::access::AccessSet;
use crate::error::{Error, Result};
use crate::prototype::Prototype;
use crate::runtime::{Endpoint, Layout, Space};
use crate::types::{Category, Implementation, InterfaceType, PropertyType, Type};
use crate::value::{InstanceId, Value};

/// A context-specific initial value for a composing property.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Literal(Value),
    /// The composing instance at this index.
    Def(usize),
    Array(Vec<Init>),
}

/// How a composed type refines one property of a composing type.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotRefinement {
    pub access: AccessSet,
    pub category: Category,
    pub init: Option<Init>,
}

#[derive(Clone, Debug)]
pub struct ComposingType {
    pub def: String,
    pub component: Arc<Type>,
    pub slots: Vec<SlotRefinement>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Port {
    Interface(usize),
    Inner(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RouteSpec {
    pub src: Port,
    pub dst: Port,
}

/// Composing types in instantiation order (referenced before referencing)
/// and the internal routes.
#[derive(Clone, Debug, Default)]
pub struct ComposedImplementation {
    pub composing: Vec<ComposingType>,
    pub routes: Vec<RouteSpec>,
}

impl ComposedImplementation {
    pub fn def_index(&self, def: &str) -> Option<usize> {
        self.composing.iter().position(|c| c.def == def)
    }

    pub(crate) fn describe(&self, out: &mut String) {
        for c in &self.composing {
            let _ = writeln!(out, "  DEF {} {}", c.def, c.component.name());
            for (p, slot) in c.slots.iter().enumerate() {
                let name = c.component.property(p).map(|p| p.name()).unwrap_or("?");
                let _ = write!(out, "    {name} [{}] {}", slot.access, slot.category);
                if let Some(init) = &slot.init {
                    let _ = write!(out, " = {init:?}");
                }
                out.push('\n');
            }
        }
        for r in &self.routes {
            let _ = writeln!(out, "  ROUTE {:?} -> {:?}", r.src, r.dst);
        }
    }
}

/// Validates, freezes and registers the prototype's type in the space's
/// loader. The prototype stays live and unchanged.
pub fn create_from_prototype(space: &mut Space, proto: &mut Prototype) -> Result<Arc<Type>> {
    if space.loader().is_bound(proto.name()) {
        return Err(Error::NameConflict(proto.name().to_string()));
    }
    let ty = freeze(space, proto)?;
    space.loader().register(ty)
}

/// Validates and freezes without registering.
pub fn freeze(space: &mut Space, proto: &mut Prototype) -> Result<Type> {
    let faults = proto.validate(space);
    if !faults.is_empty() {
        return Err(Error::ValidationFault(faults));
    }
    proto.reorder(space);

    let mut props = Vec::with_capacity(proto.interface.len());
    for entry in &proto.interface {
        let ep = Endpoint::new(entry.var, 0);
        let vt = space.type_of(entry.var)?.property(0).unwrap().value_type().clone();
        props.push(PropertyType::new(entry.name.clone(), vt, space.access(ep)?, Some(space.peek(ep)))?);
    }
    let interface = InterfaceType::new(props)?;

    let index_of = |id: InstanceId| proto.composing.iter().position(|e| e.instance == id);
    let mut composing = Vec::with_capacity(proto.composing.len());
    for entry in &proto.composing {
        let mut slots = Vec::with_capacity(entry.ty.interface().len());
        for (p, prop) in entry.ty.interface().properties().iter().enumerate() {
            let ep = Endpoint::new(entry.instance, p);
            let access = space.access(ep)?;
            let slot = match proto.shared_source(space, ep) {
                Some(k) => SlotRefinement { access, category: Category::External(k), init: None },
                None => {
                    let value = space.peek(ep);
                    let init = (prop.category().has_cell() && prop.default_value() != Some(&value))
                        .then(|| to_init(&value, &index_of))
                        .transpose()?;
                    SlotRefinement { access, category: prop.category(), init }
                }
            };
            slots.push(slot);
        }
        composing.push(ComposingType { def: entry.def.clone(), component: entry.ty.clone(), slots });
    }

    let port = |ep: Endpoint| -> Result<Port> {
        if let Some(k) = proto.interface.iter().position(|e| e.var == ep.instance) {
            return Ok(Port::Interface(k));
        }
        index_of(ep.instance)
            .map(|i| Port::Inner(i, ep.prop))
            .ok_or_else(|| Error::UnknownName(alloc::format!("route endpoint outside {}", proto.name())))
    };
    let mut routes = Vec::with_capacity(proto.routes.len());
    for r in &proto.routes {
        if space.route_endpoints(r.route).is_some() {
            routes.push(RouteSpec { src: port(r.src)?, dst: port(r.dst)? });
        }
    }

    let implementation = Implementation::Composed(ComposedImplementation { composing, routes });
    Ok(Type::new(proto.name(), interface, implementation, Vec::new()))
}

fn to_init(value: &Value, index_of: &dyn Fn(InstanceId) -> Option<usize>) -> Result<Init> {
    Ok(match value {
        Value::Instance(r) => Init::Def(index_of(r.id()).ok_or_else(|| Error::mismatch("composing instance", r.ty().name()))?),
        Value::Array(items) if !value.is_immutable() => {
            Init::Array(items.iter().map(|v| to_init(v, index_of)).collect::<Result<_>>()?)
        }
        _ => Init::Literal(value.clone()),
    })
}

fn materialize(space: &Space, init: &Init, built: &[InstanceId]) -> Result<Value> {
    Ok(match init {
        Init::Literal(v) => v.clone(),
        Init::Def(i) => space.handle(built[*i])?,
        Init::Array(items) => {
            Value::array(items.iter().map(|i| materialize(space, i, built)).collect::<Result<Vec<_>>>()?)
        }
    })
}

/// Builds the composing instances and routes of `outer`, which is on top of
/// the context stack.
pub(crate) fn instantiate_composed(space: &mut Space, ty: &Arc<Type>, outer: InstanceId) -> Result<()> {
    let imp = ty.composed().expect("composed type");
    let mut built = Vec::with_capacity(imp.composing.len());
    for c in &imp.composing {
        let external: Vec<Option<usize>> = c
            .slots
            .iter()
            .map(|s| match s.category {
                Category::External(k) => Some(k),
                _ => None,
            })
            .collect();
        let access: Vec<AccessSet> = c.slots.iter().map(|s| s.access).collect();
        let inner = space.build_instance(&c.component, Layout::ClassBased, Some(&external), Some(&access))?;
        space.push_inner(outer, &c.def, inner);
        for (p, slot) in c.slots.iter().enumerate() {
            if let Some(init) = &slot.init {
                let value = materialize(space, init, &built)?;
                space.write_raw(Endpoint::new(inner, p), value)?;
            }
        }
        built.push(inner);
    }
    for r in &imp.routes {
        let ep = |p: Port| match p {
            Port::Interface(k) => Endpoint::new(outer, k),
            Port::Inner(i, prop) => Endpoint::new(built[i], prop),
        };
        space.add_route_unchecked(ep(r.src), ep(r.dst));
    }
    Ok(())
}
