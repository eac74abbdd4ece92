//! Mutable, live prototypes from which composed types are extracted.
//!
//! A prototype owns typed variables for its interface and composing
//! instances created with the prototype-oriented layout, where each property
//! is backed by its own property prototype. Sharing a property re-points that
//! slot at an interface variable, so both sides observe one cell.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::access::AccessSet;
use crate::error::{Error, Fault, Result};
use crate::runtime::{Endpoint, Layout, RouteId, Slot, Space};
use crate::types::{is_identifier, is_qualified_name, lookup_property, Type};
use crate::value::{InstanceId, Value};

/// Live handle to an interface property prototype.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PropertyPrototype {
    var: InstanceId,
}

impl PropertyPrototype {
    /// The typed variable; its `value` property is the handle.
    pub fn instance(&self) -> InstanceId {
        self.var
    }

    pub fn endpoint(&self) -> Endpoint {
        Endpoint::new(self.var, 0)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct InterfaceEntry {
    pub(crate) name: String,
    pub(crate) var: InstanceId,
}

#[derive(Clone, Debug)]
pub(crate) struct ComposingEntry {
    pub(crate) def: String,
    pub(crate) instance: InstanceId,
    pub(crate) ty: Arc<Type>,
    seq: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct RouteEntry {
    pub(crate) src: Endpoint,
    pub(crate) dst: Endpoint,
    pub(crate) route: RouteId,
}

/// What a composing instance's property is bound to.
#[derive(Clone, Debug, PartialEq)]
pub enum SlotKind {
    /// Own property prototype holding the component default.
    Own,
    /// Shares the named interface property prototype.
    Shared(String),
    /// Own property prototype holding a context-specific value.
    Override(Value),
    /// Uses the named composing instance as the value.
    ChildRef(String),
    /// Delegates to a foreign object.
    Foreign,
}

/// Target of an access restriction.
#[derive(Clone, Copy, Debug)]
pub enum AccessTarget<'a> {
    Interface(&'a str),
    Slot(&'a str, &'a str),
}

#[derive(Debug)]
pub struct Prototype {
    name: String,
    order: u32,
    pub(crate) interface: Vec<InterfaceEntry>,
    /// Kept in canonical order: children before parents, otherwise by
    /// insertion.
    pub(crate) composing: Vec<ComposingEntry>,
    pub(crate) routes: Vec<RouteEntry>,
    next_seq: usize,
}

enum Named {
    Interface(usize),
    Composing(usize),
}

impl Prototype {
    /// An empty prototype living in `space`.
    pub fn new(space: &mut Space, name: &str) -> Prototype {
        Prototype {
            name: name.to_string(),
            order: space.allocate_top(),
            interface: Vec::new(),
            composing: Vec::new(),
            routes: Vec::new(),
            next_seq: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: &str) {
        self.name = name.to_string();
    }

    pub fn interface_names(&self) -> impl Iterator<Item = &str> {
        self.interface.iter().map(|e| e.name.as_str())
    }

    pub fn def_names(&self) -> impl Iterator<Item = &str> {
        self.composing.iter().map(|e| e.def.as_str())
    }

    pub fn interface_property(&self, name: &str) -> Option<PropertyPrototype> {
        self.interface.iter().find(|e| e.name == name).map(|e| PropertyPrototype { var: e.var })
    }

    pub fn composing_instance(&self, def: &str) -> Option<InstanceId> {
        self.composing.iter().find(|e| e.def == def).map(|e| e.instance)
    }

    fn named(&self, name: &str) -> Option<Named> {
        if let Some(i) = self.interface.iter().position(|e| e.name == name) {
            return Some(Named::Interface(i));
        }
        self.composing.iter().position(|e| e.def == name).map(Named::Composing)
    }

    fn check_unused(&self, name: &str) -> Result<()> {
        if !is_identifier(name) {
            return Err(Error::InvalidName(name.to_string()));
        }
        if self.named(name).is_some() {
            return Err(Error::NameConflict(name.to_string()));
        }
        Ok(())
    }

    fn composing_index(&self, def: &str) -> Result<usize> {
        self.composing.iter().position(|e| e.def == def).ok_or_else(|| Error::UnknownName(def.to_string()))
    }

    /// Resolves `NAME.PROP` in the single namespace: an interface name
    /// addresses its variable's `value`, a DEF name a composing property.
    pub fn endpoint(&self, space: &Space, name: &str, prop: &str) -> Result<Endpoint> {
        match self.named(name) {
            Some(Named::Interface(i)) => space.endpoint(self.interface[i].var, prop),
            Some(Named::Composing(i)) => space.endpoint(self.composing[i].instance, prop),
            None => Err(Error::UnknownName(name.to_string())),
        }
    }

    /// Adds an interface property backed by a fresh typed variable. The
    /// variable is live immediately.
    pub fn add_interface_property(
        &mut self,
        space: &mut Space,
        name: &str,
        value_type: &str,
        access: AccessSet,
        default: Option<Value>,
    ) -> Result<PropertyPrototype> {
        self.check_unused(name)?;
        let vt = space.loader().resolve(value_type)?;
        let var_type = space.loader().synthesize_variable_type(&vt);
        let full = var_type.property(0).expect("variable property").access();
        access.check(vt.is_array())?;
        if !access.is_subset(full) {
            return Err(Error::InvalidAccess(alloc::format!("{access} exceeds {full}")));
        }
        if let Some(d) = &default {
            crate::types::check_value(&vt, d)?;
            if !d.is_immutable() {
                return Err(Error::mismatch("immutable value", d.kind()));
            }
        }
        let initial = default.clone().or_else(|| vt.zero_value()).unwrap_or_default();
        let var = space.new_variable(&var_type, initial, false);
        space.narrow(Endpoint::new(var, 0), full - access)?;
        space.assign_order(var, alloc::vec![self.order], self.interface.len() as u32);
        self.interface.push(InterfaceEntry { name: name.to_string(), var });
        Ok(PropertyPrototype { var })
    }

    /// Instantiates a component inside the prototype with the
    /// prototype-oriented layout.
    pub fn add_component(&mut self, space: &mut Space, def: &str, ty: &Arc<Type>) -> Result<InstanceId> {
        self.check_unused(def)?;
        if !ty.is_component() {
            return Err(Error::NotAComponent(ty.name().to_string()));
        }
        let instance = space.build_instance(ty, Layout::PrototypeOriented, None, None)?;
        self.composing.push(ComposingEntry { def: def.to_string(), instance, ty: ty.clone(), seq: self.next_seq });
        self.next_seq += 1;
        self.reorder(space);
        Ok(instance)
    }

    pub fn add_component_named(&mut self, space: &mut Space, def: &str, type_name: &str) -> Result<InstanceId> {
        let ty = space.loader().resolve(type_name)?;
        self.add_component(space, def, &ty)
    }

    /// Makes a composing property share an interface property prototype.
    pub fn share_property(&mut self, space: &mut Space, def: &str, prop: &str, source: &str) -> Result<()> {
        let c = self.composing_index(def)?;
        let ep = space.endpoint(self.composing[c].instance, prop)?;
        let entry = self.interface.iter().find(|e| e.name == source).ok_or_else(|| {
            Error::UnknownName(source.to_string())
        })?;
        let slot_type = self.composing[c].ty.property(ep.prop).unwrap().value_type().clone();
        let source_type = space.type_of(entry.var)?.property(0).unwrap().value_type().clone();
        if !compatible(&slot_type, &source_type) {
            return Err(Error::mismatch(slot_type.name(), source_type.name()));
        }
        space.repoint(ep, entry.var)
    }

    /// Records a context-specific value for a composing property. Instance
    /// values must be composing instances of this prototype and keep the
    /// reference graph acyclic.
    pub fn set_field(&mut self, space: &mut Space, def: &str, prop: &str, value: Value) -> Result<()> {
        let c = self.composing_index(def)?;
        let parent = self.composing[c].instance;
        let ep = space.endpoint(parent, prop)?;
        let mut children = Vec::new();
        let mut foreign = None;
        value.for_each_instance(&mut |r| match self.composing.iter().position(|e| e.instance == r.id()) {
            Some(i) => children.push(i),
            None => foreign = Some(r.ty().name().to_string()),
        });
        if let Some(name) = foreign {
            return Err(Error::mismatch("composing instance of this prototype", name));
        }
        let edges = self.reference_edges(space);
        for child in children {
            if child == c || reaches(&edges, child, c) {
                return Err(Error::CycleDetected {
                    from: def.to_string(),
                    to: self.composing[child].def.clone(),
                });
            }
        }
        space.write_internal(ep, value)?;
        self.reorder(space);
        Ok(())
    }

    /// Uses a composing instance as the value of another's property.
    pub fn link_child(&mut self, space: &mut Space, parent: &str, prop: &str, child: &str) -> Result<()> {
        let c = self.composing_index(child)?;
        let handle = space.handle(self.composing[c].instance)?;
        self.set_field(space, parent, prop, handle)
    }

    /// Adds a route between two `NAME.PROP` endpoints; live immediately.
    pub fn add_route(
        &mut self,
        space: &mut Space,
        src: (&str, &str),
        dst: (&str, &str),
    ) -> Result<RouteId> {
        let s = self.endpoint(space, src.0, src.1)?;
        let d = self.endpoint(space, dst.0, dst.1)?;
        let route = space.add_route(s, d)?;
        self.routes.push(RouteEntry { src: s, dst: d, route });
        Ok(route)
    }

    /// Narrows access rights; enforcement starts immediately.
    pub fn restrict_access(&mut self, space: &mut Space, target: AccessTarget<'_>, deny: AccessSet) -> Result<()> {
        let ep = match target {
            AccessTarget::Interface(name) => self
                .interface_property(name)
                .ok_or_else(|| Error::UnknownName(name.to_string()))?
                .endpoint(),
            AccessTarget::Slot(def, prop) => {
                let c = self.composing_index(def)?;
                space.endpoint(self.composing[c].instance, prop)?
            }
        };
        space.narrow(ep, deny)
    }

    /// Describes how a composing property is currently bound.
    pub fn slot(&self, space: &Space, def: &str, prop: &str) -> Result<SlotKind> {
        let c = self.composing_index(def)?;
        let entry = &self.composing[c];
        let p = lookup_property(&entry.ty, prop)?;
        let ep = Endpoint::new(entry.instance, p);
        Ok(match space.slot(ep) {
            Some(Slot::Proto(var)) => {
                if let Some(i) = self.interface.iter().find(|e| e.var == var) {
                    SlotKind::Shared(i.name.clone())
                } else {
                    let value = space.peek(ep);
                    if let Some(r) = value.as_instance() {
                        match self.composing.iter().find(|e| e.instance == r.id()) {
                            Some(child) => SlotKind::ChildRef(child.def.clone()),
                            None => SlotKind::Override(value),
                        }
                    } else if Some(&value) == entry.ty.property(p).unwrap().default_value() {
                        SlotKind::Own
                    } else {
                        SlotKind::Override(value)
                    }
                }
            }
            _ => SlotKind::Foreign,
        })
    }

    /// Index of the interface entry a slot shares, if any.
    pub(crate) fn shared_source(&self, space: &Space, ep: Endpoint) -> Option<usize> {
        match space.slot(ep) {
            Some(Slot::Proto(var)) => self.interface.iter().position(|e| e.var == var),
            _ => None,
        }
    }

    /// Edges parent -> child (composing indices) of the reference graph,
    /// read from the current property values.
    pub(crate) fn reference_edges(&self, space: &Space) -> Vec<Vec<usize>> {
        self.composing
            .iter()
            .map(|entry| {
                let mut out = Vec::new();
                for p in 0..entry.ty.interface().len() {
                    space.peek(Endpoint::new(entry.instance, p)).for_each_instance(&mut |r| {
                        if let Some(i) = self.composing.iter().position(|e| e.instance == r.id()) {
                            if !out.contains(&i) {
                                out.push(i);
                            }
                        }
                    });
                }
                out
            })
            .collect()
    }

    /// Restores canonical order: a stable topological sort placing children
    /// before parents, ties broken by insertion. Leaves the order alone when
    /// the graph has a cycle.
    pub(crate) fn reorder(&mut self, space: &mut Space) {
        let edges = self.reference_edges(space);
        let n = self.composing.len();
        let mut placed = alloc::vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n)
                .filter(|&i| !placed[i] && edges[i].iter().all(|&c| placed[c]))
                .min_by_key(|&i| self.composing[i].seq);
            match next {
                Some(i) => {
                    placed[i] = true;
                    order.push(i);
                }
                None => break,
            }
        }
        if order.len() == n {
            let mut entries: Vec<Option<ComposingEntry>> = self.composing.drain(..).map(Some).collect();
            self.composing = order.into_iter().map(|i| entries[i].take().unwrap()).collect();
        }
        for (i, entry) in self.composing.iter().enumerate() {
            space.assign_order(entry.instance, alloc::vec![self.order, i as u32], 0);
        }
    }

    /// Checks everything that would prevent transformation into a type.
    /// An empty list means the prototype is valid.
    pub fn validate(&self, space: &Space) -> Vec<Fault> {
        let mut faults = Vec::new();
        if self.name.is_empty() {
            faults.push(Fault::EmptyName);
        } else if !is_qualified_name(&self.name) {
            faults.push(Fault::InvalidName(self.name.clone()));
        }
        let mut names: Vec<&str> = self.interface_names().chain(self.def_names()).collect();
        names.sort_unstable();
        for pair in names.windows(2) {
            if pair[0] == pair[1] {
                faults.push(Fault::NameConflict(pair[0].to_string()));
            }
        }
        let edges = self.reference_edges(space);
        if let Some(cycle) = find_cycle(&edges) {
            faults.push(Fault::CycleDetected(cycle.into_iter().map(|i| self.composing[i].def.clone()).collect()));
        }
        for entry in &self.interface {
            let value = space.peek(Endpoint::new(entry.var, 0));
            let vt = space.type_of(entry.var).unwrap().property(0).unwrap().value_type().clone();
            if !value.is_immutable() || !vt.conforms(&value) {
                faults.push(Fault::NotAComponent(entry.name.clone()));
            }
        }
        for entry in &self.composing {
            for (p, prop) in entry.ty.interface().properties().iter().enumerate() {
                let ep = Endpoint::new(entry.instance, p);
                if let Some(k) = self.shared_source(space, ep) {
                    let iface = &self.interface[k];
                    let var_prop = space.type_of(iface.var).unwrap().property(0).unwrap().value_type().clone();
                    if !compatible(prop.value_type(), &var_prop) {
                        faults.push(Fault::IncompatibleSharing { def: entry.def.clone(), prop: prop.name().to_string() });
                    }
                    let access = space.access(Endpoint::new(iface.var, 0)).unwrap();
                    if access.is_subset(AccessSet::R | AccessSet::IR) {
                        let fault = Fault::ImmutableShared(iface.name.clone());
                        if !faults.contains(&fault) {
                            faults.push(fault);
                        }
                    }
                } else {
                    let mut foreign = false;
                    space.peek(ep).for_each_instance(&mut |r| {
                        foreign |= !self.composing.iter().any(|e| e.instance == r.id());
                    });
                    if foreign {
                        faults.push(Fault::ForeignReference { def: entry.def.clone(), prop: prop.name().to_string() });
                    }
                }
            }
        }
        for r in &self.routes {
            let label = alloc::format!("{} -> {}", self.port_label(space, r.src), self.port_label(space, r.dst));
            let reason = if !space.access(r.src).unwrap().contains(AccessSet::B) {
                Some("source is not bound")
            } else if !space.access(r.dst).unwrap().contains(AccessSet::W) {
                Some("target is not writable")
            } else {
                let st = space.type_of(r.src.instance).unwrap().property(r.src.prop).unwrap().value_type().clone();
                let dt = space.type_of(r.dst.instance).unwrap().property(r.dst.prop).unwrap().value_type().clone();
                (!st.assignable_to(&dt)).then_some("value types do not conform")
            };
            if let Some(reason) = reason {
                faults.push(Fault::IllegalRoute { route: label, reason: reason.to_string() });
            }
        }
        faults
    }

    fn port_label(&self, space: &Space, ep: Endpoint) -> String {
        let prop = space
            .type_of(ep.instance)
            .ok()
            .and_then(|t| t.property(ep.prop))
            .map(|p| p.name().to_string())
            .unwrap_or_default();
        let owner = self
            .interface
            .iter()
            .find(|e| e.var == ep.instance)
            .map(|e| e.name.clone())
            .or_else(|| self.composing.iter().find(|e| e.instance == ep.instance).map(|e| e.def.clone()))
            .unwrap_or_default();
        alloc::format!("{owner}.{prop}")
    }
}

/// Shared storage must accept every value either side can write.
fn compatible(a: &Type, b: &Type) -> bool {
    a.assignable_to(b) && b.assignable_to(a)
}

fn reaches(edges: &[Vec<usize>], from: usize, to: usize) -> bool {
    let mut seen = alloc::vec![false; edges.len()];
    let mut stack = alloc::vec![from];
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if !core::mem::replace(&mut seen[n], true) {
            stack.extend(edges[n].iter().copied());
        }
    }
    false
}

fn find_cycle(edges: &[Vec<usize>]) -> Option<Vec<usize>> {
    fn visit(n: usize, edges: &[Vec<usize>], state: &mut [u8], path: &mut Vec<usize>) -> Option<Vec<usize>> {
        state[n] = 1;
        path.push(n);
        for &m in &edges[n] {
            if state[m] == 1 {
                let start = path.iter().position(|&x| x == m).unwrap();
                let mut cycle = path[start..].to_vec();
                cycle.push(m);
                return Some(cycle);
            }
            if state[m] == 0 {
                if let Some(c) = visit(m, edges, state, path) {
                    return Some(c);
                }
            }
        }
        path.pop();
        state[n] = 2;
        None
    }
    let mut state = alloc::vec![0u8; edges.len()];
    for n in 0..edges.len() {
        if state[n] == 0 {
            if let Some(c) = visit(n, edges, &mut state, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}
