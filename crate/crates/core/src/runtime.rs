//! Instances, property storage, change events and routes.
//!
//! Every mutable property value lives in a cell. Several endpoints (an
//! instance plus a property index) may resolve to one cell: External slots of
//! composed instances and shared property prototypes both alias a cell owned
//! elsewhere. A write to a cell notifies every aliasing endpoint, in a
//! canonical order derived from each instance's position in its composition,
//! so that a prototype and an instance of its frozen type behave identically.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU32, Ordering};

use crate::access::{narrow_access, AccessSet};
use crate::composer;
use crate::error::{Error, Result};
use crate::loader::TypeLoader;
use crate::native::{Behavior, ForeignObject};
use crate::types::{check_value, lookup_property, Implementation, Native, Type};
use crate::value::{InstanceId, InstanceRef, Value};

static NEXT_SPACE: AtomicU32 = AtomicU32::new(1);

/// An instance property: the unit routes, listeners and aliases attach to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub instance: InstanceId,
    pub prop: usize,
}

impl Endpoint {
    pub fn new(instance: InstanceId, prop: usize) -> Endpoint {
        Endpoint { instance, prop }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouteId(u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubscriptionId(u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct CellId(u32);

/// Property addressing by ordinal or by name.
pub trait PropKey {
    fn index_in(&self, ty: &Type) -> Result<usize>;
}

impl PropKey for usize {
    fn index_in(&self, ty: &Type) -> Result<usize> {
        if *self < ty.interface().len() {
            Ok(*self)
        } else {
            Err(Error::UnknownProperty { owner: ty.name().to_string(), name: alloc::format!("#{self}") })
        }
    }
}

impl PropKey for &str {
    fn index_in(&self, ty: &Type) -> Result<usize> {
        lookup_property(ty, self)
    }
}

impl PropKey for &String {
    fn index_in(&self, ty: &Type) -> Result<usize> {
        lookup_property(ty, self)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Slot {
    /// Read from the property type's default.
    Immutable,
    Cell(CellId),
    /// Delegates to a property of the enclosing composed instance.
    External { outer: InstanceId, prop: usize },
    /// Prototype-oriented indirection through a property prototype variable.
    Proto(InstanceId),
    /// Delegates to a wrapped foreign object.
    Foreign,
}

/// How the instance implementation is laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Layout {
    /// Index-addressed cells, immutable values read from the type.
    ClassBased,
    /// Every property backed by its own property prototype.
    PrototypeOriented,
}

enum BehaviorSlot {
    None,
    Idle(Box<dyn Behavior>),
    Active,
}

struct InstanceData {
    ty: Arc<Type>,
    slots: Vec<Slot>,
    access: Vec<AccessSet>,
    behavior: BehaviorSlot,
    inner: Vec<(String, InstanceId)>,
    order: Vec<u32>,
    order_base: u32,
    hidden: bool,
    dependents: Vec<Vec<Endpoint>>,
    routes_out: Vec<Vec<RouteId>>,
    listeners: Vec<Vec<SubscriptionId>>,
    foreign_seen: Vec<Value>,
}

struct CellData {
    value: Value,
    aliases: Vec<Endpoint>,
}

struct RouteData {
    src: Endpoint,
    dst: Endpoint,
    active: bool,
}

type Listener = Box<dyn FnMut(&Value, &Value) + Send>;

struct ListenerData {
    endpoint: Endpoint,
    callback: Option<Listener>,
}

enum Pending {
    Notify { sub: SubscriptionId, old: Value, new: Value },
    Deliver { route: RouteId, value: Value, cascade: u64 },
}

enum Storage {
    Default(Value),
    Cell(CellId),
    Foreign(Arc<dyn ForeignObject>, String),
}

/// Comparable snapshot of all observable state in a space.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    cells: Vec<Value>,
    access: Vec<Vec<AccessSet>>,
    routes: usize,
    pending: usize,
}

/// A single-threaded world of live instances.
pub struct Space {
    id: u32,
    loader: Arc<TypeLoader>,
    instances: Vec<InstanceData>,
    cells: Vec<CellData>,
    routes: Vec<RouteData>,
    queue: VecDeque<Pending>,
    fired: BTreeSet<(u64, RouteId)>,
    next_cascade: u64,
    current: u64,
    context: Vec<InstanceId>,
    listeners: BTreeMap<SubscriptionId, ListenerData>,
    next_subscription: u64,
    next_top: u32,
    faults: Vec<Error>,
}

impl core::fmt::Debug for Space {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Space")
            .field("id", &self.id)
            .field("instances", &self.instances.len())
            .field("cells", &self.cells.len())
            .field("routes", &self.routes.len())
            .field("pending", &self.queue.len())
            .finish()
    }
}

impl Space {
    pub fn new(loader: Arc<TypeLoader>) -> Space {
        Space {
            id: NEXT_SPACE.fetch_add(1, Ordering::Relaxed),
            loader,
            instances: Vec::new(),
            cells: Vec::new(),
            routes: Vec::new(),
            queue: VecDeque::new(),
            fired: BTreeSet::new(),
            next_cascade: 1,
            current: 0,
            context: Vec::new(),
            listeners: BTreeMap::new(),
            next_subscription: 1,
            next_top: 0,
            faults: Vec::new(),
        }
    }

    pub fn loader(&self) -> &Arc<TypeLoader> {
        &self.loader
    }

    fn data(&self, id: InstanceId) -> Result<&InstanceData> {
        if id.space != self.id {
            return Err(Error::UnknownName(alloc::format!("instance {} of another space", id.index)));
        }
        self.instances
            .get(id.index as usize)
            .ok_or_else(|| Error::UnknownName(alloc::format!("instance {}", id.index)))
    }

    fn data_mut(&mut self, id: InstanceId) -> &mut InstanceData {
        &mut self.instances[id.index as usize]
    }

    pub fn type_of(&self, id: InstanceId) -> Result<&Arc<Type>> {
        Ok(&self.data(id)?.ty)
    }

    /// The instance as a property value.
    pub fn handle(&self, id: InstanceId) -> Result<Value> {
        let ty = self.data(id)?.ty.clone();
        Ok(Value::Instance(InstanceRef { id, ty }))
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    /// Composing instances of a composed instance, keyed by DEF name, in
    /// instantiation order.
    pub fn inner(&self, id: InstanceId) -> Result<&[(String, InstanceId)]> {
        Ok(&self.data(id)?.inner)
    }

    pub fn inner_named(&self, id: InstanceId, def: &str) -> Option<InstanceId> {
        self.data(id).ok()?.inner.iter().find(|(n, _)| n == def).map(|(_, i)| *i)
    }

    pub fn context_depth(&self) -> usize {
        self.context.len()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Errors raised by deliveries and behavior hooks since the last call.
    pub fn take_faults(&mut self) -> Vec<Error> {
        core::mem::take(&mut self.faults)
    }

    pub fn endpoint(&self, id: InstanceId, prop: impl PropKey) -> Result<Endpoint> {
        let prop = prop.index_in(&self.data(id)?.ty)?;
        Ok(Endpoint::new(id, prop))
    }

    /// Effective access of an endpoint, after any context narrowing.
    pub fn access(&self, ep: Endpoint) -> Result<AccessSet> {
        self.data(ep.instance)?
            .access
            .get(ep.prop)
            .copied()
            .ok_or_else(|| self.unknown_prop(ep))
    }

    fn unknown_prop(&self, ep: Endpoint) -> Error {
        let owner = self.data(ep.instance).map(|d| d.ty.name().to_string()).unwrap_or_default();
        Error::UnknownProperty { owner, name: alloc::format!("#{}", ep.prop) }
    }

    fn prop_name(&self, ep: Endpoint) -> String {
        self.data(ep.instance)
            .ok()
            .and_then(|d| d.ty.property(ep.prop))
            .map(|p| alloc::format!("{}.{}", self.data(ep.instance).unwrap().ty.name(), p.name()))
            .unwrap_or_default()
    }

    fn require(&self, ep: Endpoint, needed: AccessSet) -> Result<()> {
        if self.access(ep)?.contains(needed) {
            Ok(())
        } else {
            Err(Error::AccessViolation { prop: self.prop_name(ep), needed })
        }
    }

    // ---- instance construction -------------------------------------------------

    /// Creates a top-level instance of a component type.
    pub fn instantiate(&mut self, ty: &Arc<Type>) -> Result<InstanceId> {
        if !ty.is_component() {
            return Err(Error::NotAComponent(ty.name().to_string()));
        }
        let id = self.build_instance(ty, Layout::ClassBased, None, None)?;
        let top = self.allocate_top();
        self.assign_order(id, alloc::vec![top], 0);
        Ok(id)
    }

    /// A fresh top-level ordering key.
    pub(crate) fn allocate_top(&mut self) -> u32 {
        self.next_top += 1;
        self.next_top - 1
    }

    /// Creates a typed variable holding `initial`, used as a property
    /// prototype.
    pub(crate) fn new_variable(&mut self, var_type: &Arc<Type>, initial: Value, hidden: bool) -> InstanceId {
        let prop = var_type.property(0).expect("variable types have one property");
        let cell = self.new_cell(initial);
        let id = self.push_instance(InstanceData {
            ty: var_type.clone(),
            slots: alloc::vec![Slot::Cell(cell)],
            access: alloc::vec![prop.access()],
            behavior: BehaviorSlot::None,
            inner: Vec::new(),
            order: Vec::new(),
            order_base: 0,
            hidden,
            dependents: alloc::vec![Vec::new()],
            routes_out: alloc::vec![Vec::new()],
            listeners: alloc::vec![Vec::new()],
            foreign_seen: Vec::new(),
        });
        if !hidden {
            self.cells[cell.0 as usize].aliases.push(Endpoint::new(id, 0));
        }
        id
    }

    fn new_cell(&mut self, value: Value) -> CellId {
        self.cells.push(CellData { value, aliases: Vec::new() });
        CellId(self.cells.len() as u32 - 1)
    }

    fn push_instance(&mut self, data: InstanceData) -> InstanceId {
        self.instances.push(data);
        InstanceId { space: self.id, index: self.instances.len() as u32 - 1 }
    }

    /// Builds an instance. `external[p] = Some(k)` links property `p` to
    /// interface property `k` of the instance on top of the context stack.
    pub(crate) fn build_instance(
        &mut self,
        ty: &Arc<Type>,
        layout: Layout,
        external: Option<&[Option<usize>]>,
        access: Option<&[AccessSet]>,
    ) -> Result<InstanceId> {
        let n = ty.interface().len();
        let outer = self.context.last().copied();
        let foreign = matches!(ty.implementation(), Implementation::Native(Native::Foreign(_)));
        let mut slots = Vec::with_capacity(n);
        for (p, prop) in ty.interface().properties().iter().enumerate() {
            let link = external.and_then(|e| e.get(p).copied().flatten());
            let slot = if let Some(k) = link {
                let outer = outer.ok_or_else(|| Error::UnknownName("no enclosing instance".to_string()))?;
                Slot::External { outer, prop: k }
            } else if foreign && prop.category().has_cell() {
                Slot::Foreign
            } else if layout == Layout::PrototypeOriented && !foreign {
                let var_type = self.loader.synthesize_variable_type(prop.value_type());
                let initial = prop.default_value().cloned().unwrap_or_default();
                Slot::Proto(self.new_variable(&var_type, initial, true))
            } else if prop.category().has_cell() {
                Slot::Cell(self.new_cell(prop.default_value().cloned().unwrap_or_default()))
            } else {
                Slot::Immutable
            };
            slots.push(slot);
        }
        let behavior = match ty.implementation() {
            Implementation::Native(Native::Behavior(factory)) => BehaviorSlot::Idle(factory()),
            _ => BehaviorSlot::None,
        };
        let access = match access {
            Some(a) => a.to_vec(),
            None => ty.interface().properties().iter().map(|p| p.access()).collect(),
        };
        let foreign_seen = if let Implementation::Native(Native::Foreign(obj)) = ty.implementation() {
            ty.interface().properties().iter().map(|p| obj.get(p.name())).collect()
        } else {
            Vec::new()
        };
        let id = self.push_instance(InstanceData {
            ty: ty.clone(),
            slots,
            access,
            behavior,
            inner: Vec::new(),
            order: Vec::new(),
            order_base: 0,
            hidden: false,
            dependents: alloc::vec![Vec::new(); n],
            routes_out: alloc::vec![Vec::new(); n],
            listeners: alloc::vec![Vec::new(); n],
            foreign_seen,
        });
        for p in 0..n {
            let ep = Endpoint::new(id, p);
            if let Slot::External { outer, prop } = self.instances[id.index as usize].slots[p] {
                self.data_mut(outer).dependents[prop].push(ep);
            }
            if let Storage::Cell(c) = self.storage(ep) {
                self.cells[c.0 as usize].aliases.push(ep);
            }
        }
        if ty.composed().is_some() {
            self.context.push(id);
            let result = composer::instantiate_composed(self, ty, id);
            self.context.pop();
            result?;
        }
        Ok(id)
    }

    pub(crate) fn push_inner(&mut self, outer: InstanceId, def: &str, inner: InstanceId) {
        self.data_mut(outer).inner.push((def.to_string(), inner));
    }

    /// Sets the canonical ordering key of an instance and, recursively, of
    /// its composing instances.
    pub(crate) fn assign_order(&mut self, id: InstanceId, path: Vec<u32>, base: u32) {
        let inner: Vec<InstanceId> = self.data_mut(id).inner.iter().map(|(_, i)| *i).collect();
        for (i, child) in inner.into_iter().enumerate() {
            let mut child_path = path.clone();
            child_path.push(i as u32);
            self.assign_order(child, child_path, 0);
        }
        let data = self.data_mut(id);
        data.order = path;
        data.order_base = base;
    }

    fn order_key(&self, ep: Endpoint) -> (&[u32], u32) {
        let d = &self.instances[ep.instance.index as usize];
        (&d.order, d.order_base + ep.prop as u32)
    }

    pub(crate) fn narrow(&mut self, ep: Endpoint, deny: AccessSet) -> Result<()> {
        let current = self.access(ep)?;
        let narrowed = narrow_access(current, deny)?;
        self.data_mut(ep.instance).access[ep.prop] = narrowed;
        Ok(())
    }

    pub(crate) fn slot(&self, ep: Endpoint) -> Option<Slot> {
        self.instances.get(ep.instance.index as usize)?.slots.get(ep.prop).copied()
    }

    /// Re-points a prototype-oriented slot at another property prototype,
    /// moving every endpoint that reads through it onto the new cell.
    pub(crate) fn repoint(&mut self, ep: Endpoint, var: InstanceId) -> Result<()> {
        let Some(Slot::Proto(_)) = self.slot(ep) else {
            return Err(Error::InvalidAccess(alloc::format!("{} cannot be shared", self.prop_name(ep))));
        };
        let mut moving = Vec::new();
        let mut stack = alloc::vec![ep];
        while let Some(e) = stack.pop() {
            moving.push(e);
            stack.extend(self.instances[e.instance.index as usize].dependents[e.prop].iter().copied());
        }
        if let Storage::Cell(old) = self.storage(ep) {
            self.cells[old.0 as usize].aliases.retain(|a| !moving.contains(a));
        }
        self.data_mut(ep.instance).slots[ep.prop] = Slot::Proto(var);
        if let Storage::Cell(new) = self.storage(ep) {
            for e in moving {
                if !self.instances[e.instance.index as usize].hidden {
                    self.cells[new.0 as usize].aliases.push(e);
                }
            }
        }
        Ok(())
    }

    // ---- storage ----------------------------------------------------------------

    fn storage(&self, ep: Endpoint) -> Storage {
        let d = &self.instances[ep.instance.index as usize];
        match d.slots[ep.prop] {
            Slot::Immutable => Storage::Default(
                d.ty.property(ep.prop).and_then(|p| p.default_value().cloned()).unwrap_or_default(),
            ),
            Slot::Cell(c) => Storage::Cell(c),
            Slot::External { outer, prop } => self.storage(Endpoint::new(outer, prop)),
            Slot::Proto(var) => self.storage(Endpoint::new(var, 0)),
            Slot::Foreign => match d.ty.implementation() {
                Implementation::Native(Native::Foreign(obj)) => {
                    Storage::Foreign(obj.clone(), d.ty.property(ep.prop).unwrap().name().to_string())
                }
                _ => unreachable!("foreign slot on a non-foreign type"),
            },
        }
    }

    fn read(&self, ep: Endpoint) -> Value {
        match self.storage(ep) {
            Storage::Default(v) => v,
            Storage::Cell(c) => self.cells[c.0 as usize].value.clone(),
            Storage::Foreign(obj, name) => obj.get(&name),
        }
    }

    /// Writes without events or hooks; used to apply refinements while an
    /// instance is under construction.
    pub(crate) fn write_raw(&mut self, ep: Endpoint, value: Value) -> Result<()> {
        match self.storage(ep) {
            Storage::Cell(c) => self.cells[c.0 as usize].value = value,
            Storage::Foreign(obj, name) => obj.set(&name, value),
            Storage::Default(_) => {
                return Err(Error::AccessViolation { prop: self.prop_name(ep), needed: AccessSet::W })
            }
        }
        Ok(())
    }

    /// Reads a property without access checks.
    pub(crate) fn peek(&self, ep: Endpoint) -> Value {
        self.read(ep)
    }

    fn value_type(&self, ep: Endpoint) -> Result<Arc<Type>> {
        let d = self.data(ep.instance)?;
        d.ty.property(ep.prop).map(|p| p.value_type().clone()).ok_or_else(|| self.unknown_prop(ep))
    }

    // ---- property access --------------------------------------------------------

    pub fn get(&self, id: InstanceId, prop: impl PropKey) -> Result<Value> {
        let ep = self.endpoint(id, prop)?;
        self.require(ep, AccessSet::R)?;
        Ok(self.read(ep))
    }

    pub fn get_indexed(&self, id: InstanceId, prop: impl PropKey, index: usize) -> Result<Value> {
        let ep = self.endpoint(id, prop)?;
        self.require(ep, AccessSet::IR)?;
        let value = self.read(ep);
        let items = value.as_array().ok_or_else(|| Error::mismatch("array", value.kind()))?;
        items.get(index).cloned().ok_or(Error::IndexOutOfBounds { index, len: items.len() })
    }

    /// Writes a property from outside, starting a new cascade.
    pub fn set(&mut self, id: InstanceId, prop: impl PropKey, value: Value) -> Result<()> {
        let ep = self.endpoint(id, prop)?;
        self.require(ep, AccessSet::W)?;
        check_value(&*self.value_type(ep)?, &value)?;
        self.begin_cascade();
        self.write(ep, value)
    }

    pub fn set_indexed(&mut self, id: InstanceId, prop: impl PropKey, index: usize, value: Value) -> Result<()> {
        let ep = self.endpoint(id, prop)?;
        self.require(ep, AccessSet::IW)?;
        let vt = self.value_type(ep)?;
        let element = vt.element_type().ok_or_else(|| Error::mismatch("array", vt.name()))?;
        check_value(element, &value)?;
        let current = self.read(ep);
        let items = current.as_array().ok_or_else(|| Error::mismatch("array", current.kind()))?;
        if index >= items.len() {
            return Err(Error::IndexOutOfBounds { index, len: items.len() });
        }
        let mut items = items.to_vec();
        items[index] = value;
        self.begin_cascade();
        self.write(ep, Value::array(items))
    }

    /// Writes through an endpoint ignoring its W right, in a new cascade.
    /// Immutable-category properties stay unwritable.
    pub(crate) fn write_internal(&mut self, ep: Endpoint, value: Value) -> Result<()> {
        check_value(&*self.value_type(ep)?, &value)?;
        self.begin_cascade();
        self.write(ep, value)
    }

    /// Records a default in ordinary instance context: the type already holds
    /// its defaults, so this only validates the call.
    pub fn init_property_value(&mut self, id: InstanceId, name: &str, value: Value) -> Result<()> {
        let ep = self.endpoint(id, name)?;
        check_value(&*self.value_type(ep)?, &value)
    }

    fn begin_cascade(&mut self) {
        self.current = self.next_cascade;
        self.next_cascade += 1;
    }

    fn sorted_aliases(&self, c: CellId) -> Vec<Endpoint> {
        let mut aliases = self.cells[c.0 as usize].aliases.clone();
        aliases.sort_by(|a, b| self.order_key(*a).cmp(&self.order_key(*b)).then(a.cmp(b)));
        aliases
    }

    /// The write path shared by external sets, deliveries and behaviors:
    /// store, queue change events for bound aliases, then run behavior hooks.
    fn write(&mut self, ep: Endpoint, value: Value) -> Result<()> {
        if self.own_immutable(ep) {
            return Err(Error::AccessViolation { prop: self.prop_name(ep), needed: AccessSet::W });
        }
        let (old, aliases) = match self.storage(ep) {
            Storage::Default(_) => {
                return Err(Error::AccessViolation { prop: self.prop_name(ep), needed: AccessSet::W })
            }
            Storage::Cell(c) => {
                let old = core::mem::replace(&mut self.cells[c.0 as usize].value, value.clone());
                (old, self.sorted_aliases(c))
            }
            Storage::Foreign(obj, name) => {
                let old = obj.get(&name);
                obj.set(&name, value.clone());
                self.data_mut(ep.instance).foreign_seen[ep.prop] = value.clone();
                (old, alloc::vec![ep])
            }
        };
        if old != value {
            for alias in &aliases {
                self.emit(*alias, &old, &value);
            }
        }
        for alias in aliases {
            self.run_hook(alias, &old, &value);
        }
        Ok(())
    }

    /// An immutable property backed by its own property prototype: writable
    /// storage exists, but the frozen form would read it from the type.
    fn own_immutable(&self, ep: Endpoint) -> bool {
        let d = &self.instances[ep.instance.index as usize];
        match d.slots[ep.prop] {
            Slot::Proto(var) => {
                self.instances[var.index as usize].hidden
                    && d.ty.property(ep.prop).is_some_and(|p| !p.category().has_cell())
            }
            _ => false,
        }
    }

    fn emit(&mut self, ep: Endpoint, old: &Value, new: &Value) {
        let d = &self.instances[ep.instance.index as usize];
        if !d.access[ep.prop].contains(AccessSet::B) {
            return;
        }
        let subs = d.listeners[ep.prop].clone();
        let routes = d.routes_out[ep.prop].clone();
        for sub in subs {
            self.queue.push_back(Pending::Notify { sub, old: old.clone(), new: new.clone() });
        }
        for route in routes {
            if !self.routes[route.0 as usize].active {
                continue;
            }
            // Each route fires at most once per cascade.
            if self.fired.insert((self.current, route)) {
                self.queue.push_back(Pending::Deliver { route, value: new.clone(), cascade: self.current });
            }
        }
    }

    fn run_hook(&mut self, ep: Endpoint, old: &Value, new: &Value) {
        let slot = &mut self.instances[ep.instance.index as usize].behavior;
        // Active behaviors are not re-entered; their own writes surface as
        // events instead.
        let BehaviorSlot::Idle(_) = slot else { return };
        let BehaviorSlot::Idle(mut behavior) = core::mem::replace(slot, BehaviorSlot::Active) else {
            unreachable!()
        };
        let result = {
            let mut ctx = Ctx { space: self, this: ep.instance };
            behavior.on_set(&mut ctx, ep.prop, old, new)
        };
        self.instances[ep.instance.index as usize].behavior = BehaviorSlot::Idle(behavior);
        if let Err(e) = result {
            self.faults.push(e);
        }
    }

    // ---- routes, listeners, scheduling -----------------------------------------

    /// Binds a bound source property to a writable target property.
    pub fn add_route(&mut self, src: Endpoint, dst: Endpoint) -> Result<RouteId> {
        self.require(src, AccessSet::B)?;
        self.require(dst, AccessSet::W)?;
        let (st, dt) = (self.value_type(src)?, self.value_type(dst)?);
        if !st.assignable_to(&dt) {
            return Err(Error::mismatch(dt.name(), st.name()));
        }
        Ok(self.add_route_unchecked(src, dst))
    }

    pub(crate) fn add_route_unchecked(&mut self, src: Endpoint, dst: Endpoint) -> RouteId {
        let id = RouteId(self.routes.len() as u32);
        self.routes.push(RouteData { src, dst, active: true });
        self.data_mut(src.instance).routes_out[src.prop].push(id);
        id
    }

    pub fn remove_route(&mut self, route: RouteId) {
        if let Some(r) = self.routes.get_mut(route.0 as usize) {
            r.active = false;
        }
    }

    pub fn route_endpoints(&self, route: RouteId) -> Option<(Endpoint, Endpoint)> {
        self.routes.get(route.0 as usize).filter(|r| r.active).map(|r| (r.src, r.dst))
    }

    pub fn route_count(&self) -> usize {
        self.routes.iter().filter(|r| r.active).count()
    }

    pub fn subscribe(
        &mut self,
        id: InstanceId,
        prop: impl PropKey,
        listener: impl FnMut(&Value, &Value) + Send + 'static,
    ) -> Result<SubscriptionId> {
        let ep = self.endpoint(id, prop)?;
        self.require(ep, AccessSet::B)?;
        let sub = SubscriptionId(self.next_subscription);
        self.next_subscription += 1;
        self.listeners.insert(sub, ListenerData { endpoint: ep, callback: Some(Box::new(listener)) });
        self.data_mut(id).listeners[ep.prop].push(sub);
        Ok(sub)
    }

    pub fn unsubscribe(&mut self, sub: SubscriptionId) -> bool {
        match self.listeners.remove(&sub) {
            Some(l) => {
                self.data_mut(l.endpoint.instance).listeners[l.endpoint.prop].retain(|s| *s != sub);
                true
            }
            None => false,
        }
    }

    /// Picks up changes made to wrapped foreign objects behind the space's
    /// back, emitting change events for them.
    fn poll_foreign(&mut self) {
        for index in 0..self.instances.len() {
            let Implementation::Native(Native::Foreign(obj)) = self.instances[index].ty.implementation() else {
                continue;
            };
            let obj = obj.clone();
            let id = InstanceId { space: self.id, index: index as u32 };
            for p in 0..self.instances[index].slots.len() {
                if !matches!(self.instances[index].slots[p], Slot::Foreign) {
                    continue;
                }
                let name = self.instances[index].ty.property(p).unwrap().name().to_string();
                let now = obj.get(&name);
                let seen = core::mem::replace(&mut self.instances[index].foreign_seen[p], now.clone());
                if seen != now {
                    self.begin_cascade();
                    self.emit(Endpoint::new(id, p), &seen, &now);
                }
            }
        }
    }

    /// Delivers queued events FIFO until the queue is empty. Returns the
    /// number of route deliveries performed.
    pub fn pump(&mut self) -> usize {
        self.poll_foreign();
        let mut delivered = 0;
        while let Some(item) = self.queue.pop_front() {
            match item {
                Pending::Notify { sub, old, new } => {
                    let Some(mut callback) = self.listeners.get_mut(&sub).and_then(|l| l.callback.take()) else {
                        continue;
                    };
                    callback(&old, &new);
                    if let Some(l) = self.listeners.get_mut(&sub) {
                        l.callback = Some(callback);
                    }
                }
                Pending::Deliver { route, value, cascade } => {
                    let RouteData { dst, active, .. } = self.routes[route.0 as usize];
                    if !active {
                        continue;
                    }
                    self.current = cascade;
                    let result = self.require(dst, AccessSet::W).and_then(|_| {
                        check_value(&*self.value_type(dst)?, &value)?;
                        self.write(dst, value)
                    });
                    match result {
                        Ok(()) => delivered += 1,
                        Err(e) => self.faults.push(e),
                    }
                }
            }
        }
        self.fired.clear();
        delivered
    }

    /// Snapshot of every cell, access set and queue length.
    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint {
            cells: self.cells.iter().map(|c| c.value.clone()).collect(),
            access: self.instances.iter().map(|d| d.access.clone()).collect(),
            routes: self.route_count(),
            pending: self.queue.len(),
        }
    }
}

/// The view a behavior gets of its own instance during a hook.
pub struct Ctx<'a> {
    space: &'a mut Space,
    this: InstanceId,
}

impl Ctx<'_> {
    pub fn instance(&self) -> InstanceId {
        self.this
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        lookup_property(&self.space.instances[self.this.index as usize].ty, name)
    }

    /// Reads an own property; behaviors are not subject to access rights.
    pub fn get(&self, prop: impl PropKey) -> Result<Value> {
        let ep = self.space.endpoint(self.this, prop)?;
        Ok(self.space.read(ep))
    }

    pub fn get_int(&self, prop: impl PropKey) -> Result<i32> {
        let v = self.get(prop)?;
        v.as_int().ok_or_else(|| Error::mismatch("Int32", v.kind()))
    }

    /// Writes an own property in the current cascade. Type checked; only
    /// immutable properties are refused.
    pub fn set(&mut self, prop: impl PropKey, value: Value) -> Result<()> {
        let ep = self.space.endpoint(self.this, prop)?;
        check_value(&*self.space.value_type(ep)?, &value)?;
        self.space.write(ep, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kit;

    fn space() -> Space {
        let loader = TypeLoader::new();
        kit::register(&loader).unwrap();
        Space::new(loader)
    }

    fn ty(space: &Space, name: &str) -> Arc<Type> {
        space.loader().resolve(name).unwrap()
    }

    #[test]
    fn adder_defaults_and_sum() {
        let mut s = space();
        let adder = s.instantiate(&ty(&s, "std.Adder")).unwrap();
        for p in ["a", "b", "sum"] {
            assert_eq!(s.get(adder, p).unwrap(), Value::Int(0));
        }
        s.set(adder, "a", 2.into()).unwrap();
        s.set(adder, "b", 3.into()).unwrap();
        assert_eq!(s.get(adder, "sum").unwrap(), Value::Int(5));
    }

    #[test]
    fn instances_are_independent() {
        let mut s = space();
        let t = ty(&s, "std.Adder");
        let a = s.instantiate(&t).unwrap();
        let b = s.instantiate(&t).unwrap();
        s.set(a, "a", 7.into()).unwrap();
        assert_eq!(s.get(b, "a").unwrap(), Value::Int(0));
    }

    #[test]
    fn access_and_type_checks() {
        let mut s = space();
        let adder = s.instantiate(&ty(&s, "std.Adder")).unwrap();
        assert!(matches!(s.set(adder, "a", Value::str("x")), Err(Error::TypeMismatch { .. })));
        assert!(matches!(s.set(adder, "sum", 1.into()), Err(Error::AccessViolation { .. })));
        assert!(matches!(s.get(adder, "nope"), Err(Error::UnknownProperty { .. })));
        let counter = s.instantiate(&ty(&s, "std.Counter")).unwrap();
        assert!(matches!(s.get(counter, "tick"), Err(Error::AccessViolation { .. })));
        assert_eq!(s.get(adder, 0).unwrap(), s.get(adder, "a").unwrap());
    }

    #[test]
    fn unchanged_bound_write_enqueues_nothing() {
        let mut s = space();
        let c = s.instantiate(&ty(&s, "std.Const")).unwrap();
        s.subscribe(c, "value", |_, _| {}).unwrap();
        s.set(c, "value", 0.into()).unwrap();
        assert_eq!(s.pending(), 0);
        s.set(c, "value", 1.into()).unwrap();
        assert_eq!(s.pending(), 1);
    }

    #[test]
    fn indexed_access() {
        let mut s = space();
        let probe = s.instantiate(&ty(&s, "std.Probe")).unwrap();
        for v in [1, 2, 3] {
            s.set(probe, "in", v.into()).unwrap();
        }
        assert_eq!(s.get_indexed(probe, "trace", 1).unwrap(), Value::Int(2));
        assert!(matches!(s.get_indexed(probe, "trace", 5), Err(Error::IndexOutOfBounds { index: 5, len: 3 })));
        assert!(matches!(s.get_indexed(probe, "in", 0), Err(Error::AccessViolation { .. })));
        let var = s.loader().resolve("var<Int32[]>").unwrap();
        let v = s.instantiate(&var).unwrap();
        s.set(v, "value", Value::array(alloc::vec![1.into(), 2.into(), 3.into()])).unwrap();
        let seen = Arc::new(spin::Mutex::new(0));
        let counter = seen.clone();
        s.subscribe(v, "value", move |_, _| *counter.lock() += 1).unwrap();
        s.set_indexed(v, "value", 1, 9.into()).unwrap();
        assert!(matches!(s.set_indexed(v, "value", 5, 9.into()), Err(Error::IndexOutOfBounds { .. })));
        assert!(matches!(s.set_indexed(v, "value", 0, true.into()), Err(Error::TypeMismatch { .. })));
        s.pump();
        assert_eq!(*seen.lock(), 1);
        assert_eq!(s.get_indexed(v, "value", 1).unwrap(), Value::Int(9));
    }

    #[test]
    fn single_hop_route() {
        let mut s = space();
        let c = s.instantiate(&ty(&s, "std.Const")).unwrap();
        let adder = s.instantiate(&ty(&s, "std.Adder")).unwrap();
        let src = s.endpoint(c, "value").unwrap();
        let dst = s.endpoint(adder, "a").unwrap();
        s.add_route(src, dst).unwrap();
        s.set(c, "value", 4.into()).unwrap();
        assert_eq!(s.pump(), 1);
        assert_eq!(s.get(adder, "a").unwrap(), Value::Int(4));
        assert_eq!(s.get(adder, "sum").unwrap(), Value::Int(4));
        assert_eq!(s.pump(), 0);
    }

    #[test]
    fn route_checks() {
        let mut s = space();
        let adder = s.instantiate(&ty(&s, "std.Adder")).unwrap();
        let c = s.instantiate(&ty(&s, "std.Const")).unwrap();
        let a = s.endpoint(adder, "a").unwrap();
        let sum = s.endpoint(adder, "sum").unwrap();
        assert!(matches!(s.add_route(a, sum), Err(Error::AccessViolation { .. })));
        let text = s.loader().resolve("var<String>").unwrap();
        let t = s.instantiate(&text).unwrap();
        let value = s.endpoint(c, "value").unwrap();
        let tv = s.endpoint(t, "value").unwrap();
        assert!(matches!(s.add_route(value, tv), Err(Error::TypeMismatch { .. })));
    }

    #[test]
    fn cycles_terminate_and_fan_out_counts() {
        let mut s = space();
        let t = ty(&s, "std.Const");
        let a = s.instantiate(&t).unwrap();
        let b = s.instantiate(&t).unwrap();
        let ea = s.endpoint(a, "value").unwrap();
        let eb = s.endpoint(b, "value").unwrap();
        s.add_route(ea, eb).unwrap();
        s.add_route(eb, ea).unwrap();
        s.set(a, "value", 1.into()).unwrap();
        assert!(s.pump() <= 2);

        let mut s = space();
        let t = ty(&s, "std.Const");
        let src = s.instantiate(&t).unwrap();
        let es = s.endpoint(src, "value").unwrap();
        let targets: Vec<_> = (0..3).map(|_| s.instantiate(&t).unwrap()).collect();
        for dst in &targets {
            let ed = s.endpoint(*dst, "value").unwrap();
            s.add_route(es, ed).unwrap();
        }
        s.set(src, "value", 5.into()).unwrap();
        assert_eq!(s.pump(), 3);
        assert_eq!(s.pump(), 0);
    }

    #[test]
    fn subscriptions() {
        let mut s = space();
        let c = s.instantiate(&ty(&s, "std.Const")).unwrap();
        let seen = Arc::new(spin::Mutex::new(Vec::new()));
        let log = seen.clone();
        let sub = s.subscribe(c, "value", move |old, new| log.lock().push((old.clone(), new.clone()))).unwrap();
        s.set(c, "value", 3.into()).unwrap();
        s.pump();
        assert_eq!(*seen.lock(), alloc::vec![(Value::Int(0), Value::Int(3))]);
        assert!(s.unsubscribe(sub));
        s.set(c, "value", 4.into()).unwrap();
        s.pump();
        assert_eq!(seen.lock().len(), 1);
        let adder = s.instantiate(&ty(&s, "std.Adder")).unwrap();
        assert!(matches!(s.subscribe(adder, "a", |_, _| {}), Err(Error::AccessViolation { .. })));
    }

    #[test]
    fn self_feeding_behavior_terminates() {
        // Counter whose bound count is routed back into its own tick.
        let mut s = space();
        let counter = s.instantiate(&ty(&s, "std.Counter")).unwrap();
        let count = s.endpoint(counter, "count").unwrap();
        let tick = s.endpoint(counter, "tick").unwrap();
        s.add_route(count, tick).unwrap();
        s.set(counter, "tick", 1.into()).unwrap();
        assert_eq!(s.pump(), 1);
        assert_eq!(s.get(counter, "count").unwrap(), Value::Int(2));
    }
}
