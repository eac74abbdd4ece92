//! The immutable type model: a type is a name, an interface of property types
//! and an implementation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::access::AccessSet;
use crate::composer::ComposedImplementation;
use crate::error::{Error, Result};
use crate::native::{BehaviorFactory, ForeignObject};
use crate::value::Value;

pub const INT32: &str = "Int32";
pub const FLOAT64: &str = "Float64";
pub const BOOLEAN: &str = "Boolean";
pub const STRING: &str = "String";
/// Any instance, or nil.
pub const COMPONENT: &str = "Component";

static NEXT_TYPE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TypeId(u64);

impl TypeId {
    fn fresh() -> TypeId {
        TypeId(NEXT_TYPE_ID.fetch_add(1, Ordering::Relaxed))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeRef {
    pub id: TypeId,
    pub name: Arc<str>,
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// How a property is stored in an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    /// Value lives in the property type, shared by every instance.
    Immutable,
    /// Instance cell, no change events.
    Mutable,
    /// Instance cell with change events.
    Bound,
    /// Storage delegated to the given interface property of the enclosing
    /// composed instance.
    External(usize),
}

impl Category {
    pub fn for_access(access: AccessSet) -> Category {
        if access.is_subset(AccessSet::R | AccessSet::IR) {
            Category::Immutable
        } else if access.contains(AccessSet::B) {
            Category::Bound
        } else {
            Category::Mutable
        }
    }

    pub fn has_cell(self) -> bool {
        !matches!(self, Category::Immutable)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::Immutable => f.write_str("Immutable"),
            Category::Mutable => f.write_str("Mutable"),
            Category::Bound => f.write_str("Bound"),
            Category::External(i) => write!(f, "External({i})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PropertyType {
    name: String,
    value_type: Arc<Type>,
    access: AccessSet,
    default: Option<Value>,
    category: Category,
    index: usize,
}

impl PropertyType {
    /// Builds a property type, checking the access invariants and that the
    /// default belongs to the value domain. The category follows the access.
    pub fn new(
        name: impl Into<String>,
        value_type: Arc<Type>,
        access: AccessSet,
        default: Option<Value>,
    ) -> Result<PropertyType> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(Error::InvalidName(name));
        }
        access.check(value_type.is_array())?;
        if let Some(v) = &default {
            if !value_type.conforms(v) {
                return Err(Error::mismatch(value_type.name(), v.kind()));
            }
            if !v.is_immutable() {
                return Err(Error::mismatch("immutable value", v.kind()));
            }
        }
        Ok(PropertyType {
            name,
            value_type,
            category: Category::for_access(access),
            access,
            default,
            index: 0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value_type(&self) -> &Arc<Type> {
        &self.value_type
    }

    pub fn access(&self) -> AccessSet {
        self.access
    }

    pub fn default_value(&self) -> Option<&Value> {
        self.default.as_ref()
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

#[derive(Clone, Debug, Default)]
pub struct InterfaceType {
    properties: Vec<PropertyType>,
    by_name: BTreeMap<String, usize>,
}

impl InterfaceType {
    pub fn new(properties: Vec<PropertyType>) -> Result<InterfaceType> {
        let mut by_name = BTreeMap::new();
        let mut indexed = Vec::with_capacity(properties.len());
        for (index, mut prop) in properties.into_iter().enumerate() {
            if by_name.insert(prop.name.clone(), index).is_some() {
                return Err(Error::NameConflict(prop.name));
            }
            prop.index = index;
            indexed.push(prop);
        }
        Ok(InterfaceType { properties: indexed, by_name })
    }

    pub fn properties(&self) -> &[PropertyType] {
        &self.properties
    }

    pub fn len(&self) -> usize {
        self.properties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.properties.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&PropertyType> {
        self.properties.get(index)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }
}

/// Translates a property name into its dense ordinal.
pub fn lookup_property(owner: &Type, name: &str) -> Result<usize> {
    owner.interface.index_of(name).ok_or_else(|| Error::UnknownProperty {
        owner: owner.name().to_string(),
        name: name.to_string(),
    })
}

/// Membership predicate of a native value type.
#[derive(Clone)]
pub enum ValueDomain {
    Int32,
    Float64,
    Boolean,
    String,
    /// Any instance or nil.
    Component,
    Custom(Arc<dyn Fn(&Value) -> bool + Send + Sync>),
}

impl fmt::Debug for ValueDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueDomain::Int32 => f.write_str("Int32"),
            ValueDomain::Float64 => f.write_str("Float64"),
            ValueDomain::Boolean => f.write_str("Boolean"),
            ValueDomain::String => f.write_str("String"),
            ValueDomain::Component => f.write_str("Component"),
            ValueDomain::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl ValueDomain {
    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (ValueDomain::Int32, Value::Int(_)) => true,
            (ValueDomain::Float64, Value::Float(_)) => true,
            (ValueDomain::Boolean, Value::Bool(_)) => true,
            (ValueDomain::String, Value::Str(_)) => true,
            (ValueDomain::Component, Value::Nil | Value::Instance(_)) => true,
            (ValueDomain::Custom(pred), v) => pred(v),
            _ => false,
        }
    }

    fn zero(&self) -> Option<Value> {
        match self {
            ValueDomain::Int32 => Some(Value::Int(0)),
            ValueDomain::Float64 => Some(Value::Float(0.0)),
            ValueDomain::Boolean => Some(Value::Bool(false)),
            ValueDomain::String => Some(Value::str("")),
            ValueDomain::Component => Some(Value::Nil),
            ValueDomain::Custom(_) => None,
        }
    }
}

/// Hardcoded implementations.
#[derive(Clone)]
pub enum Native {
    Value(ValueDomain),
    Array(Arc<Type>),
    Behavior(BehaviorFactory),
    Foreign(Arc<dyn ForeignObject>),
}

#[derive(Clone)]
pub enum Implementation {
    Native(Native),
    Composed(ComposedImplementation),
    /// A typed variable holding a single `value` property of the given type.
    SynthesizedVariable(Arc<Type>),
}

pub struct Type {
    type_ref: TypeRef,
    interface: InterfaceType,
    implementation: Implementation,
    supertypes: Vec<String>,
    is_component: bool,
}

impl fmt::Debug for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Type")
            .field("name", &self.type_ref.name)
            .field("id", &self.type_ref.id)
            .field("properties", &self.interface.len())
            .field("is_component", &self.is_component)
            .finish()
    }
}

impl Type {
    pub(crate) fn new(
        name: &str,
        interface: InterfaceType,
        implementation: Implementation,
        supertypes: Vec<String>,
    ) -> Type {
        let is_component = interface.properties.iter().all(|p| p.default.is_some());
        Type {
            type_ref: TypeRef { id: TypeId::fresh(), name: Arc::from(name) },
            interface,
            implementation,
            supertypes,
            is_component,
        }
    }

    pub(crate) fn builtin(name: &str, domain: ValueDomain) -> Type {
        Type::new(name, InterfaceType::default(), Implementation::Native(Native::Value(domain)), Vec::new())
    }

    pub(crate) fn array_of(element: Arc<Type>) -> Type {
        let name = alloc::format!("{}[]", element.name());
        Type::new(&name, InterfaceType::default(), Implementation::Native(Native::Array(element)), Vec::new())
    }

    /// Builds the typed-variable type `var<V>`: one property `value` with full
    /// rights, indexed rights when `V` is an array, defaulting to the zero
    /// value of `V` when one exists.
    pub(crate) fn variable_of(value_type: Arc<Type>) -> Type {
        let name = alloc::format!("var<{}>", value_type.name());
        let mut access = AccessSet::RWB;
        if value_type.is_array() {
            access = access | AccessSet::IR | AccessSet::IW;
        }
        let default = value_type.zero_value();
        let prop = PropertyType {
            name: "value".to_string(),
            value_type: value_type.clone(),
            category: Category::for_access(access),
            access,
            default,
            index: 0,
        };
        let interface = InterfaceType::new(alloc::vec![prop]).expect("single property");
        Type::new(&name, interface, Implementation::SynthesizedVariable(value_type), Vec::new())
    }

    pub fn type_ref(&self) -> &TypeRef {
        &self.type_ref
    }

    pub fn id(&self) -> TypeId {
        self.type_ref.id
    }

    pub fn name(&self) -> &str {
        &self.type_ref.name
    }

    pub fn interface(&self) -> &InterfaceType {
        &self.interface
    }

    pub fn implementation(&self) -> &Implementation {
        &self.implementation
    }

    pub fn supertypes(&self) -> &[String] {
        &self.supertypes
    }

    /// Instantiable without any information from the instantiation context.
    pub fn is_component(&self) -> bool {
        self.is_component
    }

    pub fn is_array(&self) -> bool {
        matches!(self.implementation, Implementation::Native(Native::Array(_)))
    }

    pub fn element_type(&self) -> Option<&Arc<Type>> {
        match &self.implementation {
            Implementation::Native(Native::Array(e)) => Some(e),
            _ => None,
        }
    }

    pub fn composed(&self) -> Option<&ComposedImplementation> {
        match &self.implementation {
            Implementation::Composed(c) => Some(c),
            _ => None,
        }
    }

    /// True for types whose values are instances rather than plain data.
    pub fn is_instance_type(&self) -> bool {
        !matches!(self.implementation, Implementation::Native(Native::Value(_) | Native::Array(_)))
    }

    pub fn zero_value(&self) -> Option<Value> {
        match &self.implementation {
            Implementation::Native(Native::Value(d)) => d.zero(),
            Implementation::Native(Native::Array(_)) => Some(Value::array(Vec::new())),
            _ => None,
        }
    }

    pub fn property(&self, index: usize) -> Option<&PropertyType> {
        self.interface.get(index)
    }

    /// Domain membership. Composed and native component types accept exactly
    /// the instances they created, plus instances of types naming them as a
    /// supertype.
    pub fn conforms(&self, value: &Value) -> bool {
        match &self.implementation {
            Implementation::Native(Native::Value(domain)) => match value {
                Value::Instance(i) if !matches!(domain, ValueDomain::Component) => {
                    i.ty.supertypes.iter().any(|s| s == self.name())
                }
                _ => domain.contains(value),
            },
            Implementation::Native(Native::Array(element)) => match value {
                Value::Array(items) => items.iter().all(|v| element.conforms(v)),
                _ => false,
            },
            _ => match value {
                Value::Instance(i) => {
                    i.ty.id() == self.id() || i.ty.supertypes.iter().any(|s| s == self.name())
                }
                _ => false,
            },
        }
    }

    /// True when every value of `self` is also a value of `target`.
    pub fn assignable_to(&self, target: &Type) -> bool {
        if self.id() == target.id() || self.supertypes.iter().any(|s| s == target.name()) {
            return true;
        }
        match (&self.implementation, &target.implementation) {
            (_, Implementation::Native(Native::Value(ValueDomain::Component))) => {
                self.is_instance_type()
            }
            (Implementation::Native(Native::Array(a)), Implementation::Native(Native::Array(b))) => {
                a.assignable_to(b)
            }
            _ => false,
        }
    }

    /// Canonical multi-line description used to fingerprint a type.
    pub fn canonical(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let kind = match &self.implementation {
            Implementation::Native(Native::Value(_)) => "value",
            Implementation::Native(Native::Array(_)) => "array",
            Implementation::Native(Native::Behavior(_)) => "native",
            Implementation::Native(Native::Foreign(_)) => "foreign",
            Implementation::Composed(_) => "composed",
            Implementation::SynthesizedVariable(_) => "variable",
        };
        let _ = writeln!(out, "{kind} {}", self.name());
        for p in self.interface.properties() {
            let _ = write!(out, "  [{}] {} {}", p.access, p.value_type.name(), p.name);
            if let Some(d) = &p.default {
                let _ = write!(out, " = {d}");
            }
            let _ = writeln!(out, " ({})", p.category);
        }
        if let Implementation::Composed(c) = &self.implementation {
            c.describe(&mut out);
        }
        out
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Dotted identifier, e.g. `std.Adder`.
pub fn is_qualified_name(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(is_identifier)
}

/// Checks the value against the type, reporting a mismatch error.
pub fn check_value(ty: &Type, v: &Value) -> Result<()> {
    if ty.conforms(v) {
        Ok(())
    } else {
        Err(Error::mismatch(ty.name(), describe_value(v)))
    }
}

fn describe_value(v: &Value) -> String {
    match v {
        Value::Instance(i) => i.ty().name().to_string(),
        Value::Array(_) => alloc::format!("array {v}"),
        _ => alloc::format!("{} {v}", v.kind()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int() -> Arc<Type> {
        Arc::new(Type::builtin(INT32, ValueDomain::Int32))
    }

    #[test]
    fn primitive_membership() {
        let t = int();
        assert!(t.conforms(&Value::Int(5)));
        assert!(!t.conforms(&Value::str("x")));
        assert!(!t.conforms(&Value::Float(5.0)));
    }

    #[test]
    fn arrays_check_every_element() {
        let arr = Type::array_of(int());
        assert!(arr.conforms(&Value::array(alloc::vec![1.into(), 2.into()])));
        assert!(arr.conforms(&Value::array(Vec::new())));
        assert!(!arr.conforms(&Value::array(alloc::vec![1.into(), Value::Bool(true)])));
    }

    #[test]
    fn lookup_by_ordinal() {
        let props = ["a", "b", "sum"]
            .iter()
            .map(|n| PropertyType::new(*n, int(), AccessSet::RW, Some(Value::Int(0))).unwrap())
            .collect();
        let iface = InterfaceType::new(props).unwrap();
        let t = Type::new("t.T", iface, Implementation::Native(Native::Value(ValueDomain::Int32)), Vec::new());
        assert_eq!(lookup_property(&t, "b").unwrap(), 1);
        assert!(matches!(lookup_property(&t, "z"), Err(Error::UnknownProperty { .. })));
        let empty = Type::builtin("t.E", ValueDomain::Int32);
        assert!(lookup_property(&empty, "x").is_err());
    }

    #[test]
    fn component_iff_all_defaults() {
        let with = PropertyType::new("a", int(), AccessSet::RW, Some(Value::Int(0))).unwrap();
        let without = PropertyType::new("b", int(), AccessSet::RW, None).unwrap();
        let imp = || Implementation::Native(Native::Value(ValueDomain::Int32));
        let t1 = Type::new("a.A", InterfaceType::new(alloc::vec![with.clone()]).unwrap(), imp(), Vec::new());
        let t2 = Type::new("a.B", InterfaceType::new(alloc::vec![with, without]).unwrap(), imp(), Vec::new());
        assert!(t1.is_component());
        assert!(!t2.is_component());
    }

    #[test]
    fn property_defaults_must_conform() {
        assert!(PropertyType::new("a", int(), AccessSet::RW, Some(Value::str("x"))).is_err());
        assert!(PropertyType::new("a", int(), AccessSet::B, None).is_err());
        assert_eq!(
            PropertyType::new("a", int(), AccessSet::R, None).unwrap().category(),
            Category::Immutable
        );
        assert_eq!(
            PropertyType::new("a", int(), AccessSet::RB, None).unwrap().category(),
            Category::Bound
        );
        assert_eq!(
            PropertyType::new("a", int(), AccessSet::W, None).unwrap().category(),
            Category::Mutable
        );
    }

    #[test]
    fn names() {
        assert!(is_qualified_name("std.Adder"));
        assert!(is_qualified_name("_x.y1"));
        assert!(!is_qualified_name("std..Adder"));
        assert!(!is_qualified_name("1a"));
        assert!(!is_qualified_name(""));
    }
}
