//! Hardcoded component types: descriptors with behavior hooks, once-only
//! default capture, and the adaptor wrapping foreign objects.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::access::AccessSet;
use crate::error::{Error, Result};
use crate::loader::TypeLoader;
use crate::runtime::Ctx;
use crate::types::{check_value, is_qualified_name, Implementation, InterfaceType, Native, PropertyType, Type};
use crate::value::Value;

/// Per-instance reactions of a native component. Properties are the only
/// ports, so behavior is expressed as reactions to property writes.
pub trait Behavior: Send {
    /// Runs once per type, while the type is being created, to declare
    /// default values through [`InitCtx::init_property_value`].
    fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()>;

    /// Runs after every write to one of the instance's properties, including
    /// writes arriving through shared cells.
    fn on_set(&mut self, ctx: &mut Ctx<'_>, prop: usize, old: &Value, new: &Value) -> Result<()> {
        let _ = (ctx, prop, old, new);
        Ok(())
    }
}

pub type BehaviorFactory = Arc<dyn Fn() -> Box<dyn Behavior> + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyDecl {
    pub name: String,
    pub value_type: String,
    pub access: AccessSet,
}

impl PropertyDecl {
    pub fn new(name: &str, value_type: &str, access: AccessSet) -> PropertyDecl {
        PropertyDecl { name: name.to_string(), value_type: value_type.to_string(), access }
    }
}

#[derive(Clone)]
pub struct NativeDescriptor {
    pub type_name: String,
    pub properties: Vec<PropertyDecl>,
    pub supertypes: Vec<String>,
    pub factory: BehaviorFactory,
}

impl NativeDescriptor {
    pub fn new<B, F>(type_name: &str, properties: Vec<PropertyDecl>, factory: F) -> NativeDescriptor
    where
        B: Behavior + 'static,
        F: Fn() -> B + Send + Sync + 'static,
    {
        NativeDescriptor {
            type_name: type_name.to_string(),
            properties,
            supertypes: Vec::new(),
            factory: Arc::new(move || Box::new(factory()) as Box<dyn Behavior>),
        }
    }
}

/// Default capture context handed to [`Behavior::init`].
pub struct InitCtx<'a> {
    type_name: &'a str,
    props: &'a [(PropertyDecl, Arc<Type>)],
    values: Vec<Option<Value>>,
}

impl InitCtx<'_> {
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.props.iter().position(|(d, _)| d.name == name).ok_or_else(|| Error::UnknownProperty {
            owner: self.type_name.to_string(),
            name: name.to_string(),
        })
    }

    /// Records the default value of a property. Works once per property.
    pub fn init_property_value(&mut self, name: &str, value: impl Into<Value>) -> Result<()> {
        let value = value.into();
        let index = self.index_of(name)?;
        check_value(&self.props[index].1, &value)?;
        if self.values[index].is_some() {
            return Err(Error::DuplicateInit(name.to_string()));
        }
        self.values[index] = Some(value);
        Ok(())
    }
}

fn check_new_name(loader: &TypeLoader, name: &str) -> Result<()> {
    if !is_qualified_name(name) {
        return Err(Error::InvalidName(name.to_string()));
    }
    if loader.is_bound(name) {
        return Err(Error::NameConflict(name.to_string()));
    }
    Ok(())
}

fn resolve_decls(loader: &Arc<TypeLoader>, decls: &[PropertyDecl]) -> Result<Vec<(PropertyDecl, Arc<Type>)>> {
    let mut seen = Vec::new();
    decls
        .iter()
        .map(|d| {
            if seen.contains(&&d.name) {
                return Err(Error::NameConflict(d.name.clone()));
            }
            seen.push(&d.name);
            Ok((d.clone(), loader.resolve(&d.value_type)?))
        })
        .collect()
}

/// Creates and registers the type for a native descriptor. The behavior is
/// instantiated exactly once, here, to capture property defaults.
pub fn type_from_descriptor(loader: &Arc<TypeLoader>, d: &NativeDescriptor) -> Result<Arc<Type>> {
    check_new_name(loader, &d.type_name)?;
    let props = resolve_decls(loader, &d.properties)?;
    let mut ctx = InitCtx { type_name: &d.type_name, props: &props, values: alloc::vec![None; props.len()] };
    let mut behavior = (d.factory)();
    behavior.init(&mut ctx)?;
    let values = ctx.values;
    let mut property_types = Vec::with_capacity(props.len());
    for ((decl, vt), value) in props.iter().zip(values) {
        let Some(value) = value else {
            return Err(Error::MissingDefault { ty: d.type_name.clone(), prop: decl.name.clone() });
        };
        property_types.push(PropertyType::new(&decl.name, vt.clone(), decl.access, Some(value))?);
    }
    let interface = InterfaceType::new(property_types)?;
    let ty = Type::new(
        &d.type_name,
        interface,
        Implementation::Native(Native::Behavior(d.factory.clone())),
        d.supertypes.clone(),
    );
    loader.register(ty)
}

/// A host object exposed through property hooks.
pub trait ForeignObject: Send + Sync {
    fn get(&self, prop: &str) -> Value;
    fn set(&self, prop: &str, value: Value);
}

#[derive(Clone)]
pub struct ForeignObjectView {
    pub shape: Vec<PropertyDecl>,
    pub object: Arc<dyn ForeignObject>,
}

/// Wraps a foreign object as a native component type. Instances delegate
/// property access to the object; defaults are read once, here, and each
/// declared property is spot-checked against its value type.
pub fn wrap_foreign(loader: &Arc<TypeLoader>, name: &str, view: ForeignObjectView) -> Result<Arc<Type>> {
    check_new_name(loader, name)?;
    let props = resolve_decls(loader, &view.shape)?;
    let mut property_types = Vec::with_capacity(props.len());
    for (decl, vt) in &props {
        let current = view.object.get(&decl.name);
        if !vt.conforms(&current) {
            return Err(Error::ShapeMismatch(alloc::format!(
                "`{}` returned {} for a {} property",
                decl.name,
                current.kind(),
                vt.name()
            )));
        }
        property_types.push(PropertyType::new(&decl.name, vt.clone(), decl.access, Some(current))?);
    }
    let interface = InterfaceType::new(property_types)?;
    let ty = Type::new(name, interface, Implementation::Native(Native::Foreign(view.object)), Vec::new());
    loader.register(ty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::Space;
    use core::sync::atomic::{AtomicUsize, Ordering};

    struct Const;

    impl Behavior for Const {
        fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
            ctx.init_property_value("value", 7)
        }
    }

    fn const_descriptor(name: &str) -> NativeDescriptor {
        NativeDescriptor::new(name, alloc::vec![PropertyDecl::new("value", "Int32", AccessSet::RWB)], || Const)
    }

    #[test]
    fn captures_defaults() {
        let loader = TypeLoader::new();
        let t = type_from_descriptor(&loader, &const_descriptor("t.Const")).unwrap();
        assert!(t.is_component());
        assert_eq!(t.property(0).unwrap().default_value(), Some(&Value::Int(7)));
        assert!(matches!(
            type_from_descriptor(&loader, &const_descriptor("t.Const")),
            Err(Error::NameConflict(_))
        ));
    }

    struct Skips;

    impl Behavior for Skips {
        fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
            ctx.init_property_value("a", 1)
        }
    }

    #[test]
    fn missing_default_is_rejected() {
        let loader = TypeLoader::new();
        let d = NativeDescriptor::new(
            "t.Skips",
            alloc::vec![PropertyDecl::new("a", "Int32", AccessSet::RW), PropertyDecl::new("b", "Int32", AccessSet::RW)],
            || Skips,
        );
        assert!(matches!(type_from_descriptor(&loader, &d), Err(Error::MissingDefault { .. })));
        assert!(!loader.is_bound("t.Skips"));
    }

    struct Twice;

    impl Behavior for Twice {
        fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
            ctx.init_property_value("value", 7)?;
            ctx.init_property_value("value", 8)
        }
    }

    struct Wrong;

    impl Behavior for Wrong {
        fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
            ctx.init_property_value("value", "x")
        }
    }

    #[test]
    fn init_errors() {
        let loader = TypeLoader::new();
        let decls = || alloc::vec![PropertyDecl::new("value", "Int32", AccessSet::RWB)];
        let twice = NativeDescriptor::new("t.Twice", decls(), || Twice);
        assert!(matches!(type_from_descriptor(&loader, &twice), Err(Error::DuplicateInit(_))));
        let wrong = NativeDescriptor::new("t.Wrong", decls(), || Wrong);
        assert!(matches!(type_from_descriptor(&loader, &wrong), Err(Error::TypeMismatch { .. })));
        let unresolved = NativeDescriptor::new(
            "t.Bad",
            alloc::vec![PropertyDecl::new("value", "no.Such", AccessSet::RWB)],
            || Const,
        );
        assert!(matches!(type_from_descriptor(&loader, &unresolved), Err(Error::UnresolvedType(_))));
    }

    #[test]
    fn ordinary_init_has_no_effect() {
        let loader = TypeLoader::new();
        let t = type_from_descriptor(&loader, &const_descriptor("t.Const")).unwrap();
        let mut space = Space::new(loader);
        let i = space.instantiate(&t).unwrap();
        space.init_property_value(i, "value", Value::Int(99)).unwrap();
        assert_eq!(space.get(i, "value").unwrap(), Value::Int(7));
        assert!(space.init_property_value(i, "value", Value::str("x")).is_err());
    }

    static INITS: AtomicUsize = AtomicUsize::new(0);

    struct Counting;

    impl Behavior for Counting {
        fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
            INITS.fetch_add(1, Ordering::SeqCst);
            ctx.init_property_value("value", 0)
        }
    }

    #[test]
    fn init_runs_once_per_type() {
        let loader = TypeLoader::new();
        let d = NativeDescriptor::new(
            "t.Counting",
            alloc::vec![PropertyDecl::new("value", "Int32", AccessSet::RWB)],
            || Counting,
        );
        let t = type_from_descriptor(&loader, &d).unwrap();
        let mut space = Space::new(loader);
        for _ in 0..10 {
            space.instantiate(&t).unwrap();
        }
        assert_eq!(INITS.load(Ordering::SeqCst), 1);
    }

    struct MapObject(spin::Mutex<alloc::collections::BTreeMap<String, Value>>);

    impl ForeignObject for MapObject {
        fn get(&self, prop: &str) -> Value {
            self.0.lock().get(prop).cloned().unwrap_or_default()
        }
        fn set(&self, prop: &str, value: Value) {
            self.0.lock().insert(prop.to_string(), value);
        }
    }

    fn map_object(x: Value) -> Arc<MapObject> {
        let mut map = alloc::collections::BTreeMap::new();
        map.insert("x".to_string(), x);
        Arc::new(MapObject(spin::Mutex::new(map)))
    }

    #[test]
    fn wrapped_objects_share_state() {
        let loader = TypeLoader::new();
        let obj = map_object(Value::Int(3));
        let shape = alloc::vec![PropertyDecl::new("x", "Int32", AccessSet::RWB)];
        let t1 = wrap_foreign(&loader, "f.One", ForeignObjectView { shape: shape.clone(), object: obj.clone() }).unwrap();
        let t2 = wrap_foreign(&loader, "f.Two", ForeignObjectView { shape, object: obj.clone() }).unwrap();
        assert_eq!(t1.property(0).unwrap().default_value(), Some(&Value::Int(3)));
        let mut space = Space::new(loader);
        let a = space.instantiate(&t1).unwrap();
        let b = space.instantiate(&t2).unwrap();
        space.set(a, "x", 11.into()).unwrap();
        assert_eq!(space.get(b, "x").unwrap(), Value::Int(11));

        let seen = Arc::new(AtomicUsize::new(0));
        let counter = seen.clone();
        space.subscribe(b, "x", move |_, _| {
            counter.fetch_add(1, Ordering::SeqCst);
        })
        .unwrap();
        space.pump();
        assert_eq!(seen.load(Ordering::SeqCst), 1, "change made through the other wrap is picked up");
    }

    #[test]
    fn shape_mismatch_is_detected() {
        let loader = TypeLoader::new();
        let obj = map_object(Value::str("not a number"));
        let shape = alloc::vec![PropertyDecl::new("x", "Int32", AccessSet::RWB)];
        assert!(matches!(
            wrap_foreign(&loader, "f.Bad", ForeignObjectView { shape, object: obj }),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
