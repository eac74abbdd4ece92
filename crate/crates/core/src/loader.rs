//! Parent-first, caching resolution of dotted names to types.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use spin::{Mutex, RwLock};

use crate::error::{Error, Result};
use crate::types::{self, Type, ValueDomain};

/// A place a loader can materialize types from, such as a directory of
/// serialized type files. Implementations register what they produce in the
/// loader they are given.
pub trait TypeSource: Send + Sync {
    fn load(&self, loader: &Arc<TypeLoader>, name: &str) -> Result<Option<Arc<Type>>>;
}

pub struct TypeLoader {
    parent: Option<Arc<TypeLoader>>,
    cache: RwLock<BTreeMap<String, Arc<Type>>>,
    sources: RwLock<Vec<Arc<dyn TypeSource>>>,
    loading: Mutex<BTreeSet<String>>,
}

impl core::fmt::Debug for TypeLoader {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TypeLoader")
            .field("types", &self.cache.read().len())
            .field("has_parent", &self.parent.is_some())
            .finish()
    }
}

impl TypeLoader {
    /// A root loader holding the builtin value types.
    pub fn new() -> Arc<TypeLoader> {
        let loader = TypeLoader::empty(None);
        {
            let mut cache = loader.cache.write();
            for (name, domain) in [
                (types::INT32, ValueDomain::Int32),
                (types::FLOAT64, ValueDomain::Float64),
                (types::BOOLEAN, ValueDomain::Boolean),
                (types::STRING, ValueDomain::String),
                (types::COMPONENT, ValueDomain::Component),
            ] {
                cache.insert(name.to_string(), Arc::new(Type::builtin(name, domain)));
            }
        }
        Arc::new(loader)
    }

    pub fn with_parent(parent: &Arc<TypeLoader>) -> Arc<TypeLoader> {
        Arc::new(TypeLoader::empty(Some(parent.clone())))
    }

    fn empty(parent: Option<Arc<TypeLoader>>) -> TypeLoader {
        TypeLoader {
            parent,
            cache: RwLock::new(BTreeMap::new()),
            sources: RwLock::new(Vec::new()),
            loading: Mutex::new(BTreeSet::new()),
        }
    }

    pub fn parent(&self) -> Option<&Arc<TypeLoader>> {
        self.parent.as_ref()
    }

    pub fn add_source(&self, source: Arc<dyn TypeSource>) {
        self.sources.write().push(source);
    }

    /// Cache-only lookup through the loader chain.
    pub fn lookup(&self, name: &str) -> Option<Arc<Type>> {
        if let Some(t) = self.cache.read().get(name) {
            return Some(t.clone());
        }
        self.parent.as_ref().and_then(|p| p.lookup(name))
    }

    pub fn is_bound(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    /// Names materialized in this loader and its ancestors, sorted.
    pub fn names(&self) -> Vec<String> {
        let mut names: BTreeSet<String> = self.cache.read().keys().cloned().collect();
        if let Some(p) = &self.parent {
            names.extend(p.names());
        }
        names.into_iter().collect()
    }

    /// Binds a new type. Fails when the name is already bound anywhere in
    /// the chain.
    pub fn register(&self, ty: Type) -> Result<Arc<Type>> {
        if let Some(p) = &self.parent {
            if p.is_bound(ty.name()) {
                return Err(Error::NameConflict(ty.name().to_string()));
            }
        }
        let mut cache = self.cache.write();
        if cache.contains_key(ty.name()) {
            return Err(Error::NameConflict(ty.name().to_string()));
        }
        let ty = Arc::new(ty);
        cache.insert(ty.name().to_string(), ty.clone());
        Ok(ty)
    }

    /// Inserts unless a type of that name exists; the first insert wins.
    fn intern(&self, ty: Type) -> Arc<Type> {
        let mut cache = self.cache.write();
        cache.entry(ty.name().to_string()).or_insert_with(|| Arc::new(ty)).clone()
    }

    /// Resolves a name: own cache, then the parent, then synthesized array
    /// and variable forms, then the registered sources. Each name is
    /// materialized once; later calls return the identical type.
    pub fn resolve(self: &Arc<Self>, name: &str) -> Result<Arc<Type>> {
        if let Some(t) = self.cache.read().get(name) {
            return Ok(t.clone());
        }
        if let Some(parent) = &self.parent {
            match parent.resolve(name) {
                Ok(t) => return Ok(t),
                Err(Error::UnresolvedType(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if let Some(element) = name.strip_suffix("[]") {
            let element = self.resolve(element)?;
            return Ok(self.array_type(&element));
        }
        if let Some(inner) = name.strip_prefix("var<").and_then(|n| n.strip_suffix('>')) {
            let value_type = self.resolve(inner)?;
            return Ok(self.synthesize_variable_type(&value_type));
        }
        if !types::is_qualified_name(name) {
            return Err(Error::UnresolvedType(name.to_string()));
        }
        self.load_from_sources(name)
    }

    fn load_from_sources(self: &Arc<Self>, name: &str) -> Result<Arc<Type>> {
        if !self.loading.lock().insert(name.to_string()) {
            // Re-entrant request for a name being loaded: a definition cycle.
            return Err(Error::UnresolvedType(name.to_string()));
        }
        let sources: Vec<_> = self.sources.read().clone();
        let mut result = Err(Error::UnresolvedType(name.to_string()));
        for source in sources {
            match source.load(self, name) {
                Ok(Some(ty)) => {
                    result = Ok(self.intern_arc(ty));
                    break;
                }
                Ok(None) => {}
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        self.loading.lock().remove(name);
        result
    }

    fn intern_arc(&self, ty: Arc<Type>) -> Arc<Type> {
        let mut cache = self.cache.write();
        cache.entry(ty.name().to_string()).or_insert(ty).clone()
    }

    /// The array type `E[]`, created once per element type.
    pub fn array_type(&self, element: &Arc<Type>) -> Arc<Type> {
        let name = alloc::format!("{}[]", element.name());
        match self.lookup(&name) {
            Some(t) if t.element_type().is_some_and(|e| e.id() == element.id()) => t,
            _ => self.intern(Type::array_of(element.clone())),
        }
    }

    /// The typed-variable type `var<V>` used for property prototypes, created
    /// once per value type.
    pub fn synthesize_variable_type(&self, value_type: &Arc<Type>) -> Arc<Type> {
        let name = alloc::format!("var<{}>", value_type.name());
        if let Some(t) = self.lookup(&name) {
            if let crate::types::Implementation::SynthesizedVariable(v) = t.implementation() {
                if v.id() == value_type.id() {
                    return t;
                }
            }
        }
        self.intern(Type::variable_of(value_type.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::access::AccessSet;
    use crate::value::Value;

    #[test]
    fn builtins_resolve_once() {
        let loader = TypeLoader::new();
        let a = loader.resolve("Int32").unwrap();
        let b = loader.resolve("Int32").unwrap();
        assert_eq!(a.id(), b.id());
        assert!(matches!(loader.resolve("no.Such"), Err(Error::UnresolvedType(_))));
    }

    #[test]
    fn synthesized_variables_are_cached() {
        let loader = TypeLoader::new();
        let v1 = loader.resolve("var<Int32>").unwrap();
        let v2 = loader.synthesize_variable_type(&loader.resolve("Int32").unwrap());
        assert_eq!(v1.id(), v2.id());
        assert_eq!(v1.name(), "var<Int32>");
        let p = v1.property(0).unwrap();
        assert_eq!(p.name(), "value");
        assert_eq!(p.access(), AccessSet::RWB);
        assert_eq!(p.default_value(), Some(&Value::Int(0)));
        assert!(v1.is_component());
    }

    #[test]
    fn indexed_variables_get_indexed_rights() {
        let loader = TypeLoader::new();
        let v = loader.resolve("var<Int32[]>").unwrap();
        let p = v.property(0).unwrap();
        assert_eq!(p.access(), AccessSet::RWB | AccessSet::IR | AccessSet::IW);
        assert_eq!(p.default_value(), Some(&Value::array(Vec::new())));
    }

    #[test]
    fn child_delegates_to_parent_first() {
        let root = TypeLoader::new();
        let child = TypeLoader::with_parent(&root);
        let from_child = child.resolve("var<Boolean>").unwrap();
        let from_root = root.resolve("var<Boolean>").unwrap();
        assert_eq!(from_child.id(), from_root.id());
        assert!(child.names().contains(&"Int32".to_string()));
    }

    #[test]
    fn register_rejects_bound_names() {
        let root = TypeLoader::new();
        let child = TypeLoader::with_parent(&root);
        let int = root.resolve("Int32").unwrap();
        let dup = Type::builtin("Int32", ValueDomain::Int32);
        assert!(matches!(child.register(dup), Err(Error::NameConflict(_))));
        drop(int);
    }

    struct Counting(spin::Mutex<usize>);

    impl TypeSource for Counting {
        fn load(&self, loader: &Arc<TypeLoader>, name: &str) -> Result<Option<Arc<Type>>> {
            *self.0.lock() += 1;
            if name == "demo.Thing" {
                return loader.register(Type::builtin(name, ValueDomain::Boolean)).map(Some);
            }
            Ok(None)
        }
    }

    #[test]
    fn sources_materialize_once() {
        let loader = TypeLoader::new();
        let source = Arc::new(Counting(spin::Mutex::new(0)));
        loader.add_source(source.clone());
        let a = loader.resolve("demo.Thing").unwrap();
        let b = loader.resolve("demo.Thing").unwrap();
        assert_eq!(a.id(), b.id());
        assert_eq!(*source.0.lock(), 1);
        assert!(loader.resolve("demo.Other").is_err());
    }
}
