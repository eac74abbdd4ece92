//! Component types, prototypes and composition.
//!
//! Native component types wrap hand-written behaviors. Composed types are
//! frozen from live [`Prototype`]s and instantiated into a [`Space`], where
//! bound properties emit change events delivered along routes.

#![cfg_attr(not(test), no_std)]
extern crate alloc;

pub mod access;
pub mod composer;
pub mod error;
pub mod kit;
pub mod loader;
pub mod native;
pub mod prototype;
pub mod runtime;
pub mod types;
pub mod value;

pub use access::AccessSet;
pub use composer::{create_from_prototype, freeze};
pub use error::{Error, Fault, Result};
pub use loader::{TypeLoader, TypeSource};
pub use native::{Behavior, ForeignObject, NativeDescriptor, PropertyDecl};
pub use prototype::{AccessTarget, PropertyPrototype, Prototype, SlotKind};
pub use runtime::{Ctx, Endpoint, RouteId, Space, SubscriptionId};
pub use types::{Category, PropertyType, Type};
pub use value::{InstanceId, Value};
