//! The standard component kit registered under `std.`. All members are
//! deterministic and timer-free.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::access::AccessSet;
use crate::error::Result;
use crate::loader::TypeLoader;
use crate::native::{type_from_descriptor, Behavior, InitCtx, NativeDescriptor, PropertyDecl};
use crate::runtime::Ctx;
use crate::types::Type;
use crate::value::Value;

const RW: AccessSet = AccessSet::RW;
const RB: AccessSet = AccessSet::RB;

fn decl(name: &str, ty: &str, access: AccessSet) -> PropertyDecl {
    PropertyDecl::new(name, ty, access)
}

fn zeros(ctx: &mut InitCtx<'_>, names: &[&str]) -> Result<()> {
    names.iter().try_for_each(|n| ctx.init_property_value(n, 0))
}

/// `value` (Int32, RWB).
pub struct Const;

impl Behavior for Const {
    fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
        zeros(ctx, &["value"])
    }
}

/// Applies a binary operation to `a` and `b` into a bound output.
pub struct Binary {
    op: fn(i32, i32) -> i32,
    out: &'static str,
}

impl Behavior for Binary {
    fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
        zeros(ctx, &["a", "b"])?;
        ctx.init_property_value(self.out, 0)
    }

    fn on_set(&mut self, ctx: &mut Ctx<'_>, prop: usize, _: &Value, _: &Value) -> Result<()> {
        if prop < 2 {
            let out = (self.op)(ctx.get_int(0)?, ctx.get_int(1)?);
            ctx.set(2, Value::Int(out))?;
        }
        Ok(())
    }
}

/// `in` flows to `out` while `open` is true.
pub struct Gate;

impl Behavior for Gate {
    fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
        zeros(ctx, &["in", "out"])?;
        ctx.init_property_value("open", false)
    }

    fn on_set(&mut self, ctx: &mut Ctx<'_>, prop: usize, _: &Value, _: &Value) -> Result<()> {
        if prop < 2 && ctx.get(1)? == Value::Bool(true) {
            let v = ctx.get(0)?;
            ctx.set(2, v)?;
        }
        Ok(())
    }
}

/// Any write to `tick` increments `count`.
pub struct Counter;

impl Behavior for Counter {
    fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
        zeros(ctx, &["tick", "count"])
    }

    fn on_set(&mut self, ctx: &mut Ctx<'_>, prop: usize, _: &Value, _: &Value) -> Result<()> {
        if prop == 0 {
            let next = ctx.get_int(1)?.wrapping_add(1);
            ctx.set(1, Value::Int(next))?;
        }
        Ok(())
    }
}

/// `out` follows `in`.
pub struct Relay;

impl Behavior for Relay {
    fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
        zeros(ctx, &["in", "out"])
    }

    fn on_set(&mut self, ctx: &mut Ctx<'_>, prop: usize, _: &Value, new: &Value) -> Result<()> {
        if prop == 0 {
            ctx.set(1, new.clone())?;
        }
        Ok(())
    }
}

/// Appends every write to `in` to the `trace` array.
pub struct Probe;

impl Behavior for Probe {
    fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
        ctx.init_property_value("in", 0)?;
        ctx.init_property_value("trace", Value::array(Vec::new()))
    }

    fn on_set(&mut self, ctx: &mut Ctx<'_>, prop: usize, _: &Value, new: &Value) -> Result<()> {
        if prop == 0 {
            let mut trace = ctx.get(1)?.as_array().map(<[Value]>::to_vec).unwrap_or_default();
            trace.push(new.clone());
            ctx.set(1, Value::array(trace))?;
        }
        Ok(())
    }
}

/// Two component references; gives the kit a reference-graph vocabulary.
pub struct Group;

impl Behavior for Group {
    fn init(&mut self, ctx: &mut InitCtx<'_>) -> Result<()> {
        ctx.init_property_value("left", Value::Nil)?;
        ctx.init_property_value("right", Value::Nil)
    }
}

pub fn descriptors() -> Vec<NativeDescriptor> {
    alloc::vec![
        NativeDescriptor::new("std.Const", alloc::vec![decl("value", "Int32", AccessSet::RWB)], || Const),
        NativeDescriptor::new(
            "std.Adder",
            alloc::vec![decl("a", "Int32", RW), decl("b", "Int32", RW), decl("sum", "Int32", RB)],
            || Binary { op: i32::wrapping_add, out: "sum" },
        ),
        NativeDescriptor::new(
            "std.Mul",
            alloc::vec![decl("a", "Int32", RW), decl("b", "Int32", RW), decl("prod", "Int32", RB)],
            || Binary { op: i32::wrapping_mul, out: "prod" },
        ),
        NativeDescriptor::new(
            "std.Gate",
            alloc::vec![decl("in", "Int32", RW), decl("open", "Boolean", RW), decl("out", "Int32", RB)],
            || Gate,
        ),
        NativeDescriptor::new(
            "std.Counter",
            alloc::vec![decl("tick", "Int32", AccessSet::W), decl("count", "Int32", RB)],
            || Counter,
        ),
        NativeDescriptor::new("std.Relay", alloc::vec![decl("in", "Int32", RW), decl("out", "Int32", RB)], || Relay),
        NativeDescriptor::new(
            "std.Probe",
            alloc::vec![decl("in", "Int32", RW), decl("trace", "Int32[]", RB | AccessSet::IR)],
            || Probe,
        ),
        NativeDescriptor::new(
            "std.Group",
            alloc::vec![decl("left", "Component", RW), decl("right", "Component", RW)],
            || Group,
        ),
    ]
}

/// Registers every kit component in `loader`.
pub fn register(loader: &Arc<TypeLoader>) -> Result<Vec<Arc<Type>>> {
    descriptors().iter().map(|d| type_from_descriptor(loader, d)).collect()
}
