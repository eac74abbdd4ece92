use std::sync::{Arc, Mutex};

use compovm_core::prototype::AccessTarget;
use compovm_core::{create_from_prototype, kit, AccessSet, Error, Prototype, Space, TypeLoader, Value};
use proptest::prelude::*;

fn loader() -> Arc<TypeLoader> {
    let loader = TypeLoader::new();
    kit::register(&loader).unwrap();
    loader
}

/// `y = (x + x) * k` with `k` an interface input.
fn scaled(space: &mut Space, name: &str) -> Prototype {
    let mut p = Prototype::new(space, name);
    p.add_interface_property(space, "x", "Int32", AccessSet::RWB, Some(Value::Int(0))).unwrap();
    p.add_interface_property(space, "k", "Int32", AccessSet::RW, Some(Value::Int(1))).unwrap();
    p.add_interface_property(space, "y", "Int32", AccessSet::RB, None).unwrap();
    p.add_component_named(space, "add", "std.Adder").unwrap();
    p.add_component_named(space, "mul", "std.Mul").unwrap();
    p.share_property(space, "add", "a", "x").unwrap();
    p.share_property(space, "add", "b", "x").unwrap();
    p.share_property(space, "mul", "b", "k").unwrap();
    p.share_property(space, "mul", "prod", "y").unwrap();
    p.add_route(space, ("add", "sum"), ("mul", "a")).unwrap();
    p
}

proptest! {
    #[test]
    fn prototype_and_frozen_type_agree(steps in prop::collection::vec((any::<bool>(), -1000i32..1000), 1..30)) {
        let loader = loader();
        let mut space = Space::new(loader.clone());
        let mut proto = scaled(&mut space, "t.Scaled");
        let ty = create_from_prototype(&mut space, &mut proto).unwrap();
        let mut other = Space::new(loader);
        let inst = other.instantiate(&ty).unwrap();
        for (which, v) in steps {
            let name = if which { "x" } else { "k" };
            space.set(proto.interface_property(name).unwrap().instance(), "value", Value::Int(v)).unwrap();
            other.set(inst, name, Value::Int(v)).unwrap();
            prop_assert_eq!(space.pump(), other.pump());
            let y = proto.interface_property("y").unwrap().instance();
            prop_assert_eq!(space.get(y, "value").unwrap(), other.get(inst, "y").unwrap());
        }
        let (x, k) = (other.get(inst, "x").unwrap().as_int().unwrap(), other.get(inst, "k").unwrap().as_int().unwrap());
        prop_assert_eq!(other.get(inst, "y").unwrap(), Value::Int(x.wrapping_add(x).wrapping_mul(k)));
    }
}

#[test]
fn composed_types_nest() {
    let loader = loader();
    let mut space = Space::new(loader.clone());
    let mut inner = scaled(&mut space, "t.Inner");
    let inner_ty = create_from_prototype(&mut space, &mut inner).unwrap();

    let mut outer = Prototype::new(&mut space, "t.Outer");
    outer.add_interface_property(&mut space, "x", "Int32", AccessSet::RWB, Some(Value::Int(0))).unwrap();
    outer.add_interface_property(&mut space, "y", "Int32", AccessSet::RB, None).unwrap();
    outer.add_component(&mut space, "first", &inner_ty).unwrap();
    outer.add_component(&mut space, "second", &inner_ty).unwrap();
    outer.share_property(&mut space, "first", "x", "x").unwrap();
    outer.set_field(&mut space, "second", "k", Value::Int(3)).unwrap();
    outer.share_property(&mut space, "second", "y", "y").unwrap();
    outer.add_route(&mut space, ("first", "y"), ("second", "x")).unwrap();
    let outer_ty = create_from_prototype(&mut space, &mut outer).unwrap();
    assert_eq!(loader.resolve("t.Outer").unwrap().id(), outer_ty.id());

    let mut run = Space::new(loader);
    let i = run.instantiate(&outer_ty).unwrap();
    run.set(i, "x", Value::Int(5)).unwrap();
    run.pump();
    assert_eq!(run.get(i, "y").unwrap(), Value::Int(5 * 2 * 2 * 3));
    let second = run.inner_named(i, "second").unwrap();
    assert_eq!(run.get(second, "k").unwrap(), Value::Int(3));
}

#[test]
fn narrowed_slots_reject_writes_in_every_instance() {
    let loader = loader();
    let mut space = Space::new(loader.clone());
    let mut p = Prototype::new(&mut space, "t.Locked");
    p.add_component_named(&mut space, "c", "std.Const").unwrap();
    p.set_field(&mut space, "c", "value", Value::Int(9)).unwrap();
    p.restrict_access(&mut space, AccessTarget::Slot("c", "value"), AccessSet::W).unwrap();
    let c = p.composing_instance("c").unwrap();
    assert!(matches!(space.set(c, "value", Value::Int(1)), Err(Error::AccessViolation { .. })));

    let ty = create_from_prototype(&mut space, &mut p).unwrap();
    let mut run = Space::new(loader);
    for _ in 0..3 {
        let i = run.instantiate(&ty).unwrap();
        let c = run.inner_named(i, "c").unwrap();
        assert_eq!(run.get(c, "value").unwrap(), Value::Int(9));
        assert!(matches!(run.set(c, "value", Value::Int(1)), Err(Error::AccessViolation { .. })));
    }
}

#[test]
fn route_cycles_terminate_and_notify_once() {
    let loader = loader();
    let konst = loader.resolve("std.Const").unwrap();
    let mut space = Space::new(loader);
    let nodes: Vec<_> = (0..4).map(|_| space.instantiate(&konst).unwrap()).collect();
    for w in 0..4 {
        let a = space.endpoint(nodes[w], "value").unwrap();
        let b = space.endpoint(nodes[(w + 1) % 4], "value").unwrap();
        space.add_route(a, b).unwrap();
    }
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    space.subscribe(nodes[2], "value", move |_, new| log.lock().unwrap().push(new.clone())).unwrap();
    space.set(nodes[0], "value", Value::Int(7)).unwrap();
    assert!(space.pump() <= 4);
    assert!(nodes.iter().all(|&n| space.get(n, "value").unwrap() == Value::Int(7)));
    assert_eq!(*seen.lock().unwrap(), vec![Value::Int(7)]);
    assert_eq!(space.pending(), 0);
}

#[test]
fn reference_cycles_are_refused() {
    let loader = loader();
    let mut space = Space::new(loader);
    let mut p = Prototype::new(&mut space, "t.Tree");
    for d in ["a", "b", "c"] {
        p.add_component_named(&mut space, d, "std.Group").unwrap();
    }
    p.link_child(&mut space, "a", "left", "b").unwrap();
    p.link_child(&mut space, "b", "left", "c").unwrap();
    p.link_child(&mut space, "a", "right", "c").unwrap();
    assert!(matches!(p.link_child(&mut space, "c", "left", "a"), Err(Error::CycleDetected { .. })));
    assert!(p.validate(&space).is_empty());
    assert!(create_from_prototype(&mut space, &mut p).is_ok());
}
