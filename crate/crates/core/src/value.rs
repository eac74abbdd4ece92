use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::types::Type;

/// Identity of a live instance: the owning space plus the arena slot.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct InstanceId {
    pub(crate) space: u32,
    pub(crate) index: u32,
}

/// An instance used as a value. It carries its creating type, so conformance
/// checks do not need the space.
#[derive(Clone)]
pub struct InstanceRef {
    pub(crate) id: InstanceId,
    pub(crate) ty: Arc<Type>,
}

impl InstanceRef {
    pub fn id(&self) -> InstanceId {
        self.id
    }

    pub fn ty(&self) -> &Arc<Type> {
        &self.ty
    }
}

impl PartialEq for InstanceRef {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl fmt::Debug for InstanceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}#{}>", self.ty.name(), self.id.index)
    }
}

/// The uniform runtime value. Arrays and strings are immutable snapshots.
#[derive(Clone, Debug, Default)]
pub enum Value {
    #[default]
    Nil,
    Bool(bool),
    Int(i32),
    Float(f64),
    Str(Arc<str>),
    Array(Arc<[Value]>),
    Instance(InstanceRef),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Arc::from(s))
    }

    pub fn array(items: Vec<Value>) -> Value {
        Value::Array(Arc::from(items))
    }

    pub fn as_int(&self) -> Option<i32> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_instance(&self) -> Option<&InstanceRef> {
        match self {
            Value::Instance(i) => Some(i),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Nil => "nil",
            Value::Bool(_) => "boolean",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::Array(_) => "array",
            Value::Instance(_) => "instance",
        }
    }

    /// True when the value holds no live instance anywhere inside it, so it
    /// may be stored in an immutable type.
    pub fn is_immutable(&self) -> bool {
        match self {
            Value::Instance(_) => false,
            Value::Array(items) => items.iter().all(Value::is_immutable),
            _ => true,
        }
    }

    /// Calls `f` for every instance reachable in the value.
    pub fn for_each_instance(&self, f: &mut impl FnMut(&InstanceRef)) {
        match self {
            Value::Instance(i) => f(i),
            Value::Array(items) => items.iter().for_each(|v| v.for_each_instance(f)),
            _ => {}
        }
    }
}

/// Structural equality for data, identity for instances. Floats compare by
/// bit pattern so that change detection is total.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Nil, Value::Nil) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Array(a), Value::Array(b)) => a == b,
            (Value::Instance(a), Value::Instance(b)) => a == b,
            _ => false,
        }
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::str(v)
    }
}

/// Formats a float so that it always reads back as a float literal.
pub fn format_float(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v.is_nan() {
        return f.write_str("nan");
    }
    if v.is_infinite() {
        return f.write_str(if v > 0.0 { "inf" } else { "-inf" });
    }
    let text = alloc::format!("{v:?}");
    f.write_str(&text)?;
    if !text.contains(['.', 'e', 'E']) {
        f.write_str(".0")?;
    }
    Ok(())
}

/// Literal syntax: `5`, `2.5`, `true`, `"text"`, `[1 2 3]`, `nil`.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => f.write_str("nil"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => format_float(*v, f),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        '\r' => f.write_str("\\r")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Value::Array(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
            Value::Instance(i) => write!(f, "{i:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn floats_always_print_as_floats() {
        assert_eq!(Value::Float(1.0).to_string(), "1.0");
        assert_eq!(Value::Float(-2.5).to_string(), "-2.5");
        assert_eq!(Value::Float(1e300).to_string(), "1e300");
    }

    #[test]
    fn change_detection_equality() {
        assert_eq!(Value::Float(f64::NAN), Value::Float(f64::NAN));
        assert_ne!(Value::Int(1), Value::Float(1.0));
        assert_eq!(
            Value::array(alloc::vec![1.into(), 2.into()]),
            Value::array(alloc::vec![1.into(), 2.into()])
        );
        assert_eq!(Value::str("a\"b").to_string(), "\"a\\\"b\"");
    }
}
