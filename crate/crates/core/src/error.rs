use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::access::AccessSet;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the type system, the runtime and the composer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unresolved type `{0}`")]
    UnresolvedType(String),
    #[error("invalid type name `{0}`")]
    InvalidName(String),
    #[error("unknown property `{name}` on `{owner}`")]
    UnknownProperty { owner: String, name: String },
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("property `{prop}` does not permit {needed} access")]
    AccessViolation { prop: String, needed: AccessSet },
    #[error("invalid access set {0}")]
    InvalidAccess(String),
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: String, found: String },
    #[error("name `{0}` is already bound")]
    NameConflict(String),
    #[error("type `{ty}` leaves property `{prop}` without a default value")]
    MissingDefault { ty: String, prop: String },
    #[error("property `{0}` initialized twice during default capture")]
    DuplicateInit(String),
    #[error("`{0}` is not a component")]
    NotAComponent(String),
    #[error("index {index} out of bounds for length {len}")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("reference edge {from} -> {to} would close a cycle")]
    CycleDetected { from: String, to: String },
    #[error("foreign object does not match its declared shape: {0}")]
    ShapeMismatch(String),
    #[error("validation failed: {}", DisplayFaults(.0))]
    ValidationFault(Vec<Fault>),
    #[error("type `{0}` cannot be serialized")]
    NotSerializable(String),
    #[error("failed to load `{name}`: {message}")]
    Load { name: String, message: String },
}

impl Error {
    pub(crate) fn mismatch(expected: impl fmt::Display, found: impl fmt::Display) -> Self {
        Error::TypeMismatch {
            expected: alloc::format!("{expected}"),
            found: alloc::format!("{found}"),
        }
    }
}

/// One problem found by prototype validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    EmptyName,
    NameConflict(String),
    CycleDetected(Vec<String>),
    IncompatibleSharing { def: String, prop: String },
    IllegalRoute { route: String, reason: String },
    NotAComponent(String),
    ImmutableShared(String),
    ForeignReference { def: String, prop: String },
    InvalidName(String),
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fault::EmptyName => write!(f, "prototype has no name"),
            Fault::NameConflict(n) => write!(f, "name `{n}` is defined more than once"),
            Fault::CycleDetected(path) => write!(f, "reference cycle through {}", path.join(" -> ")),
            Fault::IncompatibleSharing { def, prop } => {
                write!(f, "{def}.{prop} shares a property prototype of an incompatible type")
            }
            Fault::IllegalRoute { route, reason } => write!(f, "route {route}: {reason}"),
            Fault::NotAComponent(p) => {
                write!(f, "interface property `{p}` has no default value (not a component)")
            }
            Fault::ImmutableShared(p) => {
                write!(f, "read-only interface property `{p}` is shared with an implementation slot")
            }
            Fault::ForeignReference { def, prop } => {
                write!(f, "{def}.{prop} references an instance outside the prototype")
            }
            Fault::InvalidName(n) => write!(f, "`{n}` is not a valid type name"),
        }
    }
}

struct DisplayFaults<'a>(&'a [Fault]);

impl fmt::Display for DisplayFaults<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fault) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{fault}")?;
        }
        Ok(())
    }
}
