//! Property access rights: readable, writable, bound, and the indexed variants.

use core::fmt;
use core::ops::{BitOr, Sub};

use alloc::string::ToString;

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AccessSet(u8);

impl AccessSet {
    pub const NONE: AccessSet = AccessSet(0);
    pub const R: AccessSet = AccessSet(1);
    pub const W: AccessSet = AccessSet(1 << 1);
    pub const B: AccessSet = AccessSet(1 << 2);
    pub const IR: AccessSet = AccessSet(1 << 3);
    pub const IW: AccessSet = AccessSet(1 << 4);
    pub const RW: AccessSet = AccessSet(0b011);
    pub const RB: AccessSet = AccessSet(0b101);
    pub const RWB: AccessSet = AccessSet(0b111);
    pub const ALL: AccessSet = AccessSet(0b11111);

    const NAMES: [(AccessSet, &'static str); 5] = [
        (AccessSet::R, "R"),
        (AccessSet::W, "W"),
        (AccessSet::B, "B"),
        (AccessSet::IR, "IR"),
        (AccessSet::IW, "IW"),
    ];

    pub const fn bits(self) -> u8 {
        self.0
    }

    pub const fn from_bits(bits: u8) -> Option<AccessSet> {
        if bits & !Self::ALL.0 == 0 {
            Some(AccessSet(bits))
        } else {
            None
        }
    }

    pub const fn contains(self, other: AccessSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub const fn is_subset(self, other: AccessSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn union(self, other: AccessSet) -> AccessSet {
        AccessSet(self.0 | other.0)
    }

    pub const fn difference(self, other: AccessSet) -> AccessSet {
        AccessSet(self.0 & !other.0)
    }

    pub fn is_indexed(self) -> bool {
        self.0 & (Self::IR.0 | Self::IW.0) != 0
    }

    /// Checks the representation invariants. `B` requires `R`; the indexed
    /// rights require an array-valued property.
    pub fn check(self, array_valued: bool) -> Result<AccessSet> {
        if self.contains(AccessSet::B) && !self.contains(AccessSet::R) {
            return Err(Error::InvalidAccess(alloc::format!("{self}: B requires R")));
        }
        if self.is_indexed() && !array_valued {
            return Err(Error::InvalidAccess(alloc::format!(
                "{self}: indexed access on a non-array property"
            )));
        }
        Ok(self)
    }

    /// Parses the compact flag form used in source files, e.g. `RWB` or `RIR`.
    pub fn parse(text: &str) -> Result<AccessSet> {
        let mut set = AccessSet::NONE;
        let mut rest = text;
        while !rest.is_empty() {
            let (flag, len) = if rest.starts_with("IR") {
                (AccessSet::IR, 2)
            } else if rest.starts_with("IW") {
                (AccessSet::IW, 2)
            } else {
                match rest.as_bytes()[0] {
                    b'R' => (AccessSet::R, 1),
                    b'W' => (AccessSet::W, 1),
                    b'B' => (AccessSet::B, 1),
                    _ => return Err(Error::InvalidAccess(text.to_string())),
                }
            };
            if set.contains(flag) {
                return Err(Error::InvalidAccess(text.to_string()));
            }
            set = set | flag;
            rest = &rest[len..];
        }
        Ok(set)
    }
}

impl BitOr for AccessSet {
    type Output = AccessSet;
    fn bitor(self, rhs: AccessSet) -> AccessSet {
        self.union(rhs)
    }
}

impl Sub for AccessSet {
    type Output = AccessSet;
    fn sub(self, rhs: AccessSet) -> AccessSet {
        self.difference(rhs)
    }
}

impl fmt::Display for AccessSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (flag, name) in Self::NAMES {
            if self.contains(flag) {
                f.write_str(name)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for AccessSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

/// Removes the `deny` rights from `base`. Never adds rights; fails when the
/// remainder is unrepresentable (a bound property that lost `R`).
pub fn narrow_access(base: AccessSet, deny: AccessSet) -> Result<AccessSet> {
    let narrowed = base - deny;
    if narrowed.contains(AccessSet::B) && !narrowed.contains(AccessSet::R) {
        return Err(Error::InvalidAccess(alloc::format!(
            "denying {deny} on {base} leaves B without R"
        )));
    }
    Ok(narrowed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narrowing_is_set_difference() {
        assert_eq!(narrow_access(AccessSet::RWB, AccessSet::W).unwrap(), AccessSet::RB);
        assert_eq!(narrow_access(AccessSet::R, AccessSet::NONE).unwrap(), AccessSet::R);
    }

    #[test]
    fn bound_without_read_is_rejected() {
        assert!(matches!(
            narrow_access(AccessSet::RB, AccessSet::R),
            Err(Error::InvalidAccess(_))
        ));
        assert!(AccessSet::B.check(false).is_err());
        assert!(AccessSet::IR.check(false).is_err());
        assert!((AccessSet::R | AccessSet::IR).check(true).is_ok());
    }

    #[test]
    fn flag_text_round_trips() {
        for bits in 0..=AccessSet::ALL.bits() {
            let set = AccessSet::from_bits(bits).unwrap();
            let text = alloc::format!("{set}");
            assert_eq!(AccessSet::parse(&text).unwrap(), set, "{text}");
        }
        assert!(AccessSet::parse("RR").is_err());
        assert!(AccessSet::parse("X").is_err());
    }

    proptest::proptest! {
        #[test]
        fn narrowing_is_monotone_and_idempotent(base in 0u8..32, deny in 0u8..32) {
            let base = AccessSet::from_bits(base).unwrap();
            let deny = AccessSet::from_bits(deny).unwrap();
            if let Ok(once) = narrow_access(base, deny) {
                proptest::prop_assert!(once.is_subset(base));
                proptest::prop_assert_eq!(narrow_access(once, deny).unwrap(), once);
            }
        }
    }
}
