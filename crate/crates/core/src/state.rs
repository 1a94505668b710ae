use std::fmt;

use serde::{Deserialize, Serialize};

/// One unit of ISA-state: a whole register or one bitfield of it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateRef {
    pub register: String,
    pub field: Option<String>,
}

impl StateRef {
    pub fn whole(register: impl Into<String>) -> Self {
        StateRef {
            register: register.into(),
            field: None,
        }
    }

    pub fn field(register: impl Into<String>, field: impl Into<String>) -> Self {
        StateRef {
            register: register.into(),
            field: Some(field.into()),
        }
    }

    pub fn is_whole(&self) -> bool {
        self.field.is_none()
    }

    /// The whole-register ref this state belongs to.
    pub fn parent(&self) -> StateRef {
        StateRef::whole(self.register.clone())
    }

    /// True if `self` is `other` or a whole register containing field `other`.
    pub fn covers(&self, other: &StateRef) -> bool {
        self == other || (self.is_whole() && self.register == other.register)
    }

    /// Parses `reg` or `reg.FIELD`.
    pub fn parse(text: &str) -> Option<StateRef> {
        let text = text.trim();
        if text.is_empty() {
            return None;
        }
        match text.split_once('.') {
            Some((reg, field)) if !reg.is_empty() && !field.is_empty() => Some(StateRef::field(reg, field)),
            Some(_) => None,
            None => Some(StateRef::whole(text)),
        }
    }
}

impl fmt::Display for StateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{}.{}", self.register, field),
            None => f.write_str(&self.register),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Csr,
    Gpr,
    Fpr,
    Vector,
    Internal,
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateKind::Csr => "csr",
            StateKind::Gpr => "gpr",
            StateKind::Fpr => "fpr",
            StateKind::Vector => "vector",
            StateKind::Internal => "internal",
        })
    }
}

/// A discovered state together with its width and kind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateInfo {
    pub state: StateRef,
    pub width_bits: u32,
    pub kind: StateKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Read,
    Write,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Read => "read",
            Direction::Write => "write",
        })
    }
}

/// Whether an access goes through a dedicated access instruction (CSR
/// helper, register operand) or happens as a side effect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Explicit,
    Implicit,
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessKind::Explicit => "explicit",
            AccessKind::Implicit => "implicit",
        })
    }
}
