//! Hierarchical five-character outcome codes.
//!
//! A code is five characters drawn from ASCII alphanumerics and `.`, where
//! the dots only ever pad the tail: `A....` is a level-1 code, `A1...` its
//! child, `A11..` a grandchild. The level of a code is the 1-based position of
//! its last non-dot character.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CodeError;

pub const CODE_LEN: usize = 5;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReadCode([u8; CODE_LEN]);

impl ReadCode {
    pub fn parse(raw: &str) -> Result<Self, CodeError> {
        let bytes = raw.as_bytes();
        if bytes.len() != CODE_LEN {
            return Err(CodeError::Length {
                code: raw.to_string(),
                len: raw.chars().count(),
            });
        }
        if let Some(&bad) = bytes
            .iter()
            .find(|b| !(b.is_ascii_alphanumeric() || **b == b'.'))
        {
            return Err(CodeError::Character {
                code: raw.to_string(),
                found: bad as char,
            });
        }
        let level = bytes
            .iter()
            .rposition(|&b| b != b'.')
            .ok_or_else(|| CodeError::Empty(raw.to_string()))?;
        if bytes[..level].contains(&b'.') {
            return Err(CodeError::InteriorDot(raw.to_string()));
        }
        let mut out = [0u8; CODE_LEN];
        out.copy_from_slice(bytes);
        Ok(ReadCode(out))
    }

    /// Index (1-based) of the last non-dot character, in `1..=5`.
    pub fn level(&self) -> usize {
        // Construction guarantees at least one non-dot character.
        self.0.iter().rposition(|&b| b != b'.').map_or(0, |i| i + 1)
    }

    /// `self` is exactly one level above `child` and agrees on its own prefix.
    pub fn is_parent_of(&self, child: &ReadCode) -> bool {
        let lp = self.level();
        lp + 1 == child.level() && self.0[..lp] == child.0[..lp]
    }

    /// `self` is strictly above `code` in the hierarchy (any number of levels).
    pub fn is_ancestor_of(&self, code: &ReadCode) -> bool {
        let la = self.level();
        la < code.level() && self.0[..la] == code.0[..la]
    }

    /// The code one level up, or `None` for a level-1 code.
    pub fn parent(&self) -> Option<ReadCode> {
        let level = self.level();
        if level <= 1 {
            return None;
        }
        let mut out = self.0;
        out[level - 1] = b'.';
        Some(ReadCode(out))
    }

    pub fn as_str(&self) -> &str {
        // Only ASCII bytes are accepted by `parse`.
        std::str::from_utf8(&self.0).expect("codes are ASCII")
    }
}

/// Level of a code, `1..=5`.
pub fn code_level(code: &ReadCode) -> usize {
    code.level()
}

pub fn is_parent(parent: &ReadCode, child: &ReadCode) -> bool {
    parent.is_parent_of(child)
}

pub fn is_descendant(ancestor: &ReadCode, code: &ReadCode) -> bool {
    ancestor.is_ancestor_of(code)
}

impl FromStr for ReadCode {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReadCode::parse(s)
    }
}

impl fmt::Display for ReadCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for ReadCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReadCode({})", self.as_str())
    }
}

impl Serialize for ReadCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ReadCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        ReadCode::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// A code together with the free-text description it was recorded under.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeCode {
    pub code: ReadCode,
    pub description: String,
}

impl OutcomeCode {
    pub fn new(code: &str, description: impl Into<String>) -> Result<Self, CodeError> {
        Ok(OutcomeCode {
            code: ReadCode::parse(code)?,
            description: description.into(),
        })
    }
}
