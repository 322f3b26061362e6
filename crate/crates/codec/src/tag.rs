use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A DICOM attribute tag: `(group, element)`.
///
/// Ordering is lexicographic on `(group, element)`, which is also the order
/// in which elements are laid out in a data set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub group: u16,
    pub element: u16,
}

impl Tag {
    pub const ITEM: Tag = Tag::new(0xFFFE, 0xE000);
    pub const ITEM_DELIMITATION: Tag = Tag::new(0xFFFE, 0xE00D);
    pub const SEQUENCE_DELIMITATION: Tag = Tag::new(0xFFFE, 0xE0DD);

    pub const fn new(group: u16, element: u16) -> Self {
        Tag { group, element }
    }

    /// Vendor-private tags live in odd groups.
    pub const fn is_private(self) -> bool {
        self.group % 2 == 1
    }

    /// `(gggg,0010)`..`(gggg,00FF)` in an odd group reserve a private block.
    pub const fn is_private_creator(self) -> bool {
        self.is_private() && self.element >= 0x0010 && self.element <= 0x00FF
    }

    pub const fn is_group_length(self) -> bool {
        self.element == 0x0000
    }

    pub const fn is_delimiter_or_item(self) -> bool {
        self.group == 0xFFFE
    }

    /// The private creator slot that owns this private element: `(gggg,00YY)`
    /// where `YY` is the high byte of the element number.
    pub const fn private_creator_slot(self) -> Tag {
        Tag::new(self.group, self.element >> 8)
    }

    pub const fn as_u32(self) -> u32 {
        ((self.group as u32) << 16) | self.element as u32
    }

    pub const fn from_u32(v: u32) -> Self {
        Tag::new((v >> 16) as u16, v as u16)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.group, self.element)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid tag syntax: {0:?}")]
pub struct ParseTagError(pub String);

impl FromStr for Tag {
    type Err = ParseTagError;

    /// Accepts `(GGGG,EEEE)`, `GGGG,EEEE` and `GGGGEEEE`, case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseTagError(s.to_string());
        let t = s.trim();
        let t = t.strip_prefix('(').unwrap_or(t);
        let t = t.strip_suffix(')').unwrap_or(t);
        let (g, e) = match t.split_once(',') {
            Some((g, e)) => (g.trim(), e.trim()),
            None if t.len() == 8 => t.split_at(4),
            None => return Err(err()),
        };
        if g.len() != 4 || e.len() != 4 {
            return Err(err());
        }
        let group = u16::from_str_radix(g, 16).map_err(|_| err())?;
        let element = u16::from_str_radix(e, 16).map_err(|_| err())?;
        Ok(Tag::new(group, element))
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Location of an element inside a data set, including the chain of
/// sequence items that lead to it.
///
/// Renders as `(0008,1140)[0].(0008,1155)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TagPath {
    pub parents: Vec<(Tag, usize)>,
    pub tag: Tag,
}

impl TagPath {
    pub fn root(tag: Tag) -> Self {
        TagPath { parents: Vec::new(), tag }
    }

    pub fn child(&self, item: usize, tag: Tag) -> Self {
        let mut parents = self.parents.clone();
        parents.push((self.tag, item));
        TagPath { parents, tag }
    }

    pub fn depth(&self) -> usize {
        self.parents.len()
    }
}

impl fmt::Display for TagPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (tag, item) in &self.parents {
            write!(f, "{tag}[{item}].")?;
        }
        write!(f, "{}", self.tag)
    }
}

impl FromStr for TagPath {
    type Err = ParseTagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseTagError(s.to_string());
        let mut parents = Vec::new();
        let mut parts = s.split('.').peekable();
        while let Some(part) = parts.next() {
            if parts.peek().is_none() {
                return Ok(TagPath { parents, tag: part.parse()? });
            }
            let (tag, rest) = part.split_once('[').ok_or_else(err)?;
            let idx = rest.strip_suffix(']').ok_or_else(err)?;
            parents.push((tag.parse()?, idx.parse().map_err(|_| err())?));
        }
        Err(err())
    }
}

impl Serialize for TagPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TagPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
