use std::collections::BTreeMap;

use crate::{Tag, Vr};

/// Elements of a data set or sequence item, kept sorted by tag.
pub type ElementMap = BTreeMap<Tag, DataElement>;

/// Payload of a data element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    /// Raw value bytes exactly as stored (padding included).
    Bytes(Vec<u8>),
    /// Items of a sequence.
    Items(Vec<Item>),
}

/// One item of a sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Item {
    pub elements: ElementMap,
    /// Item was encoded with undefined length and an item delimiter.
    pub undefined_length: bool,
}

impl Item {
    pub fn new(elements: impl IntoIterator<Item = DataElement>) -> Self {
        Item {
            elements: elements.into_iter().map(|e| (e.tag, e)).collect(),
            undefined_length: false,
        }
    }

    pub fn get(&self, tag: Tag) -> Option<&DataElement> {
        self.elements.get(&tag)
    }

    pub fn insert(&mut self, element: DataElement) -> Option<DataElement> {
        self.elements.insert(element.tag, element)
    }
}

/// A single attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataElement {
    pub tag: Tag,
    pub vr: Vr,
    pub value: Value,
    /// Sequence (or UN-wrapped sequence) used undefined length.
    pub undefined_length: bool,
    /// Original explicit-VR code when it was not a recognized VR; the
    /// element is then handled as UN but written back with this code.
    pub unknown_vr_code: Option<[u8; 2]>,
    /// Nested items are encoded implicit VR (UN with undefined length in
    /// an explicit-VR stream).
    pub implicit_items: bool,
}

impl DataElement {
    pub fn new(tag: Tag, vr: Vr, bytes: Vec<u8>) -> Self {
        DataElement {
            tag,
            vr,
            value: Value::Bytes(bytes),
            undefined_length: false,
            unknown_vr_code: None,
            implicit_items: false,
        }
    }

    /// Zero-length element.
    pub fn empty(tag: Tag, vr: Vr) -> Self {
        if vr == Vr::SQ {
            return Self::sequence(tag, Vec::new());
        }
        Self::new(tag, vr, Vec::new())
    }

    /// String-valued element, padded to even length per the VR rules.
    pub fn text(tag: Tag, vr: Vr, value: &str) -> Self {
        Self::new(tag, vr, encode_text(vr, value))
    }

    /// Multi-valued string element, values joined with backslash.
    pub fn strings<S: AsRef<str>>(tag: Tag, vr: Vr, values: &[S]) -> Self {
        let joined: Vec<&str> = values.iter().map(|s| s.as_ref()).collect();
        Self::text(tag, vr, &joined.join("\\"))
    }

    pub fn u16(tag: Tag, value: u16) -> Self {
        Self::new(tag, Vr::US, value.to_le_bytes().to_vec())
    }

    pub fn u32(tag: Tag, value: u32) -> Self {
        Self::new(tag, Vr::UL, value.to_le_bytes().to_vec())
    }

    pub fn sequence(tag: Tag, items: Vec<Item>) -> Self {
        DataElement {
            tag,
            vr: Vr::SQ,
            value: Value::Items(items),
            undefined_length: false,
            unknown_vr_code: None,
            implicit_items: false,
        }
    }

    pub fn bytes(&self) -> Option<&[u8]> {
        match &self.value {
            Value::Bytes(b) => Some(b),
            Value::Items(_) => None,
        }
    }

    pub fn items(&self) -> Option<&[Item]> {
        match &self.value {
            Value::Items(items) => Some(items),
            Value::Bytes(_) => None,
        }
    }

    pub fn items_mut(&mut self) -> Option<&mut Vec<Item>> {
        match &mut self.value {
            Value::Items(items) => Some(items),
            Value::Bytes(_) => None,
        }
    }

    pub fn is_sequence(&self) -> bool {
        matches!(self.value, Value::Items(_))
    }

    /// Number of value bytes, ignoring nested items.
    pub fn value_len(&self) -> usize {
        self.bytes().map_or(0, <[u8]>::len)
    }

    pub fn is_empty_value(&self) -> bool {
        match &self.value {
            Value::Bytes(b) => b.is_empty(),
            Value::Items(items) => items.is_empty(),
        }
    }

    /// Whole string value with trailing padding (space/NUL) removed.
    ///
    /// Returns `None` for binary VRs and sequences. UN values decode too,
    /// since private data stored as UN is usually text.
    pub fn to_text(&self) -> Option<String> {
        let bytes = self.bytes()?;
        if !(self.vr.is_string() || self.vr == Vr::UN) {
            return None;
        }
        Some(decode_text(bytes))
    }

    /// String values split on the backslash delimiter.
    pub fn strings_value(&self) -> Vec<String> {
        match self.to_text() {
            None => Vec::new(),
            Some(t) if t.is_empty() => Vec::new(),
            Some(t) if self.vr.is_single_valued_text() => vec![t],
            Some(t) => t.split('\\').map(|s| s.trim_end_matches([' ', '\0']).to_string()).collect(),
        }
    }

    /// Replace the value with a string, padded per the VR.
    pub fn set_text(&mut self, value: &str) {
        self.value = Value::Bytes(encode_text(self.vr, value));
    }

    pub fn set_empty(&mut self) {
        self.value = match self.value {
            Value::Bytes(_) => Value::Bytes(Vec::new()),
            Value::Items(_) => Value::Items(Vec::new()),
        };
    }

    /// First unsigned integer of a US/UL/SS/SL value, or parsed IS/DS.
    pub fn to_int(&self) -> Option<i64> {
        let b = self.bytes()?;
        match self.vr {
            Vr::US if b.len() >= 2 => Some(u16::from_le_bytes([b[0], b[1]]) as i64),
            Vr::SS if b.len() >= 2 => Some(i16::from_le_bytes([b[0], b[1]]) as i64),
            Vr::UL if b.len() >= 4 => Some(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as i64),
            Vr::SL if b.len() >= 4 => Some(i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as i64),
            Vr::IS | Vr::DS => {
                let t = decode_text(b);
                let first = t.split('\\').next()?.trim();
                first.parse::<i64>().ok().or_else(|| first.parse::<f64>().ok().map(|f| f as i64))
            }
            _ => None,
        }
    }

    /// Canonical textual rendering of the value, used when comparing
    /// de-identified output against expectations.
    ///
    /// Strings are trimmed of padding; numeric binary VRs render as decimal
    /// values joined by backslash; other binary data renders as lowercase hex.
    /// Sequences render as `None`.
    pub fn to_display_string(&self) -> Option<String> {
        let b = self.bytes()?;
        if self.vr.is_string() {
            return Some(decode_text(b));
        }
        fn join<T: ToString>(vals: impl Iterator<Item = T>) -> String {
            vals.map(|v| v.to_string()).collect::<Vec<_>>().join("\\")
        }
        let s = match self.vr {
            Vr::US => join(b.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]))),
            Vr::SS => join(b.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]]))),
            Vr::UL => join(b.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap()))),
            Vr::SL => join(b.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap()))),
            Vr::FL => join(b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()))),
            Vr::FD => join(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()))),
            Vr::AT => join(b.chunks_exact(4).map(|c| {
                Tag::new(u16::from_le_bytes([c[0], c[1]]), u16::from_le_bytes([c[2], c[3]]))
            })),
            _ => b.iter().map(|x| format!("{x:02x}")).collect(),
        };
        Some(s)
    }
}

/// Decode string bytes, dropping trailing space/NUL padding. Values are
/// passed through as UTF-8 (lossy); no character-set transcoding.
pub fn decode_text(bytes: &[u8]) -> String {
    let end = bytes
        .iter()
        .rposition(|&b| b != b' ' && b != 0)
        .map_or(0, |p| p + 1);
    String::from_utf8_lossy(&bytes[..end]).into_owned()
}

/// Encode a string value with the VR's padding byte appended if the
/// length is odd.
pub fn encode_text(vr: Vr, value: &str) -> Vec<u8> {
    let mut bytes = value.as_bytes().to_vec();
    if bytes.len() % 2 == 1 {
        bytes.push(vr.padding().unwrap_or(b' '));
    }
    bytes
}
