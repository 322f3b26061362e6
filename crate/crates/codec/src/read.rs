use crate::dataset::{tags, DataSet, TransferSyntax};
use crate::dictionary;
use crate::element::{DataElement, ElementMap, Item, Value};
use crate::error::{CodecError, Result};
use crate::{Tag, Vr};

const UNDEFINED: u32 = 0xFFFF_FFFF;

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept a bare data set (no preamble/magic). The encoding is sniffed:
    /// explicit VR if bytes 4..6 hold a known VR code, implicit otherwise.
    pub lenient: bool,
}

/// Parse a Part-10 file.
pub fn parse_file(bytes: &[u8]) -> Result<DataSet> {
    parse_file_with(bytes, ParseOptions::default())
}

pub fn parse_file_with(bytes: &[u8], opts: ParseOptions) -> Result<DataSet> {
    if has_part10_magic(bytes) {
        let preamble = bytes[..128].to_vec();
        let mut r = Reader { buf: bytes, pos: 132, end: bytes.len() };
        let meta = r.read_meta()?;
        let ts_uid = meta
            .get(&tags::TRANSFER_SYNTAX_UID)
            .and_then(DataElement::to_text)
            .unwrap_or_default();
        let ts = TransferSyntax::from_uid(&ts_uid).ok_or(CodecError::UnsupportedTransferSyntax(ts_uid))?;
        let elements = r.read_elements(ts, None)?;
        return Ok(DataSet { preamble, meta, elements, transfer_syntax: ts });
    }
    if !opts.lenient {
        return Err(CodecError::MissingMagic);
    }
    let ts = sniff_syntax(bytes);
    let mut r = Reader { buf: bytes, pos: 0, end: bytes.len() };
    let elements = r.read_elements(ts, None)?;
    let mut ds = DataSet::new(ts);
    ds.elements = elements;
    Ok(ds)
}

/// 128-byte preamble followed by `DICM`.
pub fn has_part10_magic(bytes: &[u8]) -> bool {
    bytes.len() >= 132 && &bytes[128..132] == b"DICM"
}

fn sniff_syntax(bytes: &[u8]) -> TransferSyntax {
    match bytes.get(4..6) {
        Some(code) if Vr::from_code(code).is_some() => TransferSyntax::ExplicitVrLittleEndian,
        _ => TransferSyntax::ImplicitVrLittleEndian,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.end - self.pos
    }

    fn u16(&mut self) -> Option<u16> {
        if self.remaining() < 2 {
            return None;
        }
        let v = u16::from_le_bytes([self.buf[self.pos], self.buf[self.pos + 1]]);
        self.pos += 2;
        Some(v)
    }

    fn u32(&mut self) -> Option<u32> {
        if self.remaining() < 4 {
            return None;
        }
        let v = u32::from_le_bytes(self.buf[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Some(v)
    }

    fn peek_tag(&self) -> Option<Tag> {
        if self.remaining() < 4 {
            return None;
        }
        let g = u16::from_le_bytes([self.buf[self.pos], self.buf[self.pos + 1]]);
        let e = u16::from_le_bytes([self.buf[self.pos + 2], self.buf[self.pos + 3]]);
        Some(Tag::new(g, e))
    }

    fn read_meta(&mut self) -> Result<ElementMap> {
        let mut meta = ElementMap::new();
        while let Some(tag) = self.peek_tag() {
            if tag.group != 0x0002 {
                break;
            }
            let e = self.read_element(TransferSyntax::ExplicitVrLittleEndian)?;
            meta.insert(e.tag, e);
        }
        Ok(meta)
    }

    /// Read elements until the end of the window, or until `stop` (an item
    /// delimiter) is consumed.
    fn read_elements(&mut self, ts: TransferSyntax, stop: Option<Tag>) -> Result<ElementMap> {
        let mut map = ElementMap::new();
        loop {
            if self.remaining() == 0 {
                if let Some(stop) = stop {
                    return Err(CodecError::TruncatedElement { tag: stop, offset: self.pos });
                }
                return Ok(map);
            }
            let offset = self.pos;
            let tag = self.peek_tag().ok_or(CodecError::TruncatedElement { tag: Tag::new(0, 0), offset })?;
            if Some(tag) == stop {
                self.pos += 4;
                self.u32().ok_or(CodecError::TruncatedElement { tag, offset })?;
                return Ok(map);
            }
            if tag.is_delimiter_or_item() {
                return Err(CodecError::UnexpectedDelimiter { tag, offset });
            }
            let e = self.read_element(ts)?;
            map.insert(e.tag, e);
        }
    }

    fn read_element(&mut self, ts: TransferSyntax) -> Result<DataElement> {
        let offset = self.pos;
        let truncated = |tag| CodecError::TruncatedElement { tag, offset };
        let group = self.u16().ok_or(truncated(Tag::new(0, 0)))?;
        let elem = self.u16().ok_or(truncated(Tag::new(group, 0)))?;
        let tag = Tag::new(group, elem);

        let (vr, unknown_code, len) = if ts.is_explicit() {
            if self.remaining() < 2 {
                return Err(truncated(tag));
            }
            let code = [self.buf[self.pos], self.buf[self.pos + 1]];
            self.pos += 2;
            let (vr, unknown) = match Vr::from_code(&code) {
                Some(vr) => (vr, None),
                None if code.iter().all(u8::is_ascii_uppercase) => (Vr::UN, Some(code)),
                None => return Err(CodecError::InvalidVr { tag, offset }),
            };
            let long = unknown.is_some() || vr.has_long_length();
            let len = if long {
                self.u16().ok_or(truncated(tag))?;
                self.u32().ok_or(truncated(tag))?
            } else {
                self.u16().ok_or(truncated(tag))? as u32
            };
            (vr, unknown, len)
        } else {
            let len = self.u32().ok_or(truncated(tag))?;
            let vr = match dictionary::implied_vr(tag) {
                Some(vr) => vr,
                None if len == UNDEFINED => Vr::SQ,
                None => Vr::UN,
            };
            (vr, None, len)
        };

        if vr == Vr::SQ || (len == UNDEFINED && vr == Vr::UN) {
            // UN with undefined length wraps an implicit-VR sequence.
            let implicit_items = vr == Vr::UN;
            let item_ts = if implicit_items { TransferSyntax::ImplicitVrLittleEndian } else { ts };
            let items = if len == UNDEFINED {
                self.read_items_undefined(item_ts, tag)?
            } else {
                let len = len as usize;
                if self.remaining() < len {
                    return Err(truncated(tag));
                }
                let mut sub = Reader { buf: self.buf, pos: self.pos, end: self.pos + len };
                let items = sub.read_items_defined(item_ts)?;
                self.pos += len;
                items
            };
            return Ok(DataElement {
                tag,
                vr,
                value: Value::Items(items),
                undefined_length: len == UNDEFINED,
                unknown_vr_code: unknown_code,
                implicit_items,
            });
        }

        if len == UNDEFINED {
            return Err(CodecError::UnexpectedUndefinedLength { tag, offset });
        }
        let len = len as usize;
        if self.remaining() < len {
            return Err(truncated(tag));
        }
        let bytes = self.buf[self.pos..self.pos + len].to_vec();
        self.pos += len;
        let mut e = DataElement::new(tag, vr, bytes);
        e.unknown_vr_code = unknown_code;
        Ok(e)
    }

    fn read_item(&mut self, ts: TransferSyntax) -> Result<Item> {
        let offset = self.pos;
        let tag = self.peek_tag().ok_or(CodecError::TruncatedElement { tag: Tag::ITEM, offset })?;
        if tag != Tag::ITEM {
            return Err(CodecError::UnexpectedDelimiter { tag, offset });
        }
        self.pos += 4;
        let len = self.u32().ok_or(CodecError::TruncatedElement { tag, offset })?;
        if len == UNDEFINED {
            let elements = self.read_elements(ts, Some(Tag::ITEM_DELIMITATION))?;
            return Ok(Item { elements, undefined_length: true });
        }
        let len = len as usize;
        if self.remaining() < len {
            return Err(CodecError::TruncatedElement { tag, offset });
        }
        let mut sub = Reader { buf: self.buf, pos: self.pos, end: self.pos + len };
        let elements = sub.read_elements(ts, None)?;
        self.pos += len;
        Ok(Item { elements, undefined_length: false })
    }

    fn read_items_defined(&mut self, ts: TransferSyntax) -> Result<Vec<Item>> {
        let mut items = Vec::new();
        while self.remaining() > 0 {
            items.push(self.read_item(ts)?);
        }
        Ok(items)
    }

    fn read_items_undefined(&mut self, ts: TransferSyntax, seq: Tag) -> Result<Vec<Item>> {
        let mut items = Vec::new();
        loop {
            let offset = self.pos;
            match self.peek_tag() {
                None => return Err(CodecError::TruncatedElement { tag: seq, offset }),
                Some(Tag::SEQUENCE_DELIMITATION) => {
                    self.pos += 4;
                    self.u32().ok_or(CodecError::TruncatedElement { tag: seq, offset })?;
                    return Ok(items);
                }
                Some(_) => items.push(self.read_item(ts)?),
            }
        }
    }
}
