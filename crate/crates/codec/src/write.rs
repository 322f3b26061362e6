use crate::dataset::{tags, DataSet, TransferSyntax};
use crate::element::{DataElement, ElementMap, Item, Value};
use crate::error::{CodecError, Result};
use crate::{Tag, Vr};

#[derive(Debug, Clone, Copy, Default)]
pub struct SerializeOptions {
    /// Write every sequence and item with an explicit length, regardless of
    /// how it was originally encoded.
    pub canonical: bool,
}

/// Serialize to Part-10 bytes, preserving each element's original encoding
/// form. A data set produced by [`crate::parse_file`] and left untouched
/// comes back byte-identical.
pub fn serialize_file(ds: &DataSet) -> Result<Vec<u8>> {
    serialize_file_with(ds, SerializeOptions::default())
}

pub fn serialize_file_with(ds: &DataSet, opts: SerializeOptions) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(4096);
    let mut preamble = ds.preamble.clone();
    preamble.resize(128, 0);
    out.extend_from_slice(&preamble);
    out.extend_from_slice(b"DICM");

    let w = Writer { opts };
    let mut meta_body = Vec::new();
    for (tag, e) in &ds.meta {
        if *tag == tags::FILE_META_GROUP_LENGTH {
            continue;
        }
        w.write_element(&mut meta_body, e, TransferSyntax::ExplicitVrLittleEndian)?;
    }
    if let Some(gl) = ds.meta.get(&tags::FILE_META_GROUP_LENGTH) {
        let mut gl = gl.clone();
        gl.value = Value::Bytes((meta_body.len() as u32).to_le_bytes().to_vec());
        w.write_element(&mut out, &gl, TransferSyntax::ExplicitVrLittleEndian)?;
    }
    out.extend_from_slice(&meta_body);
    w.write_map(&mut out, &ds.elements, ds.transfer_syntax)?;
    Ok(out)
}

/// Serialize just the body elements (no preamble or meta).
pub fn serialize_body(map: &ElementMap, ts: TransferSyntax) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    Writer { opts: SerializeOptions::default() }.write_map(&mut out, map, ts)?;
    Ok(out)
}

struct Writer {
    opts: SerializeOptions,
}

fn put_tag(out: &mut Vec<u8>, tag: Tag) {
    out.extend_from_slice(&tag.group.to_le_bytes());
    out.extend_from_slice(&tag.element.to_le_bytes());
}

impl Writer {
    fn write_map(&self, out: &mut Vec<u8>, map: &ElementMap, ts: TransferSyntax) -> Result<()> {
        for e in map.values() {
            self.write_element(out, e, ts)?;
        }
        Ok(())
    }

    fn write_header(&self, out: &mut Vec<u8>, e: &DataElement, ts: TransferSyntax, len: u32) -> Result<()> {
        put_tag(out, e.tag);
        if !ts.is_explicit() {
            out.extend_from_slice(&len.to_le_bytes());
            return Ok(());
        }
        match e.unknown_vr_code {
            Some(code) => out.extend_from_slice(&code),
            None => out.extend_from_slice(e.vr.code().as_bytes()),
        }
        if e.unknown_vr_code.is_some() || e.vr.has_long_length() {
            out.extend_from_slice(&[0, 0]);
            out.extend_from_slice(&len.to_le_bytes());
        } else {
            let short = u16::try_from(len).map_err(|_| CodecError::ValueTooLong(e.tag))?;
            out.extend_from_slice(&short.to_le_bytes());
        }
        Ok(())
    }

    fn write_element(&self, out: &mut Vec<u8>, e: &DataElement, ts: TransferSyntax) -> Result<()> {
        match &e.value {
            Value::Bytes(bytes) => {
                let pad = if bytes.len() % 2 == 1 {
                    Some(e.vr.padding().ok_or(CodecError::OddLengthValue(e.tag))?)
                } else {
                    None
                };
                let len = bytes.len() + pad.is_some() as usize;
                self.write_header(out, e, ts, len as u32)?;
                out.extend_from_slice(bytes);
                out.extend(pad);
            }
            Value::Items(items) => {
                let item_ts = if e.implicit_items { TransferSyntax::ImplicitVrLittleEndian } else { ts };
                let undefined = e.undefined_length && !self.opts.canonical;
                let mut body = Vec::new();
                for item in items {
                    self.write_item(&mut body, item, item_ts)?;
                }
                if undefined {
                    self.write_header(out, e, ts, u32::MAX)?;
                    out.extend_from_slice(&body);
                    put_tag(out, Tag::SEQUENCE_DELIMITATION);
                    out.extend_from_slice(&0u32.to_le_bytes());
                } else {
                    self.write_header(out, e, ts, body.len() as u32)?;
                    out.extend_from_slice(&body);
                }
            }
        }
        Ok(())
    }

    fn write_item(&self, out: &mut Vec<u8>, item: &Item, ts: TransferSyntax) -> Result<()> {
        let mut body = Vec::new();
        self.write_map(&mut body, &item.elements, ts)?;
        put_tag(out, Tag::ITEM);
        if item.undefined_length && !self.opts.canonical {
            out.extend_from_slice(&u32::MAX.to_le_bytes());
            out.extend_from_slice(&body);
            put_tag(out, Tag::ITEM_DELIMITATION);
            out.extend_from_slice(&0u32.to_le_bytes());
        } else {
            out.extend_from_slice(&(body.len() as u32).to_le_bytes());
            out.extend_from_slice(&body);
        }
        Ok(())
    }
}

/// Lengths a writer would emit are always even; exposed for tests.
pub fn padded_len(vr: Vr, len: usize) -> Option<usize> {
    if len % 2 == 0 {
        Some(len)
    } else {
        vr.padding().map(|_| len + 1)
    }
}
