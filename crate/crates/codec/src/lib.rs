//! Reader and writer for DICOM Part-10 files.
//!
//! Supports implicit and explicit VR little endian. Parsing keeps enough of
//! the original encoding (undefined lengths, unrecognized VR codes, raw value
//! padding) that an unmodified data set serializes back to identical bytes.

pub mod dataset;
pub mod dictionary;
pub mod element;
mod error;
mod read;
mod tag;
mod vr;
mod write;

pub use dataset::{private_creator_in, tags, DataSet, TransferSyntax, WalkEntry};
pub use element::{decode_text, encode_text, DataElement, ElementMap, Item, Value};
pub use error::{CodecError, Result};
pub use read::{has_part10_magic, parse_file, parse_file_with, ParseOptions};
pub use tag::{ParseTagError, Tag, TagPath};
pub use vr::{ParseVrError, Vr, VrClass};
pub use write::{padded_len, serialize_body, serialize_file, serialize_file_with, SerializeOptions};
