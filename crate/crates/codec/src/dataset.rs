use crate::element::{DataElement, ElementMap, Item};
use crate::{Tag, TagPath, Vr};

pub const IMPLICIT_VR_LE: &str = "1.2.840.10008.1.2";
pub const EXPLICIT_VR_LE: &str = "1.2.840.10008.1.2.1";
pub const IMPLEMENTATION_CLASS_UID: &str = "1.2.826.0.1.3680043.10.1173.1";
pub const IMPLEMENTATION_VERSION: &str = "DCMDEID_010";

pub mod tags {
    use crate::Tag;

    pub const FILE_META_GROUP_LENGTH: Tag = Tag::new(0x0002, 0x0000);
    pub const FILE_META_VERSION: Tag = Tag::new(0x0002, 0x0001);
    pub const MEDIA_STORAGE_SOP_CLASS_UID: Tag = Tag::new(0x0002, 0x0002);
    pub const MEDIA_STORAGE_SOP_INSTANCE_UID: Tag = Tag::new(0x0002, 0x0003);
    pub const TRANSFER_SYNTAX_UID: Tag = Tag::new(0x0002, 0x0010);
    pub const IMPLEMENTATION_CLASS_UID: Tag = Tag::new(0x0002, 0x0012);
    pub const IMPLEMENTATION_VERSION_NAME: Tag = Tag::new(0x0002, 0x0013);
    pub const SOP_CLASS_UID: Tag = Tag::new(0x0008, 0x0016);
    pub const SOP_INSTANCE_UID: Tag = Tag::new(0x0008, 0x0018);
    pub const PATIENT_NAME: Tag = Tag::new(0x0010, 0x0010);
    pub const PATIENT_ID: Tag = Tag::new(0x0010, 0x0020);
    pub const STUDY_INSTANCE_UID: Tag = Tag::new(0x0020, 0x000D);
    pub const SERIES_INSTANCE_UID: Tag = Tag::new(0x0020, 0x000E);
    pub const SAMPLES_PER_PIXEL: Tag = Tag::new(0x0028, 0x0002);
    pub const PLANAR_CONFIGURATION: Tag = Tag::new(0x0028, 0x0006);
    pub const NUMBER_OF_FRAMES: Tag = Tag::new(0x0028, 0x0008);
    pub const ROWS: Tag = Tag::new(0x0028, 0x0010);
    pub const COLUMNS: Tag = Tag::new(0x0028, 0x0011);
    pub const BITS_ALLOCATED: Tag = Tag::new(0x0028, 0x0100);
    pub const PIXEL_DATA: Tag = Tag::new(0x7FE0, 0x0010);
}

/// Transfer syntaxes this codec reads and writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransferSyntax {
    ImplicitVrLittleEndian,
    ExplicitVrLittleEndian,
}

impl TransferSyntax {
    pub fn from_uid(uid: &str) -> Option<Self> {
        match uid.trim_end_matches(['\0', ' ']) {
            IMPLICIT_VR_LE => Some(Self::ImplicitVrLittleEndian),
            EXPLICIT_VR_LE => Some(Self::ExplicitVrLittleEndian),
            _ => None,
        }
    }

    pub fn uid(self) -> &'static str {
        match self {
            Self::ImplicitVrLittleEndian => IMPLICIT_VR_LE,
            Self::ExplicitVrLittleEndian => EXPLICIT_VR_LE,
        }
    }

    pub fn is_explicit(self) -> bool {
        self == Self::ExplicitVrLittleEndian
    }
}

/// A parsed DICOM file: preamble, file meta information and body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSet {
    pub preamble: Vec<u8>,
    /// Group 0002 elements, always explicit VR little endian on disk.
    pub meta: ElementMap,
    pub elements: ElementMap,
    pub transfer_syntax: TransferSyntax,
}

/// One element reached by [`DataSet::walk`].
#[derive(Debug, Clone)]
pub struct WalkEntry<'a> {
    pub path: TagPath,
    pub element: &'a DataElement,
}

impl DataSet {
    /// Empty data set with minimal file meta information.
    pub fn new(transfer_syntax: TransferSyntax) -> Self {
        let mut meta = ElementMap::new();
        for e in [
            DataElement::u32(tags::FILE_META_GROUP_LENGTH, 0),
            DataElement::new(tags::FILE_META_VERSION, Vr::OB, vec![0, 1]),
            DataElement::text(tags::TRANSFER_SYNTAX_UID, Vr::UI, transfer_syntax.uid()),
            DataElement::text(tags::IMPLEMENTATION_CLASS_UID, Vr::UI, IMPLEMENTATION_CLASS_UID),
            DataElement::text(tags::IMPLEMENTATION_VERSION_NAME, Vr::SH, IMPLEMENTATION_VERSION),
        ] {
            meta.insert(e.tag, e);
        }
        DataSet {
            preamble: vec![0; 128],
            meta,
            elements: ElementMap::new(),
            transfer_syntax,
        }
    }

    pub fn get(&self, tag: Tag) -> Option<&DataElement> {
        if tag.group == 0x0002 {
            return self.meta.get(&tag);
        }
        self.elements.get(&tag)
    }

    pub fn get_mut(&mut self, tag: Tag) -> Option<&mut DataElement> {
        if tag.group == 0x0002 {
            return self.meta.get_mut(&tag);
        }
        self.elements.get_mut(&tag)
    }

    /// Insert or replace; group 0002 goes to the file meta.
    pub fn set(&mut self, element: DataElement) -> Option<DataElement> {
        if element.tag.group == 0x0002 {
            return self.meta.insert(element.tag, element);
        }
        self.elements.insert(element.tag, element)
    }

    pub fn remove(&mut self, tag: Tag) -> Option<DataElement> {
        if tag.group == 0x0002 {
            return self.meta.remove(&tag);
        }
        self.elements.remove(&tag)
    }

    /// Text value of a top-level element, padding stripped.
    pub fn text(&self, tag: Tag) -> Option<String> {
        self.get(tag).and_then(DataElement::to_text)
    }

    pub fn int(&self, tag: Tag) -> Option<i64> {
        self.get(tag).and_then(DataElement::to_int)
    }

    /// Every body element depth-first, sequence descendants included.
    pub fn walk(&self) -> Vec<WalkEntry<'_>> {
        let mut out = Vec::new();
        walk_map(&self.elements, None, &mut out);
        out
    }

    /// Element at a nested path.
    pub fn get_path(&self, path: &TagPath) -> Option<&DataElement> {
        let mut map = &self.elements;
        for (tag, idx) in &path.parents {
            map = &map.get(tag)?.items()?.get(*idx)?.elements;
        }
        map.get(&path.tag)
    }

    pub fn get_path_mut(&mut self, path: &TagPath) -> Option<&mut DataElement> {
        let mut map = &mut self.elements;
        for (tag, idx) in &path.parents {
            map = &mut map.get_mut(tag)?.items_mut()?.get_mut(*idx)?.elements;
        }
        map.get_mut(&path.tag)
    }

    /// Creator string of the private block that owns `tag`.
    pub fn private_creator_for(&self, tag: Tag) -> Option<String> {
        private_creator_in(&self.elements, tag)
    }
}

/// Creator string for a private tag within one element map (top level or
/// a sequence item). Trailing padding is stripped; empty creators count as
/// absent.
pub fn private_creator_in(map: &ElementMap, tag: Tag) -> Option<String> {
    if !tag.is_private() {
        return None;
    }
    let creator = map.get(&tag.private_creator_slot())?.to_text()?;
    (!creator.is_empty()).then_some(creator)
}

fn walk_map<'a>(map: &'a ElementMap, parent: Option<&TagPath>, out: &mut Vec<WalkEntry<'a>>) {
    for (tag, element) in map {
        let path = match parent {
            None => TagPath::root(*tag),
            Some(p) => TagPath { parents: p.parents.clone(), tag: *tag },
        };
        out.push(WalkEntry { path: path.clone(), element });
        if let Some(items) = element.items() {
            for (i, item) in items.iter().enumerate() {
                let mut child_parent = path.clone();
                child_parent.parents.push((*tag, i));
                walk_items(item, &child_parent, out);
            }
        }
    }
}

fn walk_items<'a>(item: &'a Item, parent: &TagPath, out: &mut Vec<WalkEntry<'a>>) {
    walk_map(&item.elements, Some(parent), out)
}
