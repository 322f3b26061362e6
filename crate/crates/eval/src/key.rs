//! Answer keys: what a correct de-identification of each generated file
//! looks like.

use std::path::Path;

use dcm_codec::{DataElement, TagPath, Vr};
use serde::{Deserialize, Serialize};

use crate::EvalError;

/// Expected state of one element after de-identification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Expect {
    Unchanged,
    Value(String),
    Absent,
    /// Present with a zero-length value.
    Empty,
    /// Any replacement UID, as long as equal originals get equal
    /// replacements and different originals different ones.
    Uid,
    /// Same consistency rule as `Uid`, for patient identifiers.
    Pseudonym,
}

/// Why the generator put an element in the file; drives failure categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Standard,
    PhiTag,
    PhiText,
    Private,
    Repaired,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub path: TagPath,
    /// Keyword, private key or tag, as reported in failure tables.
    pub name: String,
    /// VR the value is interpreted with, whatever the file says.
    pub vr: Vr,
    pub original: String,
    pub expect: Expect,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub text: String,
    /// Ground truth: the text is PHI and must be painted over.
    pub phi: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameKey {
    pub frame: usize,
    pub boxes: Vec<KeyBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileKey {
    pub path: String,
    pub entries: Vec<KeyEntry>,
    pub frames: Vec<FrameKey>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub seed: u64,
    pub date_offset: i64,
    pub files: Vec<FileKey>,
}

impl AnswerKey {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| EvalError::Format(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        let text = serde_json::to_string_pretty(self).expect("key serializes");
        std::fs::write(path, text).map_err(|e| EvalError::io(path, e))
    }

    pub fn entry_count(&self) -> usize {
        self.files.iter().map(|f| f.entries.len()).sum()
    }
}

/// Value of `e` read as `vr`. Private data in implicit-VR files comes back
/// as UN; reading it with the intended VR keeps comparisons meaningful.
pub fn render(e: &DataElement, vr: Vr) -> Option<String> {
    if e.vr == vr {
        return e.to_display_string();
    }
    DataElement { vr, ..e.clone() }.to_display_string()
}
