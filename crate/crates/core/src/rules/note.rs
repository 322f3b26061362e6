use std::collections::BTreeMap;
use std::ops::Range;

use dcm_codec::{DataSet, TagPath};

use super::{apply::plan, Action, CustomRuleSet, RuleTable};
use crate::phi::EntitySpan;

/// Placed between segments. The record separator keeps pattern and model
/// context from running across two elements.
pub const SEGMENT_SEPARATOR: &str = "\n\u{1E}\n";
const SEPARATOR_CHAR: char = '\u{1E}';
const ESCAPE_CHAR: char = '\u{FFFD}';

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub path: TagPath,
    /// Original element text, unescaped.
    pub text: String,
    /// Character range of this segment inside the document.
    pub range: Range<usize>,
}

/// Free-text elements joined into one document for a single detector pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MedicalNote {
    pub segments: Vec<Segment>,
    pub document: String,
    doc_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NoteError {
    #[error("entity {start}..{end} outside document of {len} characters")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
}

impl MedicalNote {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a segment. Separator characters inside `text` are replaced one
    /// for one so offsets still line up with the original.
    pub fn push(&mut self, path: TagPath, text: &str) {
        if !self.segments.is_empty() {
            self.document.push_str(SEGMENT_SEPARATOR);
            self.doc_chars += SEGMENT_SEPARATOR.chars().count();
        }
        let start = self.doc_chars;
        let mut n = 0;
        for c in text.chars() {
            self.document.push(if c == SEPARATOR_CHAR { ESCAPE_CHAR } else { c });
            n += 1;
        }
        self.doc_chars += n;
        self.segments.push(Segment { path, text: text.to_string(), range: start..start + n });
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn char_len(&self) -> usize {
        self.doc_chars
    }
}

/// Elements resolving to CleanText, Empty or ReplaceDummy, in walk order.
pub fn consolidate_free_text(ds: &DataSet, table: &RuleTable, custom: &CustomRuleSet) -> MedicalNote {
    let mut note = MedicalNote::new();
    for p in plan(ds, table, custom) {
        if p.skip || p.delegated {
            continue;
        }
        let is_text = p.element.vr.is_string() && !p.element.is_sequence();
        if is_text && matches!(p.action, Action::CleanText | Action::Empty | Action::ReplaceDummy) {
            if let Some(text) = p.element.to_text() {
                note.push(p.path, &text);
            }
        }
    }
    note
}

/// New value per touched segment, with entity characters deleted. Entities
/// are clipped to each segment; segments no entity reaches are absent.
pub fn apply_entity_removals(note: &MedicalNote, entities: &[EntitySpan]) -> Result<BTreeMap<TagPath, String>, NoteError> {
    let len = note.char_len();
    for e in entities {
        if e.start > e.end || e.end > len {
            return Err(NoteError::SpanOutOfBounds { start: e.start, end: e.end, len });
        }
    }
    let mut out = BTreeMap::new();
    for seg in &note.segments {
        let r = &seg.range;
        let mut mask: Option<Vec<bool>> = None;
        for e in entities {
            let (s, t) = (e.start.max(r.start), e.end.min(r.end));
            if s >= t {
                continue;
            }
            let m = mask.get_or_insert_with(|| vec![false; r.len()]);
            for x in &mut m[s - r.start..t - r.start] {
                *x = true;
            }
        }
        if let Some(mask) = mask {
            let kept: String = seg.text.chars().zip(mask).filter(|(_, m)| !m).map(|(c, _)| c).collect();
            out.insert(seg.path.clone(), kept);
        }
    }
    Ok(out)
}
