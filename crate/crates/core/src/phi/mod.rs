//! PHI entity detection over free text.
//!
//! Offsets are character (Unicode scalar) offsets, half-open.

mod pattern;
mod remote;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use pattern::PatternDetector;
pub use remote::{map_remote_label, RemoteDetector, DEFAULT_REMOTE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Name,
    Date,
    Id,
    Location,
    Contact,
    Age,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub category: Category,
    pub confidence: f64,
    pub text: String,
}

impl EntitySpan {
    pub fn new(doc: &str, start: usize, end: usize, category: Category, confidence: f64) -> Self {
        EntitySpan { start, end, category, confidence, text: char_slice(doc, start, end).to_string() }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum DetectError {
    #[error("remote detector unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("remote detector returned an invalid response: {0}")]
    BadResponse(String),
}

pub trait PhiDetector: Send + Sync {
    /// Spans sorted by start and pairwise disjoint.
    fn detect_entities(&self, text: &str) -> Result<Vec<EntitySpan>, DetectError>;
}

impl<T: PhiDetector + ?Sized> PhiDetector for &T {
    fn detect_entities(&self, text: &str) -> Result<Vec<EntitySpan>, DetectError> {
        (**self).detect_entities(text)
    }
}

impl<T: PhiDetector + ?Sized> PhiDetector for std::sync::Arc<T> {
    fn detect_entities(&self, text: &str) -> Result<Vec<EntitySpan>, DetectError> {
        (**self).detect_entities(text)
    }
}

/// Detector that never finds anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullDetector;

impl PhiDetector for NullDetector {
    fn detect_entities(&self, _text: &str) -> Result<Vec<EntitySpan>, DetectError> {
        Ok(Vec::new())
    }
}

pub(crate) fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let mut idx = s.char_indices().map(|(i, _)| i).chain(std::iter::once(s.len()));
    let b0 = idx.nth(start).unwrap_or(s.len());
    let b1 = if end > start { idx.nth(end - start - 1).unwrap_or(s.len()) } else { b0 };
    &s[b0..b1]
}

/// Sort and merge overlapping spans. A merged span takes the category of
/// its most confident member and the maximum confidence.
pub fn merge_spans(doc: &str, mut spans: Vec<EntitySpan>) -> Vec<EntitySpan> {
    spans.retain(|s| s.start < s.end);
    spans.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    let mut out: Vec<EntitySpan> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start < last.end => {
                last.end = last.end.max(s.end);
                if s.confidence > last.confidence {
                    last.confidence = s.confidence;
                    last.category = s.category;
                }
            }
            _ => out.push(s),
        }
    }
    for s in &mut out {
        s.text = char_slice(doc, s.start, s.end).to_string();
    }
    out
}

/// Delete the given character ranges from `text`. Ranges may overlap.
pub fn remove_spans(text: &str, spans: &[EntitySpan]) -> String {
    if spans.is_empty() {
        return text.to_string();
    }
    let n = text.chars().count();
    let mut mask = vec![false; n];
    for s in spans {
        for m in &mut mask[s.start.min(n)..s.end.min(n)] {
            *m = true;
        }
    }
    text.chars().zip(mask).filter(|(_, m)| !m).map(|(c, _)| c).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum WhitelistError {
    #[error("whitelist {0} has no terms")]
    EmptyWhitelist(String),
    #[error("reading whitelist {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Case-folded terms that never count as PHI on their own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Whitelist {
    terms: BTreeSet<String>,
    pub source: Option<PathBuf>,
}

const BUNDLED_WHITELIST: &str = include_str!("../../resources/whitelist.txt");

impl Whitelist {
    pub fn parse(text: &str, source: Option<PathBuf>) -> Result<Self, WhitelistError> {
        let terms: BTreeSet<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        if terms.is_empty() {
            let name = source.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<inline>".into());
            return Err(WhitelistError::EmptyWhitelist(name));
        }
        Ok(Whitelist { terms, source })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_WHITELIST, None).expect("bundled whitelist is nonempty")
    }

    pub fn contains(&self, token: &str) -> bool {
        self.terms.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    /// True when `text` has at least one token and every token is listed.
    pub fn covers(&self, text: &str) -> bool {
        let mut any = false;
        for tok in tokens(text) {
            if !self.contains(tok) {
                return false;
            }
            any = true;
        }
        any
    }
}

pub fn load_whitelist(path: &Path) -> Result<Whitelist, WhitelistError> {
    let text = std::fs::read_to_string(path).map_err(|source| WhitelistError::Io { path: path.into(), source })?;
    Whitelist::parse(&text, Some(path.to_path_buf()))
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty())
}

/// Drop spans made up entirely of whitelisted tokens.
pub fn filter_whitelist(entities: Vec<EntitySpan>, whitelist: &Whitelist, document: &str) -> Vec<EntitySpan> {
    entities
        .into_iter()
        .filter(|e| !whitelist.covers(char_slice(document, e.start, e.end)))
        .collect()
}

/// Detect, filter, delete. Passing `None` disables whitelist filtering.
pub fn detect_filtered(
    detector: &dyn PhiDetector,
    whitelist: Option<&Whitelist>,
    text: &str,
) -> Result<Vec<EntitySpan>, DetectError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let spans = detector.detect_entities(text)?;
    Ok(match whitelist {
        Some(wl) => filter_whitelist(spans, wl, text),
        None => spans,
    })
}

pub fn deidentified_element_val(
    detector: &dyn PhiDetector,
    whitelist: Option<&Whitelist>,
    element_text: &str,
) -> Result<String, DetectError> {
    let spans = detect_filtered(detector, whitelist, element_text)?;
    Ok(remove_spans(element_text, &spans))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(doc: &str, s: usize, e: usize, c: f64) -> EntitySpan {
        EntitySpan::new(doc, s, e, Category::Name, c)
    }

    #[test]
    fn char_slice_unicode() {
        let s = "héllo wörld";
        assert_eq!(char_slice(s, 1, 4), "éll");
        assert_eq!(char_slice(s, 6, 11), "wörld");
        assert_eq!(char_slice(s, 3, 3), "");
    }

    #[test]
    fn merge_keeps_max_confidence() {
        let doc = "abcdefghij";
        let mut a = span(doc, 0, 4, 0.4);
        a.category = Category::Id;
        let b = EntitySpan::new(doc, 2, 6, Category::Date, 0.9);
        let c = span(doc, 8, 10, 0.5);
        let m = merge_spans(doc, vec![c, b, a]);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].start, m[0].end, m[0].category), (0, 6, Category::Date));
        assert_eq!(m[0].confidence, 0.9);
        assert_eq!(m[0].text, "abcdef");
        assert_eq!(m[1].text, "ij");
    }

    #[test]
    fn whitelist_parsing() {
        let wl = Whitelist::parse("CT\nMR\nT1\nabdomen", None).unwrap();
        assert_eq!(wl.len(), 4);
        assert!(wl.contains("Abdomen"));
        let dup = Whitelist::parse("# c\nCT\nct\n\nCT\n", None).unwrap();
        assert_eq!(dup.len(), 1);
        assert!(matches!(Whitelist::parse("# only comments\n", None), Err(WhitelistError::EmptyWhitelist(_))));
    }

    #[test]
    fn bundled_whitelist_has_named_terms() {
        let wl = Whitelist::bundled();
        assert!(wl.len() >= 150, "{}", wl.len());
        for t in ["CT", "MR", "T1", "abdomen", "breast", "R", "L"] {
            assert!(wl.contains(t), "{t}");
        }
    }

    #[test]
    fn filter_token_rule() {
        let wl = Whitelist::parse("mr", None).unwrap();
        let doc = "MR Jones";
        let spans = vec![span(doc, 0, 2, 1.0), span(doc, 0, 8, 1.0)];
        let kept = filter_whitelist(spans, &wl, doc);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].text, "MR Jones");
    }

    #[test]
    fn remove_spans_deletes_only_covered() {
        let doc = "seen by Dr Smith";
        assert_eq!(remove_spans(doc, &[span(doc, 8, 16, 1.0)]), "seen by ");
        assert_eq!(remove_spans(doc, &[]), doc);
    }
}
