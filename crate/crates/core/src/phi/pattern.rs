use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;

use super::{merge_spans, Category, DetectError, EntitySpan, PhiDetector};

const GIVEN_NAMES: &str = include_str!("../../resources/given_names.txt");
const SURNAMES: &str = include_str!("../../resources/surnames.txt");
const CITIES: &str = include_str!("../../resources/cities.txt");

/// Offline rule-based detector. Families, with the confidence each reports:
///
/// | family | example | category | conf |
/// |---|---|---|---|
/// | numeric date | `01/02/2023`, `2023-01-02`, `02.01.2023` | DATE | 0.90 |
/// | DA-like 8 digits | `19600102` | DATE | 0.85 |
/// | phone | `555-123-4567`, `(555) 123-4567` | CONTACT | 0.90 |
/// | email | `a.b@example.org` | CONTACT | 0.90 |
/// | digit run of 7+ | `12345678` | ID | 0.70 |
/// | letter-prefixed id | `MRN1234567`, `ACC-55555` | ID | 0.80 |
/// | age phrase | `45 yo`, `67-year-old` | AGE | 0.80 |
/// | caret person name | `DOE^JOHN` | NAME | 0.95 |
/// | honorific | `Dr. Smith` (span is `Smith`), `MR BREAST` (whole) | NAME | 0.90 |
/// | name lists | `John Smith`, `SMITH` | NAME | 0.85 |
/// | city list | `Boston`, `San Diego` | LOCATION | 0.80 |
///
/// List matches must be title case or all caps. A known given name also
/// pulls in the capitalised word that follows it.
#[derive(Debug, Clone, Copy, Default)]
pub struct PatternDetector;

struct Rules {
    regexes: Vec<(Regex, Category, f64, usize)>,
    honorific_caps: Regex,
    word: Regex,
    city: Regex,
    given: HashSet<String>,
    surnames: HashSet<String>,
}

fn list(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| {
        let r = |p: &str| Regex::new(p).unwrap();
        // (pattern, category, confidence, capture group holding the span)
        let regexes = vec![
            (r(r"\b\d{1,2}/\d{1,2}/\d{4}\b"), Category::Date, 0.90, 0),
            (r(r"\b\d{4}-\d{2}-\d{2}\b"), Category::Date, 0.90, 0),
            (r(r"\b\d{1,2}\.\d{1,2}\.\d{4}\b"), Category::Date, 0.90, 0),
            (r(r"\b(?:19|20)\d{2}(?:0[1-9]|1[0-2])(?:0[1-9]|[12]\d|3[01])\b"), Category::Date, 0.85, 0),
            (r(r"\b\d{3}-\d{3}-\d{4}\b"), Category::Contact, 0.90, 0),
            (r(r"\(\d{3}\) ?\d{3}-\d{4}\b"), Category::Contact, 0.90, 0),
            (r(r"\b[\w.+-]+@[\w-]+(?:\.[\w-]+)+\b"), Category::Contact, 0.90, 0),
            (r(r"\b\d{7,}\b"), Category::Id, 0.70, 0),
            (r(r"\b[A-Z]{1,4}-?\d{5,}\b"), Category::Id, 0.80, 0),
            (r(r"(?i)\b\d{1,3}[ -]?(?:yo|y/o|year-old|years old|year old)\b"), Category::Age, 0.80, 0),
            (r(r"\b[A-Za-z][A-Za-z'-]*\^[A-Za-z][A-Za-z'-]*(?:\^[A-Za-z'-]*)*"), Category::Name, 0.95, 0),
            (r(r"\b(?:Dr|Mr|Mrs|Ms|Miss|Prof)\.?[ ]+([A-Z][a-z]+(?:[ ]+[A-Z][a-z]+)?)"), Category::Name, 0.90, 1),
        ];
        let cities: Vec<String> = list(CITIES).map(regex::escape).collect();
        Rules {
            regexes,
            honorific_caps: r(r"\b(?:MR|MRS|MS|DR)\.?(?:[ ]+[A-Z][A-Z0-9]*\b)+"),
            word: r(r"[A-Za-z][A-Za-z'-]*"),
            city: r(&format!(r"(?i)\b(?:{})\b", cities.join("|"))),
            given: list(GIVEN_NAMES).map(str::to_lowercase).collect(),
            surnames: list(SURNAMES).map(str::to_lowercase).collect(),
        }
    })
}

fn name_shaped(w: &str) -> bool {
    let mut cs = w.chars();
    match cs.next() {
        Some(c) if c.is_ascii_uppercase() => {
            let rest: Vec<char> = cs.filter(|c| c.is_ascii_alphabetic()).collect();
            rest.iter().all(|c| c.is_ascii_lowercase()) || rest.iter().all(|c| c.is_ascii_uppercase())
        }
        _ => false,
    }
}

fn is_title(w: &str) -> bool {
    let mut cs = w.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_uppercase()) && cs.all(|c| !c.is_ascii_uppercase())
}

impl PatternDetector {
    /// Byte-offset spans before merging.
    fn raw_spans(&self, text: &str) -> Vec<(usize, usize, Category, f64)> {
        let rules = rules();
        let mut out = Vec::new();
        for (re, cat, conf, group) in &rules.regexes {
            for caps in re.captures_iter(text) {
                if let Some(m) = caps.get(*group) {
                    out.push((m.start(), m.end(), *cat, *conf));
                }
            }
        }
        for m in rules.honorific_caps.find_iter(text) {
            out.push((m.start(), m.end(), Category::Name, 0.90));
        }
        for m in rules.city.find_iter(text) {
            if m.as_str().split(' ').all(name_shaped) {
                out.push((m.start(), m.end(), Category::Location, 0.80));
            }
        }

        let words: Vec<_> = rules.word.find_iter(text).collect();
        let mut run: Option<(usize, usize)> = None;
        let mut i = 0;
        while i < words.len() {
            let w = words[i];
            let lw = w.as_str().to_lowercase();
            let shaped = name_shaped(w.as_str());
            let is_given = shaped && rules.given.contains(&lw);
            let is_name = is_given || (shaped && rules.surnames.contains(&lw));
            if !is_name {
                if let Some((s, e)) = run.take() {
                    out.push((s, e, Category::Name, 0.85));
                }
                i += 1;
                continue;
            }
            let mut end = w.end();
            // A given name pulls in the capitalised word right after it.
            if is_given {
                if let Some(next) = words.get(i + 1) {
                    if text[w.end()..next.start()].chars().all(|c| c == ' ') && is_title(next.as_str()) {
                        end = next.end();
                        i += 1;
                    }
                }
            }
            run = match run {
                Some((s, e)) if text[e..w.start()].chars().all(|c| c == ' ') => Some((s, end)),
                Some((s, e)) => {
                    out.push((s, e, Category::Name, 0.85));
                    Some((w.start(), end))
                }
                None => Some((w.start(), end)),
            };
            i += 1;
        }
        if let Some((s, e)) = run {
            out.push((s, e, Category::Name, 0.85));
        }
        out
    }
}

impl PhiDetector for PatternDetector {
    fn detect_entities(&self, text: &str) -> Result<Vec<EntitySpan>, DetectError> {
        if text.is_empty() {
            return Ok(Vec::new());
        }
        let mut char_at = vec![0usize; text.len() + 1];
        let mut n = 0;
        for (b, _) in text.char_indices() {
            char_at[b] = n;
            n += 1;
        }
        char_at[text.len()] = n;
        let spans = self
            .raw_spans(text)
            .into_iter()
            .map(|(s, e, cat, conf)| EntitySpan::new(text, char_at[s], char_at[e], cat, conf))
            .collect();
        Ok(merge_spans(text, spans))
    }
}
