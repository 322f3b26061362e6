//! Private elements, handled through a dictionary keyed by
//! `(group,creator,element-low-byte)_VR`. No PHI detection happens here.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dcm_codec::{private_creator_in, DataElement, DataSet, ElementMap, Tag, TagPath, Value, Vr};
use serde::{Deserialize, Serialize};

use crate::identity::IdentityStore;
use crate::rules::{transform, Action, Change, Cleaned};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrivateKey {
    pub group: u16,
    pub creator: String,
    pub element_low: u8,
    pub vr: Vr,
}

impl fmt::Display for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04x},{},{:02x})_{}", self.group, self.creator, self.element_low, self.vr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrivateError {
    #[error("{0} is not a private tag")]
    NotPrivate(Tag),
    #[error("private tag has no creator")]
    MissingCreator,
    #[error("malformed private key {0:?}")]
    BadKey(String),
    #[error("line {line}: {msg}")]
    SchemaError { line: usize, msg: String },
    #[error("line {line}: duplicate key {key}")]
    DuplicateKey { line: usize, key: String },
    #[error("reading {path}: {msg}")]
    Io { path: String, msg: String },
}

impl FromStr for PrivateKey {
    type Err = PrivateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PrivateError::BadKey(s.to_string());
        let inner = s.strip_prefix('(').ok_or_else(bad)?;
        let (body, vr) = inner.rsplit_once(")_").ok_or_else(bad)?;
        let vr = Vr::from_code(vr.as_bytes()).ok_or_else(bad)?;
        let (group, rest) = body.split_once(',').ok_or_else(bad)?;
        let (creator, low) = rest.rsplit_once(',').ok_or_else(bad)?;
        if group.len() != 4 || low.len() != 2 || creator.is_empty() {
            return Err(bad());
        }
        let group = u16::from_str_radix(group, 16).map_err(|_| bad())?;
        let element_low = u8::from_str_radix(low, 16).map_err(|_| bad())?;
        if group % 2 == 0 {
            return Err(bad());
        }
        Ok(PrivateKey { group, creator: creator.to_string(), element_low, vr })
    }
}

/// Key for a private data element. The creator is matched as given, with
/// trailing padding stripped.
pub fn build_private_key(tag: Tag, creator: &str, vr: Vr) -> Result<PrivateKey, PrivateError> {
    if !tag.is_private() {
        return Err(PrivateError::NotPrivate(tag));
    }
    let creator = creator.trim_end_matches([' ', '\0']);
    if creator.is_empty() {
        return Err(PrivateError::MissingCreator);
    }
    Ok(PrivateKey { group: tag.group, creator: creator.to_string(), element_low: (tag.element & 0xFF) as u8, vr })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrivateDict {
    pub entries: BTreeMap<PrivateKey, Action>,
    pub source: Option<PathBuf>,
}

const BUNDLED_DICT: &str = include_str!("../resources/private_dict.txt");

impl PrivateDict {
    /// Lines are `<key> <action>`; `#` starts a comment. Creators may contain
    /// spaces, so the key runs up to the last `)_VR`.
    pub fn parse(text: &str, source: Option<PathBuf>) -> Result<Self, PrivateError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let schema = |msg: String| PrivateError::SchemaError { line, msg };
            let end = l.rfind(")_").map(|i| i + 4).filter(|&e| e <= l.len()).ok_or_else(|| schema(format!("no key in {l:?}")))?;
            let key: PrivateKey = l[..end].parse().map_err(|e: PrivateError| schema(e.to_string()))?;
            let mut rest = l[end..].split_whitespace();
            let action: Action = match rest.next() {
                Some(a) => a.parse().map_err(|_| schema(format!("unknown action {a:?}")))?,
                None => return Err(schema("missing action".into())),
            };
            if let Some(extra) = rest.next() {
                if !extra.starts_with('#') {
                    return Err(schema(format!("unexpected {extra:?} after action")));
                }
            }
            if action == Action::CleanText {
                return Err(schema("CleanText is not available for private elements".into()));
            }
            if !action.valid_for(key.vr) {
                return Err(schema(format!("{action} cannot apply to VR {}", key.vr)));
            }
            let rendered = key.to_string();
            if entries.insert(key, action).is_some() {
                return Err(PrivateError::DuplicateKey { line, key: rendered });
            }
        }
        Ok(PrivateDict { entries, source })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_DICT, None).expect("bundled private dictionary parses")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &PrivateKey) -> Option<Action> {
        self.entries.get(key).copied()
    }

    /// Lookup for elements whose VR is unknown (read as UN): matches on
    /// group, creator and element byte alone, and only when every VR variant
    /// in the dictionary agrees on the action. The VR comes back too when
    /// there is exactly one.
    pub fn get_ignoring_vr(&self, group: u16, creator: &str, element_low: u8) -> Option<(Action, Option<Vr>)> {
        let hits: Vec<(&PrivateKey, Action)> = self
            .entries
            .iter()
            .filter(|(k, _)| k.group == group && k.element_low == element_low && k.creator == creator)
            .map(|(k, a)| (k, *a))
            .collect();
        let actions: BTreeSet<Action> = hits.iter().map(|h| h.1).collect();
        let vr = (hits.len() == 1).then(|| hits[0].0.vr);
        (actions.len() == 1).then(|| (hits[0].1, vr))
    }
}

pub fn load_private_dict(path: &Path) -> Result<PrivateDict, PrivateError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PrivateError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    PrivateDict::parse(&text, Some(path.to_path_buf()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrivateOutcome {
    Kept,
    Modified,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateRow {
    pub path: TagPath,
    /// Rendered dictionary key, when a creator was found.
    pub key: Option<String>,
    pub action: Action,
    /// True when the dictionary had an entry for the key.
    pub hit: bool,
    pub outcome: PrivateOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrivateReport {
    pub rows: Vec<PrivateRow>,
}

impl PrivateReport {
    pub fn removed(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome == PrivateOutcome::Removed).count()
    }
}

fn is_creator(tag: Tag) -> bool {
    tag.is_private() && (0x0010..=0x00FF).contains(&tag.element)
}

/// Apply the dictionary to every private element, nested ones included.
/// Misses and elements without a creator are removed. A creator survives
/// only while at least one element of its block does.
pub fn deidentify_private(ds: &DataSet, dict: &PrivateDict, store: &IdentityStore) -> (DataSet, PrivateReport) {
    let mut out = ds.clone();
    let mut rows = Vec::new();
    process_map(&mut out.elements, &TagPath::root(Tag::new(0, 0)), true, dict, store, &mut rows);
    (out, PrivateReport { rows })
}

fn process_map(
    map: &mut ElementMap,
    parent: &TagPath,
    top: bool,
    dict: &PrivateDict,
    store: &IdentityStore,
    rows: &mut Vec<PrivateRow>,
) {
    let path_of = |tag: Tag| if top { TagPath::root(tag) } else { TagPath { parents: parent.parents.clone(), tag } };
    let no_clean = Cleaned::new();
    let tags: Vec<Tag> = map.keys().copied().collect();
    for tag in tags {
        let path = path_of(tag);
        if !tag.is_private() || is_creator(tag) {
            if let Some(Value::Items(items)) = map.get_mut(&tag).map(|e| &mut e.value) {
                for (i, item) in items.iter_mut().enumerate() {
                    let mut child = path.clone();
                    child.parents.push((tag, i));
                    process_map(&mut item.elements, &child, false, dict, store, rows);
                }
            }
            continue;
        }
        let e = &map[&tag];
        let key = private_creator_in(map, tag).and_then(|c| build_private_key(tag, &c, e.vr).ok());
        let hit = key.as_ref().and_then(|k| {
            dict.get(k).map(|a| (a, None)).or_else(|| {
                (e.vr == Vr::UN).then(|| dict.get_ignoring_vr(k.group, &k.creator, k.element_low)).flatten()
            })
        });
        let valid_block = tag.element >= 0x1000;
        let action = hit.filter(|_| valid_block).map_or(Action::Remove, |h| h.0);
        // UN values are read as the dictionary VR when the action needs to
        // understand them.
        let typed = match hit {
            Some((a, Some(vr))) if matches!(a, Action::ShiftDate | Action::RemapUid | Action::ReplaceDummy) => {
                Some(DataElement { vr, ..e.clone() })
            }
            _ => None,
        };
        let change = transform(typed.as_ref().unwrap_or(e), action, &path, &no_clean, store).unwrap_or_else(|_| Change::Remove);
        let outcome = match change {
            Change::Keep => PrivateOutcome::Kept,
            Change::Remove => {
                map.remove(&tag);
                PrivateOutcome::Removed
            }
            Change::Replace(new) => {
                let changed = new.value != e.value;
                map.insert(tag, new);
                if changed {
                    PrivateOutcome::Modified
                } else {
                    PrivateOutcome::Kept
                }
            }
        };
        rows.push(PrivateRow { path: path.clone(), key: key.map(|k| k.to_string()), action, hit: hit.is_some(), outcome });
        if outcome != PrivateOutcome::Removed {
            if let Some(Value::Items(items)) = map.get_mut(&tag).map(|e: &mut DataElement| &mut e.value) {
                for (i, item) in items.iter_mut().enumerate() {
                    let mut child = path.clone();
                    child.parents.push((tag, i));
                    process_map(&mut item.elements, &child, false, dict, store, rows);
                }
            }
        }
    }

    let creators: Vec<Tag> = map.keys().copied().filter(|t| is_creator(*t)).collect();
    for c in creators {
        let lo = Tag::new(c.group, c.element << 8);
        let hi = Tag::new(c.group, (c.element << 8) | 0xFF);
        if map.range(lo..=hi).next().is_none() {
            map.remove(&c);
            rows.push(PrivateRow { path: path_of(c), key: None, action: Action::Remove, hit: false, outcome: PrivateOutcome::Removed });
        }
    }
}
