//! Missing-attribute checks after de-identification, and their repair.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use dcm_codec::{dictionary, tags, DataElement, DataSet, Tag};
use regex::Regex;
use serde::{Deserialize, Serialize};

const BUNDLED_PROFILES: &str = include_str!("../resources/required_attributes.txt");
const BUNDLED_IGNORE: &str = include_str!("../resources/ignore_list.txt");

#[derive(Debug, thiserror::Error)]
pub enum ValidateError {
    #[error("line {line}: {msg}")]
    SchemaError { line: usize, msg: String },
    #[error("duplicate tag {tag} for SOP class {class}")]
    DuplicateTag { class: String, tag: Tag },
    #[error("ignore list is empty")]
    EmptyIgnoreList,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("external validator: {0}")]
    External(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueKind {
    MissingAttribute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub kind: IssueKind,
    pub tag: Tag,
    pub keyword: String,
}

impl ValidationIssue {
    pub fn missing(tag: Tag) -> Self {
        let keyword = dictionary::keyword(tag).map_or_else(|| tag.to_string(), str::to_string);
        ValidationIssue { kind: IssueKind::MissingAttribute, tag, keyword }
    }
}

/// A required tag, optionally conditional on another tag being present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Requirement {
    pub tag: Tag,
    pub when_present: Option<Tag>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassProfile {
    pub name: String,
    pub required: Vec<Requirement>,
}

/// SOP class UID to required attributes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RequiredAttributeProfile {
    pub classes: BTreeMap<String, ClassProfile>,
}

fn resolve(word: &str, line: usize) -> Result<Tag, ValidateError> {
    if let Some(e) = dictionary::by_keyword(word) {
        return Ok(e.tag);
    }
    if let Some((g, e)) = word.split_once(',') {
        if let (Ok(g), Ok(e)) = (u16::from_str_radix(g.trim(), 16), u16::from_str_radix(e.trim(), 16)) {
            return Ok(Tag::new(g, e));
        }
    }
    Err(ValidateError::SchemaError { line, msg: format!("unknown attribute {word:?}") })
}

impl RequiredAttributeProfile {
    pub fn parse(text: &str) -> Result<Self, ValidateError> {
        let mut common: Vec<Requirement> = Vec::new();
        let mut classes: BTreeMap<String, ClassProfile> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('[') {
                let head = head.strip_suffix(']').ok_or(ValidateError::SchemaError { line: n, msg: "unterminated section".into() })?;
                let mut parts = head.split_whitespace();
                let uid = parts.next().ok_or(ValidateError::SchemaError { line: n, msg: "empty section".into() })?;
                if uid == "common" {
                    current = None;
                    continue;
                }
                if !crate::identity::is_valid_uid_syntax(uid) {
                    return Err(ValidateError::SchemaError { line: n, msg: format!("bad SOP class UID {uid:?}") });
                }
                let name = parts.collect::<Vec<_>>().join(" ");
                if classes.contains_key(uid) {
                    return Err(ValidateError::SchemaError { line: n, msg: format!("SOP class {uid} listed twice") });
                }
                classes.insert(uid.to_string(), ClassProfile { name, required: common.clone() });
                current = Some(uid.to_string());
                continue;
            }
            let req = match line.split_once(" if ") {
                Some((a, b)) => Requirement { tag: resolve(a.trim(), n)?, when_present: Some(resolve(b.trim(), n)?) },
                None => Requirement { tag: resolve(line, n)?, when_present: None },
            };
            let (list, class) = match &current {
                Some(uid) => (&mut classes.get_mut(uid).expect("section exists").required, uid.clone()),
                None => (&mut common, "common".to_string()),
            };
            if list.iter().any(|r| r.tag == req.tag) {
                return Err(ValidateError::DuplicateTag { class, tag: req.tag });
            }
            list.push(req);
        }
        for c in classes.values_mut() {
            c.required.sort_by_key(|r| r.tag);
        }
        Ok(RequiredAttributeProfile { classes })
    }

    pub fn bundled() -> &'static Self {
        static P: OnceLock<RequiredAttributeProfile> = OnceLock::new();
        P.get_or_init(|| Self::parse(BUNDLED_PROFILES).expect("bundled profiles parse"))
    }

    pub fn load(path: &Path) -> Result<Self, ValidateError> {
        let text = std::fs::read_to_string(path).map_err(|source| ValidateError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }
}

/// Attribute keywords that repair leaves alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IgnoreList {
    keywords: BTreeSet<String>,
}

impl IgnoreList {
    pub fn parse(text: &str) -> Result<Self, ValidateError> {
        let keywords: BTreeSet<String> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        if keywords.is_empty() {
            return Err(ValidateError::EmptyIgnoreList);
        }
        Ok(IgnoreList { keywords })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_IGNORE).expect("bundled ignore list")
    }

    pub fn load(path: &Path) -> Result<Self, ValidateError> {
        let text = std::fs::read_to_string(path).map_err(|source| ValidateError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn contains(&self, keyword: &str) -> bool {
        self.keywords.contains(keyword)
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().map(String::as_str)
    }
}

impl Default for IgnoreList {
    fn default() -> Self {
        Self::bundled()
    }
}

/// One issue per required attribute absent from the top level of `ds`,
/// in tag order. Unknown SOP classes yield no issues.
pub fn validate(ds: &DataSet, profile: &RequiredAttributeProfile) -> Vec<ValidationIssue> {
    let class = ds.text(tags::SOP_CLASS_UID).or_else(|| ds.text(tags::MEDIA_STORAGE_SOP_CLASS_UID));
    let Some(p) = class.as_deref().and_then(|c| profile.classes.get(c)) else {
        log::warn!("no required-attribute profile for SOP class {:?}; skipping validation", class);
        return Vec::new();
    };
    p.required
        .iter()
        .filter(|r| r.when_present.map_or(true, |t| ds.get(t).is_some()))
        .filter(|r| ds.get(r.tag).is_none())
        .map(|r| ValidationIssue::missing(r.tag))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    pub inserted: Vec<ValidationIssue>,
    pub ignored: Vec<ValidationIssue>,
}

/// Insert a zero-length element for every issue not on the ignore list.
/// Existing elements are never touched.
pub fn repair(ds: &DataSet, issues: &[ValidationIssue], ignore: &IgnoreList) -> (DataSet, RepairReport) {
    let mut out = ds.clone();
    let mut report = RepairReport::default();
    for issue in issues {
        if ignore.contains(&issue.keyword) {
            log::info!("validation issue for {} ignored", issue.keyword);
            report.ignored.push(issue.clone());
            continue;
        }
        if out.get(issue.tag).is_some() {
            continue;
        }
        let Some(vr) = dictionary::implied_vr(issue.tag) else {
            log::warn!("no dictionary VR for {}; not inserted", issue.tag);
            report.ignored.push(issue.clone());
            continue;
        };
        out.set(DataElement::empty(issue.tag, vr));
        report.inserted.push(issue.clone());
    }
    (out, report)
}

/// Issues from the text output of an external IOD validator. Only
/// `Error - Missing attribute ... <Keyword>` lines count; keywords missing
/// from the dictionary are dropped.
pub fn parse_external_validator_output(text: &str) -> Vec<ValidationIssue> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"Error\s*-\s*Missing attribute.*?<([A-Za-z0-9]+)>").expect("regex"));
    text.lines()
        .filter_map(|l| re.captures(l))
        .filter_map(|c| dictionary::by_keyword(&c[1]))
        .map(|e| ValidationIssue::missing(e.tag))
        .collect()
}

/// Run `program <file>` and parse its combined output.
pub fn run_external_validator(program: &Path, file: &Path) -> Result<Vec<ValidationIssue>, ValidateError> {
    let out = Command::new(program)
        .arg(file)
        .output()
        .map_err(|e| ValidateError::External(format!("{}: {e}", program.display())))?;
    let mut text = String::from_utf8_lossy(&out.stderr).into_owned();
    text.push('\n');
    text.push_str(&String::from_utf8_lossy(&out.stdout));
    Ok(parse_external_validator_output(&text))
}
