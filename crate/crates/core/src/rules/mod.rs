//! Per-tag action tables and their application to a data set.
//!
//! Rule documents are line oriented:
//!
//! ```text
//! # comment
//! @profile tcia                  # start from a bundled table (ps315 | tcia)
//! @vr-default text CleanText     # text | date | uid | other
//! @default Keep
//! @private delegate              # delegate | remove
//! @free-text consolidated        # consolidated | per-element
//! 0010,0010 ReplaceDummy         # GGGG,EEEE or a dictionary keyword
//! @custom V2                     # later tag lines are custom overrides
//! 0008,1010 Keep
//! ```
//!
//! Tag lines in the document override the included profile. The same tag
//! twice in one section is an error.

mod apply;
mod note;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use dcm_codec::{dictionary, Tag, Vr, VrClass};
use serde::{Deserialize, Serialize};

pub(crate) use apply::{transform, Change, Cleaned};
pub use apply::{deidentify_dataset, DUMMY_PERSON_NAME, DUMMY_TEXT, DeidContext, DeidReport, Outcome, ReportRow};
pub use note::{apply_entity_removals, consolidate_free_text, MedicalNote, NoteError, Segment, SEGMENT_SEPARATOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Remove,
    Empty,
    ReplaceDummy,
    Keep,
    #[serde(rename = "RemapUID")]
    RemapUid,
    ShiftDate,
    CleanText,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::Remove,
        Action::Empty,
        Action::ReplaceDummy,
        Action::Keep,
        Action::RemapUid,
        Action::ShiftDate,
        Action::CleanText,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Remove => "Remove",
            Action::Empty => "Empty",
            Action::ReplaceDummy => "ReplaceDummy",
            Action::Keep => "Keep",
            Action::RemapUid => "RemapUID",
            Action::ShiftDate => "ShiftDate",
            Action::CleanText => "CleanText",
        }
    }

    /// RemapUID needs UI, ShiftDate a date VR, CleanText a text VR. The rest
    /// apply to anything.
    pub fn valid_for(self, vr: Vr) -> bool {
        match self {
            Action::RemapUid => vr == Vr::UI,
            Action::ShiftDate => vr.class() == VrClass::Date,
            Action::CleanText => vr.class() == VrClass::Text,
            _ => true,
        }
    }

    fn valid_for_class(self, class: VrClass) -> bool {
        match self {
            Action::RemapUid => class == VrClass::Uid,
            Action::ShiftDate => class == VrClass::Date,
            Action::CleanText => class == VrClass::Text,
            _ => true,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown action kind {0:?}")]
pub struct UnknownAction(pub String);

impl FromStr for Action {
    type Err = UnknownAction;

    /// Case-insensitive; accepts the canonical names plus a few aliases
    /// (`replace`, `dummy`, `remap`, `shift`, `clean`, `delete`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "remove" | "delete" => Action::Remove,
            "empty" => Action::Empty,
            "replacedummy" | "replace" | "dummy" => Action::ReplaceDummy,
            "keep" => Action::Keep,
            "remapuid" | "remap" => Action::RemapUid,
            "shiftdate" | "shift" => Action::ShiftDate,
            "cleantext" | "clean" => Action::CleanText,
            _ => return Err(UnknownAction(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrivatePolicy {
    /// Leave private elements for the private-tag dictionary step.
    Delegate,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeTextMode {
    /// One detector call over every free-text element joined into a note.
    Consolidated,
    PerElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    pub explicit: BTreeMap<Tag, Action>,
    pub vr_defaults: BTreeMap<VrClass, Action>,
    pub default: Action,
    pub profile_name: String,
    pub private_policy: PrivatePolicy,
    pub free_text: FreeTextMode,
}

impl Default for RuleTable {
    fn default() -> Self {
        RuleTable {
            explicit: BTreeMap::new(),
            vr_defaults: BTreeMap::new(),
            default: Action::Keep,
            profile_name: "custom".into(),
            private_policy: PrivatePolicy::Remove,
            free_text: FreeTextMode::PerElement,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CustomRuleSet {
    pub overrides: BTreeMap<Tag, Action>,
    pub version: String,
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("line {line}: {msg}")]
    SchemaError { line: usize, msg: String },
    #[error("line {line}: unknown action kind {name:?}")]
    UnknownActionKind { line: usize, name: String },
    #[error("line {line}: duplicate rule for {tag}")]
    DuplicateTagRule { line: usize, tag: Tag },
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

const TCIA_RULES: &str = include_str!("../../resources/tcia.rules");
const PS315_RULES: &str = include_str!("../../resources/ps315.rules");
const CUSTOM_RULES: &str = include_str!("../../resources/custom_v2.rules");

pub const PROFILES: [&str; 2] = ["ps315", "tcia"];

impl RuleTable {
    pub fn bundled(profile: &str) -> Result<RuleTable, RuleError> {
        let text = match profile {
            "tcia" => TCIA_RULES,
            "ps315" => PS315_RULES,
            other => return Err(RuleError::UnknownProfile(other.to_string())),
        };
        let (mut table, _) = parse(text, false)?;
        table.profile_name = profile.to_string();
        Ok(table)
    }
}

impl CustomRuleSet {
    /// The shipped overlay: removes allergies, patient state, occupation and
    /// comment fields; retains station name, device serial number, device
    /// UID and plate ID, among others.
    pub fn bundled() -> CustomRuleSet {
        parse(CUSTOM_RULES, false).expect("bundled custom rules parse").1
    }
}

pub fn load_rule_table(text: &str) -> Result<(RuleTable, CustomRuleSet), RuleError> {
    parse(text, true)
}

pub fn load_rule_file(path: &Path) -> Result<(RuleTable, CustomRuleSet), RuleError> {
    let text = std::fs::read_to_string(path).map_err(|source| RuleError::Io { path: path.display().to_string(), source })?;
    load_rule_table(&text)
}

/// custom override > explicit tag rule > VR-class default > profile default.
pub fn resolve_action(table: &RuleTable, custom: &CustomRuleSet, tag: Tag, vr: Vr) -> Action {
    if let Some(a) = custom.overrides.get(&tag) {
        return *a;
    }
    if let Some(a) = table.explicit.get(&tag) {
        return *a;
    }
    if let Some(a) = table.vr_defaults.get(&vr.class()) {
        return *a;
    }
    table.default
}

fn parse(text: &str, allow_include: bool) -> Result<(RuleTable, CustomRuleSet), RuleError> {
    let mut base: Option<RuleTable> = None;
    let mut table = RuleTable::default();
    let mut explicit: BTreeMap<Tag, Action> = BTreeMap::new();
    let mut vr_defaults: BTreeMap<VrClass, Action> = BTreeMap::new();
    let mut default: Option<Action> = None;
    let mut private_policy: Option<PrivatePolicy> = None;
    let mut free_text: Option<FreeTextMode> = None;
    let mut custom = CustomRuleSet::default();
    let mut in_custom = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let schema = |msg: String| RuleError::SchemaError { line, msg };
        let action = |name: &str| -> Result<Action, RuleError> {
            name.parse().map_err(|_| RuleError::UnknownActionKind { line, name: name.to_string() })
        };

        if let Some(directive) = fields[0].strip_prefix('@') {
            match (directive, &fields[1..]) {
                ("profile", [name]) => {
                    if !allow_include {
                        return Err(schema("@profile not allowed here".into()));
                    }
                    if base.is_some() {
                        return Err(schema("@profile given twice".into()));
                    }
                    base = Some(RuleTable::bundled(name)?);
                }
                ("vr-default", [class, act]) => {
                    let class: VrClass = class.parse().map_err(|_| schema(format!("unknown VR class {class:?}")))?;
                    let act = action(act)?;
                    if !act.valid_for_class(class) {
                        return Err(schema(format!("{act} cannot apply to VR class {class}")));
                    }
                    vr_defaults.insert(class, act);
                }
                ("default", [act]) => {
                    let act = action(act)?;
                    if matches!(act, Action::RemapUid | Action::ShiftDate | Action::CleanText) {
                        return Err(schema(format!("{act} cannot be the catch-all default")));
                    }
                    default = Some(act);
                }
                ("private", [policy]) => {
                    private_policy = Some(match *policy {
                        "delegate" => PrivatePolicy::Delegate,
                        "remove" => PrivatePolicy::Remove,
                        other => return Err(schema(format!("unknown private policy {other:?}"))),
                    });
                }
                ("free-text", [mode]) => {
                    free_text = Some(match *mode {
                        "consolidated" => FreeTextMode::Consolidated,
                        "per-element" => FreeTextMode::PerElement,
                        other => return Err(schema(format!("unknown free-text mode {other:?}"))),
                    });
                }
                ("custom", rest) if rest.len() <= 1 => {
                    if in_custom {
                        return Err(schema("@custom given twice".into()));
                    }
                    in_custom = true;
                    custom.version = rest.first().map(|v| v.to_string()).unwrap_or_default();
                }
                _ => return Err(schema(format!("malformed directive {content:?}"))),
            }
            continue;
        }

        let [tag_field, act] = fields[..] else {
            return Err(schema(format!("expected `<tag> <action>`, got {content:?}")));
        };
        let tag = parse_tag(tag_field).ok_or_else(|| schema(format!("unrecognised tag {tag_field:?}")))?;
        let act = action(act)?;
        if let Some(vr) = dictionary::lookup(tag).map(|e| e.vr) {
            if !act.valid_for(vr) {
                return Err(schema(format!("{act} cannot apply to {tag} with VR {vr}")));
            }
        }
        let target = if in_custom { &mut custom.overrides } else { &mut explicit };
        if target.insert(tag, act).is_some() {
            return Err(RuleError::DuplicateTagRule { line, tag });
        }
    }

    if let Some(b) = base {
        table = b;
    }
    table.explicit.extend(explicit);
    table.vr_defaults.extend(vr_defaults);
    if let Some(d) = default {
        table.default = d;
    }
    if let Some(p) = private_policy {
        table.private_policy = p;
    }
    if let Some(f) = free_text {
        table.free_text = f;
    }
    Ok((table, custom))
}

fn parse_tag(s: &str) -> Option<Tag> {
    s.parse::<Tag>().ok().or_else(|| dictionary::by_keyword(s).map(|e| e.tag))
}
