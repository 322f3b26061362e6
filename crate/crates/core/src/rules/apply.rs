use std::collections::{BTreeMap, HashMap};

use dcm_codec::{tags, DataElement, DataSet, ElementMap, TagPath, Value, Vr, VrClass};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::note::{apply_entity_removals, MedicalNote};
use super::{resolve_action, Action, CustomRuleSet, FreeTextMode, PrivatePolicy, RuleTable};
use crate::identity::{DateKind, IdentityStore};
use crate::phi::{detect_filtered, remove_spans, PhiDetector, Whitelist};

pub const DUMMY_PERSON_NAME: &str = "ANON^ANON";
pub const DUMMY_TEXT: &str = "REMOVED";

/// Shared services used while applying actions.
#[derive(Clone, Copy)]
pub struct DeidContext<'a> {
    pub store: &'a IdentityStore,
    pub detector: &'a dyn PhiDetector,
    /// `None` turns whitelist filtering off.
    pub whitelist: Option<&'a Whitelist>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Unchanged,
    Modified,
    Removed,
    /// Private element left for the private-tag step.
    Delegated,
    /// Inside a sequence that was removed or emptied.
    RemovedWithParent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub path: TagPath,
    pub vr: String,
    pub action: Option<Action>,
    pub outcome: Outcome,
    pub before_hash: Option<String>,
    pub after_hash: Option<String>,
    /// PHI entities found in this element (free-text elements only).
    pub entities: usize,
    /// The action could not be carried out and the element was emptied.
    pub degraded: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeidReport {
    pub rows: Vec<ReportRow>,
}

impl DeidReport {
    pub fn action_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for r in &self.rows {
            let k = r.action.map(|a| a.name()).unwrap_or("Delegated");
            *m.entry(k.to_string()).or_default() += 1;
        }
        m
    }

    pub fn degraded(&self) -> usize {
        self.rows.iter().filter(|r| r.degraded).count()
    }

    pub fn modified(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r.outcome, Outcome::Modified | Outcome::Removed)).count()
    }
}

pub(crate) struct PlanEntry<'a> {
    pub path: TagPath,
    pub element: &'a DataElement,
    pub action: Action,
    pub delegated: bool,
    /// Under a removed or emptied sequence.
    pub skip: bool,
}

/// Resolved action for every element in walk order.
pub(crate) fn plan<'a>(ds: &'a DataSet, table: &RuleTable, custom: &CustomRuleSet) -> Vec<PlanEntry<'a>> {
    let mut out: Vec<PlanEntry<'a>> = Vec::new();
    // path -> (children skipped, children delegated)
    let mut state: HashMap<TagPath, (bool, bool)> = HashMap::new();
    for w in ds.walk() {
        let (parent_skip, parent_delegated) = match w.path.parents.split_last() {
            Some(((ptag, _), rest)) => state[&TagPath { parents: rest.to_vec(), tag: *ptag }],
            None => (false, false),
        };
        let tag = w.path.tag;
        let e = w.element;
        let delegated = parent_delegated || (tag.is_private() && table.private_policy == PrivatePolicy::Delegate);
        let action = if tag.is_group_length() || (tag.is_private() && table.private_policy == PrivatePolicy::Remove) {
            Action::Remove
        } else {
            resolve_action(table, custom, tag, e.vr)
        };
        let skip = parent_skip;
        if e.is_sequence() {
            let clears = matches!(action, Action::Remove | Action::Empty | Action::ReplaceDummy);
            state.insert(w.path.clone(), (skip || (clears && !delegated), delegated));
        }
        out.push(PlanEntry { path: w.path, element: e, action, delegated, skip });
    }
    out
}

pub(crate) type Cleaned = HashMap<TagPath, Result<(String, usize), String>>;

fn is_free_text(p: &PlanEntry) -> bool {
    !p.skip && !p.delegated && p.element.vr.is_string() && !p.element.is_sequence()
}

fn clean_free_text(entries: &[PlanEntry], table: &RuleTable, ctx: &DeidContext) -> Cleaned {
    let mut out = Cleaned::new();
    match table.free_text {
        FreeTextMode::PerElement => {
            for p in entries.iter().filter(|p| is_free_text(p) && p.action == Action::CleanText) {
                let text = p.element.to_text().unwrap_or_default();
                let r = detect_filtered(ctx.detector, ctx.whitelist, &text)
                    .map(|spans| (remove_spans(&text, &spans), spans.len()))
                    .map_err(|e| e.to_string());
                out.insert(p.path.clone(), r);
            }
        }
        FreeTextMode::Consolidated => {
            let mut note = MedicalNote::new();
            for p in entries.iter().filter(|p| is_free_text(p)) {
                if matches!(p.action, Action::CleanText | Action::Empty | Action::ReplaceDummy) {
                    note.push(p.path.clone(), &p.element.to_text().unwrap_or_default());
                }
            }
            if note.is_empty() {
                return out;
            }
            let result = detect_filtered(ctx.detector, ctx.whitelist, &note.document)
                .map_err(|e| e.to_string())
                .and_then(|spans| apply_entity_removals(&note, &spans).map(|m| (m, spans)).map_err(|e| e.to_string()));
            match result {
                Ok((mut cleaned, spans)) => {
                    for seg in &note.segments {
                        let n = spans.iter().filter(|s| s.start < seg.range.end && s.end > seg.range.start).count();
                        let text = cleaned.remove(&seg.path).unwrap_or_else(|| seg.text.clone());
                        out.insert(seg.path.clone(), Ok((text, n)));
                    }
                }
                Err(msg) => {
                    for seg in &note.segments {
                        out.insert(seg.path.clone(), Err(msg.clone()));
                    }
                }
            }
        }
    }
    out
}

pub(crate) enum Change {
    Keep,
    Remove,
    Replace(DataElement),
}

fn join_values(e: &DataElement, f: impl Fn(&str) -> Result<String, String>) -> Result<Change, String> {
    let values = e.strings_value();
    if values.iter().all(String::is_empty) {
        return Ok(Change::Keep);
    }
    let mapped: Result<Vec<String>, String> =
        values.iter().map(|v| if v.is_empty() { Ok(String::new()) } else { f(v) }).collect();
    let mut out = e.clone();
    out.set_text(&mapped?.join("\\"));
    Ok(Change::Replace(out))
}

pub(crate) fn emptied(e: &DataElement) -> DataElement {
    let mut out = e.clone();
    match &mut out.value {
        Value::Items(items) => items.clear(),
        Value::Bytes(b) => b.clear(),
    }
    out
}

fn date_kind(vr: Vr) -> Option<DateKind> {
    match vr {
        Vr::DA => Some(DateKind::Da),
        Vr::DT => Some(DateKind::Dt),
        Vr::TM => Some(DateKind::Tm),
        _ => None,
    }
}

pub(crate) fn transform(
    e: &DataElement,
    action: Action,
    path: &TagPath,
    cleaned: &Cleaned,
    store: &IdentityStore,
) -> Result<Change, String> {
    let remap_uid = |v: &str| store.remap_uid(v).map_err(|e| e.to_string());
    let shift = |kind: DateKind| move |v: &str| store.shift(v, kind).map_err(|e| e.to_string());
    match action {
        Action::Keep => Ok(Change::Keep),
        Action::Remove => Ok(Change::Remove),
        Action::Empty => Ok(Change::Replace(emptied(e))),
        Action::RemapUid => {
            if e.vr != Vr::UI {
                return Err(format!("RemapUID on VR {}", e.vr));
            }
            join_values(e, remap_uid)
        }
        Action::ShiftDate => {
            let kind = date_kind(e.vr).ok_or_else(|| format!("ShiftDate on VR {}", e.vr))?;
            join_values(e, shift(kind))
        }
        Action::CleanText => {
            if !e.vr.is_string() {
                return Err(format!("CleanText on VR {}", e.vr));
            }
            match cleaned.get(path) {
                None => Ok(Change::Keep),
                Some(Err(msg)) => Err(msg.clone()),
                Some(Ok((text, _))) => {
                    let text = text.trim_end_matches(' ');
                    if e.to_text().as_deref() == Some(text) {
                        return Ok(Change::Keep);
                    }
                    let mut out = e.clone();
                    out.set_text(text);
                    Ok(Change::Replace(out))
                }
            }
        }
        Action::ReplaceDummy => {
            if e.is_sequence() {
                return Ok(Change::Replace(emptied(e)));
            }
            if e.tag == tags::PATIENT_ID {
                return join_values(e, |v| store.remap_patient_id(v).map_err(|e| e.to_string()));
            }
            if let Some(kind) = date_kind(e.vr) {
                return join_values(e, shift(kind));
            }
            match e.vr {
                Vr::UI => join_values(e, remap_uid),
                Vr::PN => join_values(e, |_| Ok(DUMMY_PERSON_NAME.into())),
                Vr::DS | Vr::IS => join_values(e, |_| Ok("0".into())),
                Vr::AS => join_values(e, |_| Ok("000Y".into())),
                vr if vr.is_string() || vr.class() == VrClass::Text => join_values(e, |_| Ok(DUMMY_TEXT.into())),
                _ => {
                    let mut out = e.clone();
                    if let Value::Bytes(b) = &mut out.value {
                        b.iter_mut().for_each(|x| *x = 0);
                    }
                    Ok(Change::Replace(out))
                }
            }
        }
    }
}

pub(crate) fn value_hash(e: &DataElement) -> Option<String> {
    let b = e.bytes()?;
    Some(hex::encode(&Sha256::digest(b)[..8]))
}

fn map_mut<'a>(ds: &'a mut DataSet, parents: &[(dcm_codec::Tag, usize)]) -> Option<&'a mut ElementMap> {
    let mut map = &mut ds.elements;
    for (tag, idx) in parents {
        map = &mut map.get_mut(tag)?.items_mut()?.get_mut(*idx)?.elements;
    }
    Some(map)
}

/// Apply the resolved action to every element, nested ones included.
///
/// Under a `delegate` private policy, private elements are left untouched
/// and reported as delegated. A failed action (detector down, unparseable
/// date, invalid UID) empties the element and marks the row degraded.
pub fn deidentify_dataset(
    ds: &DataSet,
    table: &RuleTable,
    custom: &CustomRuleSet,
    ctx: &DeidContext,
) -> (DataSet, DeidReport) {
    let entries = plan(ds, table, custom);
    let cleaned = clean_free_text(&entries, table, ctx);
    let mut rows = Vec::with_capacity(entries.len());
    let mut changes: Vec<(TagPath, Change)> = Vec::new();

    for p in &entries {
        let e = p.element;
        let before = value_hash(e);
        let mut row = ReportRow {
            path: p.path.clone(),
            vr: e.vr.code().to_string(),
            action: Some(p.action),
            outcome: Outcome::Unchanged,
            before_hash: before.clone(),
            after_hash: before.clone(),
            entities: cleaned.get(&p.path).and_then(|r| r.as_ref().ok()).map_or(0, |(_, n)| *n),
            degraded: false,
            error: None,
        };
        if p.delegated {
            row.action = None;
            row.outcome = Outcome::Delegated;
            rows.push(row);
            continue;
        }
        if p.skip {
            row.outcome = Outcome::RemovedWithParent;
            row.after_hash = None;
            rows.push(row);
            continue;
        }
        let change = transform(e, p.action, &p.path, &cleaned, ctx.store).unwrap_or_else(|msg| {
            row.degraded = true;
            row.error = Some(msg);
            Change::Replace(emptied(e))
        });
        match change {
            Change::Keep => {}
            Change::Remove => {
                row.outcome = Outcome::Removed;
                row.after_hash = None;
                changes.push((p.path.clone(), Change::Remove));
            }
            Change::Replace(new) => {
                if new.value != e.value {
                    row.outcome = Outcome::Modified;
                    row.after_hash = value_hash(&new);
                    changes.push((p.path.clone(), Change::Replace(new)));
                }
            }
        }
        rows.push(row);
    }

    let mut out = ds.clone();
    for (path, change) in changes {
        let Some(map) = map_mut(&mut out, &path.parents) else { continue };
        match change {
            Change::Remove => {
                map.remove(&path.tag);
            }
            Change::Replace(new) => {
                map.insert(path.tag, new);
            }
            Change::Keep => {}
        }
    }
    (out, DeidReport { rows })
}
