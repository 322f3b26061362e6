//! Tag-level scoring of a de-identified tree against an answer key.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use dcm_codec::{parse_file, DataSet};
use deid_core::identity::is_valid_uid_syntax;
use deid_core::pixel::{extract_frames, Frame};
use serde::{Deserialize, Serialize};

use crate::key::{render, AnswerKey, Expect, FileKey, KeyEntry, Label};
use crate::EvalError;

/// Minimum share of a PHI box's pixels that must change.
pub const BOX_CHANGE_FLOOR: f64 = 0.95;

fn trim_padding(s: &str) -> &str {
    s.trim_end_matches([' ', '\0'])
}

/// Similarity in [0, 1]: 1 for equal values (trailing padding ignored),
/// otherwise one minus the edit distance over the longer length.
pub fn check_score(expected: &str, produced: &str) -> f64 {
    let (a, b) = (trim_padding(expected), trim_padding(produced));
    if a == b {
        return 1.0;
    }
    let longest = a.chars().count().max(b.chars().count());
    1.0 - strsim::levenshtein(a, b) as f64 / longest as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureCategory {
    #[serde(rename = "PHI detection")]
    PhiDetection,
    #[serde(rename = "private tags")]
    PrivateTags,
    #[serde(rename = "validation")]
    Validation,
    #[serde(rename = "custom rules")]
    CustomRules,
}

impl FailureCategory {
    pub const ALL: [FailureCategory; 4] =
        [FailureCategory::PhiDetection, FailureCategory::PrivateTags, FailureCategory::Validation, FailureCategory::CustomRules];

    pub fn of(label: Label) -> Self {
        match label {
            Label::Private => FailureCategory::PrivateTags,
            Label::Repaired => FailureCategory::Validation,
            Label::Custom => FailureCategory::CustomRules,
            Label::Standard | Label::PhiTag | Label::PhiText => FailureCategory::PhiDetection,
        }
    }
}

impl fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureCategory::PhiDetection => "PHI detection",
            FailureCategory::PrivateTags => "private tags",
            FailureCategory::Validation => "validation",
            FailureCategory::CustomRules => "custom rules",
        })
    }
}

/// Histogram bucket labels, in report order. Every scored tag lands in one
/// bucket; scores strictly between 0 and 0.25, or between 0.99 and 1, fall
/// in the two gap buckets.
pub const BUCKETS: [&str; 9] =
    ["1.0", "0.0", "(0,0.25)", "[0.25,0.4)", "[0.4,0.5)", "[0.5,0.7)", "[0.7,0.8)", "[0.8,0.99]", "(0.99,1)"];

pub fn bucket_of(score: f64) -> usize {
    match score {
        s if s >= 1.0 => 0,
        s if s <= 0.0 => 1,
        s if s < 0.25 => 2,
        s if s < 0.4 => 3,
        s if s < 0.5 => 4,
        s if s < 0.7 => 5,
        s if s < 0.8 => 6,
        s if s <= 0.99 => 7,
        _ => 8,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub file: String,
    pub path: String,
    pub name: String,
    pub expected: Expect,
    pub original: String,
    pub produced: Option<String>,
    pub score: f64,
    pub category: FailureCategory,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PixelScore {
    pub frames: usize,
    pub frames_ok: usize,
    pub phi_boxes: usize,
    pub phi_boxes_redacted: usize,
    pub kept_boxes: usize,
    pub kept_boxes_untouched: usize,
    /// Pixels changed outside every PHI box, over all frames.
    pub outside_changed: usize,
    /// Smallest changed share seen in a PHI box.
    pub min_box_change: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub total: usize,
    pub matched: usize,
    /// Percentage of key entries matched.
    pub accuracy: f64,
    pub per_tag: BTreeMap<String, usize>,
    pub histogram: Vec<(String, usize)>,
    pub categories: BTreeMap<FailureCategory, usize>,
    pub mismatches: Vec<Mismatch>,
    pub pixel: PixelScore,
}

impl ScoreReport {
    /// Tag names by descending failure count.
    pub fn top_tags(&self, n: usize) -> Vec<(&str, usize)> {
        let mut v: Vec<(&str, usize)> = self.per_tag.iter().map(|(k, c)| (k.as_str(), *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v.truncate(n);
        v
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy: {:.2}% ({} of {} tags)", self.accuracy, self.matched, self.total)?;
        writeln!(f, "mismatches: {}", self.total - self.matched)?;
        if !self.per_tag.is_empty() {
            writeln!(f, "\n{:<40} {:>8}", "tag", "failures")?;
            for (name, n) in self.top_tags(20) {
                writeln!(f, "{name:<40} {n:>8}")?;
            }
        }
        writeln!(f, "\ncheck_score histogram:")?;
        for (label, n) in &self.histogram {
            writeln!(f, "  {label:<12} {n}")?;
        }
        writeln!(f, "\nfailure categories:")?;
        for c in FailureCategory::ALL {
            writeln!(f, "  {:<14} {}", c.to_string(), self.categories.get(&c).copied().unwrap_or(0))?;
        }
        let p = &self.pixel;
        write!(
            f,
            "\npixels: {}/{} frames ok, {}/{} PHI boxes redacted, {}/{} other boxes untouched, {} pixels changed outside PHI boxes",
            p.frames_ok, p.frames, p.phi_boxes_redacted, p.phi_boxes, p.kept_boxes_untouched, p.kept_boxes, p.outside_changed
        )
    }
}

struct Produced<'k> {
    file: &'k FileKey,
    values: Vec<Option<String>>,
    pixel: PixelScore,
}

fn read_dataset(path: &Path) -> Result<DataSet, EvalError> {
    let bytes = std::fs::read(path).map_err(|e| EvalError::io(path, e))?;
    parse_file(&bytes).map_err(|e| EvalError::Parse { path: path.display().to_string(), msg: e.to_string() })
}

fn changed(a: &Frame, b: &Frame, x: u32, y: u32) -> bool {
    (0..a.samples_per_pixel).any(|s| a.get(x, y, s) != b.get(x, y, s))
}

fn score_pixels(fk: &FileKey, original: &DataSet, output: &DataSet) -> Result<PixelScore, EvalError> {
    let mut p = PixelScore::default();
    if fk.frames.iter().all(|f| f.boxes.is_empty()) {
        return Ok(p);
    }
    let bad = |e: deid_core::pixel::PixelError| EvalError::Format(format!("{}: {e}", fk.path));
    let (before, after) = (extract_frames(original).map_err(bad)?, extract_frames(output).map_err(bad)?);
    for frame_key in fk.frames.iter().filter(|f| !f.boxes.is_empty()) {
        let (Some(a), Some(b)) = (before.get(frame_key.frame), after.get(frame_key.frame)) else {
            return Err(EvalError::Format(format!("{}: frame {} missing", fk.path, frame_key.frame)));
        };
        p.frames += 1;
        let phi: Vec<_> = frame_key.boxes.iter().filter(|b| b.phi).collect();
        let inside = |x: u32, y: u32| phi.iter().any(|k| x >= k.x0 && x < k.x1 && y >= k.y0 && y < k.y1);
        let mut ok = true;
        for k in &phi {
            p.phi_boxes += 1;
            let area = ((k.x1 - k.x0) * (k.y1 - k.y0)) as f64;
            let n = (k.y0..k.y1).flat_map(|y| (k.x0..k.x1).map(move |x| (x, y))).filter(|&(x, y)| changed(a, b, x, y)).count();
            let share = n as f64 / area;
            p.min_box_change = Some(p.min_box_change.map_or(share, |m: f64| m.min(share)));
            if share >= BOX_CHANGE_FLOOR {
                p.phi_boxes_redacted += 1;
            } else {
                ok = false;
            }
        }
        let outside = (0..a.rows).flat_map(|y| (0..a.cols).map(move |x| (x, y))).filter(|&(x, y)| !inside(x, y) && changed(a, b, x, y)).count();
        p.outside_changed += outside;
        ok &= outside == 0;
        for k in frame_key.boxes.iter().filter(|b| !b.phi) {
            p.kept_boxes += 1;
            let touched = (k.y0..k.y1).any(|y| (k.x0..k.x1).any(|x| changed(a, b, x, y)));
            p.kept_boxes_untouched += usize::from(!touched);
        }
        p.frames_ok += usize::from(ok);
    }
    Ok(p)
}

fn produce<'k>(fk: &'k FileKey, corpus_dir: &Path, output_dir: &Path) -> Result<Produced<'k>, EvalError> {
    let out_path = output_dir.join(&fk.path);
    if !out_path.is_file() {
        return Err(EvalError::MissingOutputFile(fk.path.clone()));
    }
    let output = read_dataset(&out_path)?;
    let values = fk.entries.iter().map(|e| output.get_path(&e.path).and_then(|el| render(el, e.vr))).collect();
    let pixel = if fk.frames.iter().any(|f| !f.boxes.is_empty()) {
        score_pixels(fk, &read_dataset(&corpus_dir.join(&fk.path))?, &output)?
    } else {
        PixelScore::default()
    };
    Ok(Produced { file: fk, values, pixel })
}

fn value_score(entry: &KeyEntry, produced: Option<&str>) -> f64 {
    let exact = |want: &str| produced.map_or(0.0, |p| check_score(want, p));
    match &entry.expect {
        Expect::Unchanged => exact(&entry.original),
        Expect::Value(v) => exact(v),
        Expect::Absent => f64::from(u8::from(produced.is_none())),
        Expect::Empty => produced.map_or(0.0, |p| check_score("", p)),
        Expect::Uid | Expect::Pseudonym => unreachable!("class entries are scored separately"),
    }
}

/// Compare `output_dir` against `key`. `corpus_dir` holds the original
/// files, needed to tell which pixels changed.
pub fn score_run(key: &AnswerKey, corpus_dir: &Path, output_dir: &Path) -> Result<ScoreReport, EvalError> {
    let produced: Vec<Produced> = deid_core::parallel::map(key.files.iter().collect(), |fk| produce(fk, corpus_dir, output_dir))
        .into_iter()
        .collect::<Result<_, _>>()?;

    // Class entries: every original maps to one replacement, replacements
    // are not shared between originals, and differ from the original. A
    // missing value fails its own entry only.
    let mut forward: HashMap<(bool, &str), BTreeSet<&str>> = HashMap::new();
    let mut backward: HashMap<(bool, &str), HashSet<&str>> = HashMap::new();
    for p in &produced {
        for (e, v) in p.file.entries.iter().zip(&p.values) {
            let uid = match e.expect {
                Expect::Uid => true,
                Expect::Pseudonym => false,
                _ => continue,
            };
            if let Some(v) = v {
                forward.entry((uid, e.original.as_str())).or_default().insert(v.as_str());
                backward.entry((uid, v.as_str())).or_default().insert(e.original.as_str());
            }
        }
    }
    let class_ok = |uid: bool, original: &str, v: Option<&str>| -> bool {
        let Some(v) = v else { return false };
        let syntax = if uid { is_valid_uid_syntax(v) && v.len() <= 64 } else { !v.is_empty() && v.len() <= 64 };
        syntax
            && v != original
            && forward.get(&(uid, original)).is_some_and(|s| s.len() == 1)
            && backward.get(&(uid, v)).is_some_and(|s| s.len() == 1)
    };

    let mut report = ScoreReport::default();
    let mut hist = [0usize; BUCKETS.len()];
    for p in &produced {
        for (e, v) in p.file.entries.iter().zip(&p.values) {
            report.total += 1;
            let score = match e.expect {
                Expect::Uid => f64::from(u8::from(class_ok(true, &e.original, v.as_deref()))),
                Expect::Pseudonym => f64::from(u8::from(class_ok(false, &e.original, v.as_deref()))),
                _ => value_score(e, v.as_deref()),
            };
            hist[bucket_of(score)] += 1;
            if score >= 1.0 {
                report.matched += 1;
                continue;
            }
            let category = FailureCategory::of(e.label);
            *report.per_tag.entry(e.name.clone()).or_default() += 1;
            *report.categories.entry(category).or_default() += 1;
            report.mismatches.push(Mismatch {
                file: p.file.path.clone(),
                path: e.path.to_string(),
                name: e.name.clone(),
                expected: e.expect.clone(),
                original: e.original.clone(),
                produced: v.clone(),
                score,
                category,
            });
        }
        let (a, b) = (&mut report.pixel, &p.pixel);
        a.frames += b.frames;
        a.frames_ok += b.frames_ok;
        a.phi_boxes += b.phi_boxes;
        a.phi_boxes_redacted += b.phi_boxes_redacted;
        a.kept_boxes += b.kept_boxes;
        a.kept_boxes_untouched += b.kept_boxes_untouched;
        a.outside_changed += b.outside_changed;
        a.min_box_change = match (a.min_box_change, b.min_box_change) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
    }
    report.accuracy = if report.total == 0 { 100.0 } else { 100.0 * report.matched as f64 / report.total as f64 };
    report.histogram = BUCKETS.iter().zip(hist).map(|(l, n)| (l.to_string(), n)).collect();
    Ok(report)
}
