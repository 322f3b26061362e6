//! Acceptance suite. One PASS/FAIL line per criterion; exits non-zero when
//! any criterion fails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dcm_codec::{dictionary, parse_file, serialize_file, tags, DataElement, DataSet, Tag, TransferSyntax, Vr};
use deid_core::identity::{shift_date, DateKind, IdentityStore, DEFAULT_DATE_OFFSET_DAYS};
use deid_core::phi::{PatternDetector, Whitelist};
use deid_core::pipeline::{run, OcrMode, RunConfig, Source};
use deid_core::pixel::{redact_boxes, Frame, TextBox};
use deid_core::private::build_private_key;
use deid_core::rules::{deidentify_dataset, CustomRuleSet, DeidContext, RuleTable};
use deid_core::validate::{repair, validate, IgnoreList, RequiredAttributeProfile};
use deid_eval::key::render;
use deid_eval::{generate, score_run, write_corpus, Corpus, CorpusSpec, Expect, ScoreReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    corpus: Corpus,
}

impl Fixture {
    fn new(n: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let root = dir.path().to_path_buf();
        let corpus = generate(&CorpusSpec { n_files: n, seed, ..Default::default() }).expect("corpus");
        write_corpus(&corpus, &root.join("in"), &root.join("key.json"), &root.join("detections.jsonl")).expect("write corpus");
        Fixture { _dir: dir, root, corpus }
    }

    fn input(&self) -> PathBuf {
        self.root.join("in")
    }

    /// Full configuration with OCR from the detections file; `tweak` adjusts it.
    fn run(&self, out: &str, tweak: impl FnOnce(&mut RunConfig)) -> Result<PathBuf, String> {
        let out = self.root.join(out);
        let mut cfg = RunConfig::new(self.input(), &out);
        cfg.ocr = OcrMode::Detections { path: self.root.join("detections.jsonl"), strict: true };
        cfg.salt = Some(b"acceptance".to_vec());
        tweak(&mut cfg);
        let report = run(&cfg).map_err(|e| e.to_string())?;
        ensure!(report.totals.failed == 0, "{} files failed", report.totals.failed);
        Ok(out)
    }

    fn score(&self, out: &Path) -> Result<ScoreReport, String> {
        score_run(&self.corpus.key, &self.input(), out).map_err(|e| e.to_string())
    }
}

fn codec_round_trip() -> Check {
    let corpus = generate(&CorpusSpec { n_files: 1000, seed: 1, ..Default::default() }).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let mut identical = 0;
    for (path, bytes) in &corpus.files {
        let ds = parse_file(bytes).map_err(|e| format!("{path}: {e}"))?;
        let back = serialize_file(&ds).map_err(|e| format!("{path}: {e}"))?;
        identical += usize::from(&back == bytes);
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(identical == 1000, "{identical}/1000 byte-identical");
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!("1000/1000 byte-identical in {secs:.2} s"))
}

fn end_to_end_accuracy(f: &Fixture) -> Check {
    let out = f.run("full", |_| {})?;
    let r = f.score(&out)?;
    ensure!(r.accuracy >= 99.0, "accuracy {:.3}% ({} of {})", r.accuracy, r.matched, r.total);
    Ok(format!("{:.3}% ({} of {} tags, {} files)", r.accuracy, r.matched, r.total, f.corpus.files.len()))
}

fn ablation(f: &Fixture) -> Check {
    let levels: [(&str, fn(&mut RunConfig)); 4] = [
        ("base tcia", |c| {
            c.custom_rules = Source::Off;
            c.private_dict = Source::Off;
            c.validate = false;
        }),
        ("+custom rules", |c| {
            c.private_dict = Source::Off;
            c.validate = false;
        }),
        ("+private dict", |c| c.validate = false),
        ("+validator", |_| {}),
    ];
    let mut scores = Vec::new();
    for (i, (name, tweak)) in levels.into_iter().enumerate() {
        let out = f.run(&format!("ablation{i}"), tweak)?;
        scores.push((name, f.score(&out)?.accuracy));
    }
    let line = scores.iter().map(|(n, a)| format!("{n} {a:.2}%")).collect::<Vec<_>>().join(" < ");
    ensure!(scores.windows(2).all(|w| w[0].1 < w[1].1), "not strictly increasing: {line}");
    Ok(line)
}

/// Day number counted from 1600-01-01 by walking years and months.
fn ordinal(y: i64, m: u32, d: u32) -> i64 {
    let leap = |y: i64| (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let month_len = |y: i64, m: u32| match m {
        2 if leap(y) => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    };
    let mut n: i64 = (1600..y).map(|yy| if leap(yy) { 366 } else { 365 }).sum();
    n += (1..m).map(|mm| month_len(y, mm) as i64).sum::<i64>();
    n + d as i64 - 1
}

fn from_ordinal(mut n: i64) -> String {
    let leap = |y: i64| (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let mut y = 1600;
    loop {
        let len = if leap(y) { 366 } else { 365 };
        if n < len {
            break;
        }
        n -= len;
        y += 1;
    }
    let mut m = 1;
    loop {
        let len = ordinal(y, m + 1, 1) - ordinal(y, m, 1);
        if m == 12 || n < len {
            break;
        }
        n -= len;
        m += 1;
    }
    format!("{y:04}{m:02}{:02}", n + 1)
}

fn parse_da(s: &str) -> i64 {
    ordinal(s[..4].parse().unwrap(), s[4..6].parse().unwrap(), s[6..8].parse().unwrap())
}

fn date_shift() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut prev: Option<String> = None;
    for i in 0..10_000 {
        let n = rng.gen_range(ordinal(1900, 1, 1)..ordinal(2100, 1, 1));
        let value = from_ordinal(n);
        let offset = rng.gen_range(-365..=365);
        let got = shift_date(&value, DateKind::Da, offset).map_err(|e| format!("{value}: {e}"))?;
        let want = from_ordinal(n + offset);
        ensure!(got == want, "case {i}: {value} {offset:+} gave {got}, oracle {want}");
        if let Some(pv) = &prev {
            // Same offset applied to the previous value: the gap survives.
            let ps = shift_date(pv, DateKind::Da, offset).map_err(|e| e.to_string())?;
            ensure!(parse_da(&got) - parse_da(&ps) == n - parse_da(pv), "interval changed for {pv} and {value}");
        }
        prev = Some(value);
    }
    let defaults = [DEFAULT_DATE_OFFSET_DAYS, RunConfig::new("a", "b").date_offset, CorpusSpec::default().date_offset];
    ensure!(defaults.iter().all(|&d| d == 120), "default offsets {defaults:?}");
    Ok("10000 values match the oracle, intervals preserved, default offset 120".into())
}

fn is_uid_2_25(u: &str) -> bool {
    u.len() <= 64
        && u.strip_prefix("2.25.").is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) && (n == "0" || !n.starts_with('0')))
}

fn uid_consistency(f: &Fixture) -> Check {
    let out = f.root.join("full");
    let mut classes: BTreeMap<&str, HashSet<String>> = BTreeMap::new();
    let mut links = 0;
    let mut sop_map: HashMap<&str, String> = HashMap::new();
    let mut refs: Vec<(&str, String)> = Vec::new();
    for fk in &f.corpus.key.files {
        let ds = parse_file(&std::fs::read(out.join(&fk.path)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for e in fk.entries.iter().filter(|e| e.expect == Expect::Uid) {
            let v = ds.get_path(&e.path).and_then(|el| render(el, e.vr)).ok_or(format!("{}: {} missing", fk.path, e.name))?;
            ensure!(is_uid_2_25(&v), "{}: {} = {v:?}", fk.path, e.name);
            classes.entry(e.original.as_str()).or_default().insert(v.clone());
            match e.name.as_str() {
                "SOPInstanceUID" => {
                    sop_map.insert(e.original.as_str(), v);
                }
                "ReferencedSOPInstanceUID" => refs.push((e.original.as_str(), v)),
                _ => {}
            }
        }
    }
    for (orig, v) in &refs {
        ensure!(sop_map.get(orig) == Some(v), "reference to {orig} does not follow the referenced file");
        links += 1;
    }
    ensure!(links > 0, "corpus has no reference links");
    let split: Vec<_> = classes.iter().filter(|(_, s)| s.len() != 1).map(|(k, _)| *k).collect();
    ensure!(split.is_empty(), "classes with several replacements: {split:?}");
    let replacements: HashSet<&String> = classes.values().flatten().collect();
    ensure!(replacements.len() == classes.len(), "two classes share a replacement");

    let store = IdentityStore::new(b"uid-collisions".to_vec(), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen = HashSet::new();
    for i in 0..100_000u32 {
        let original = format!("1.2.840.{}.{}.{i}", rng.gen_range(1..1_000_000u32), rng.gen::<u32>());
        let v = store.remap_uid(&original).map_err(|e| e.to_string())?;
        ensure!(is_uid_2_25(&v), "{original} -> {v:?}");
        ensure!(seen.insert(v), "collision at {i}");
    }
    Ok(format!("{} classes, {links} reference links consistent; 100000 random UIDs, 0 collisions", classes.len()))
}

fn private_key() -> Check {
    let k = build_private_key(Tag::new(0x0009, 0x102B), "gems_petd_01", Vr::SL).map_err(|e| e.to_string())?;
    let s = k.to_string();
    ensure!(s == "(0009,gems_petd_01,2b)_SL", "rendered {s:?}");
    Ok(s)
}

fn series_description(whitelist: Option<&Whitelist>) -> Result<Option<String>, String> {
    let mut ds = DataSet::new(TransferSyntax::ExplicitVrLittleEndian);
    let kw = |k: &str| dictionary::by_keyword(k).unwrap().tag;
    ds.set(DataElement::text(tags::SOP_CLASS_UID, Vr::UI, "1.2.840.10008.5.1.4.1.1.4"));
    ds.set(DataElement::text(kw("Modality"), Vr::CS, "MR"));
    ds.set(DataElement::text(kw("SeriesDescription"), Vr::LO, "MR BREAST"));
    let table = RuleTable::bundled("tcia").map_err(|e| e.to_string())?;
    let store = IdentityStore::new(b"wl".to_vec(), 120);
    let ctx = DeidContext { store: &store, detector: &PatternDetector, whitelist };
    let (out, _) = deidentify_dataset(&ds, &table, &CustomRuleSet::bundled(), &ctx);
    Ok(out.get(kw("SeriesDescription")).and_then(|e| e.to_text()))
}

fn whitelist_regression() -> Check {
    let wl = Whitelist::bundled();
    let with = series_description(Some(&wl))?;
    let without = series_description(None)?;
    ensure!(with.as_deref() == Some("MR BREAST"), "with whitelist: {with:?}");
    ensure!(without.as_deref() == Some(""), "without whitelist: {without:?}");
    Ok("kept with the whitelist, emptied without".into())
}

fn validator_repair(f: &Fixture) -> Check {
    let (path, bytes) = f
        .corpus
        .files
        .iter()
        .find(|(_, b)| parse_file(b).is_ok_and(|d| d.text(tags::SOP_CLASS_UID).as_deref() == Some("1.2.840.10008.5.1.4.1.1.2")))
        .ok_or("no CT file in corpus")?;
    let mut ds = parse_file(bytes).map_err(|e| e.to_string())?;
    let tag = |k: &str| dictionary::by_keyword(k).unwrap().tag;
    ds.set(DataElement::text(tag("ClinicalTrialSeriesID"), Vr::LO, "S1"));
    ds.set(DataElement::text(tag("ClinicalTrialSubjectID"), Vr::LO, "SUBJ01"));
    let profile = RequiredAttributeProfile::bundled();
    let ignore = IgnoreList::bundled();
    ensure!(validate(&ds, profile).is_empty(), "{path} does not start out valid");

    let stripped = ["PatientName", "StudyDate", "SeriesNumber", "Manufacturer", "ClinicalTrialSubjectID"];
    for k in stripped {
        ds.remove(tag(k));
    }
    let issues = validate(&ds, profile);
    ensure!(issues.len() == 5, "{} issues after stripping", issues.len());
    let (fixed, report) = repair(&ds, &issues, &ignore);
    let inserted: Vec<&str> = report.inserted.iter().map(|i| i.keyword.as_str()).collect();
    ensure!(inserted.len() == 3, "inserted {inserted:?}");
    for k in &inserted {
        let e = fixed.get(tag(k)).ok_or(format!("{k} not inserted"))?;
        ensure!(e.value_len() == 0, "{k} has a value");
    }
    let added = fixed.elements.len() - ds.elements.len();
    ensure!(added == 3, "{added} elements added");
    let mut again: Vec<String> = validate(&fixed, profile).into_iter().map(|i| i.keyword).collect();
    again.sort();
    ensure!(again == ["ClinicalTrialSubjectID", "Manufacturer"], "re-validation reports {again:?}");
    Ok(format!("inserted {}; re-validation: {}", inserted.join(", "), again.join(", ")))
}

fn pixel_data(path: &Path) -> Result<Vec<u8>, String> {
    let ds = parse_file(&std::fs::read(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok(ds.get(tags::PIXEL_DATA).and_then(|e| e.bytes()).ok_or("no pixel data")?.to_vec())
}

fn pixel_redaction(f: &Fixture) -> Check {
    let r = f.score(&f.root.join("full"))?;
    let p = &r.pixel;
    ensure!(p.phi_boxes > 0, "no PHI boxes in corpus");
    let min = p.min_box_change.unwrap_or(0.0);
    ensure!(min >= 0.95, "a box had only {:.1}% of pixels changed", 100.0 * min);
    ensure!(p.outside_changed == 0, "{} pixels changed outside boxes", p.outside_changed);
    ensure!(p.kept_boxes_untouched == p.kept_boxes, "non-PHI text boxes were painted");

    // Redacting the redacted output again changes nothing.
    let once = f.root.join("full");
    let twice = f.root.join("twice");
    let mut cfg = RunConfig::new(&once, &twice);
    cfg.ocr = OcrMode::Detections { path: f.root.join("detections.jsonl"), strict: true };
    cfg.salt = Some(b"acceptance".to_vec());
    run(&cfg).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for fk in f.corpus.key.files.iter().filter(|k| !k.frames.is_empty()) {
        ensure!(pixel_data(&once.join(&fk.path))? == pixel_data(&twice.join(&fk.path))?, "{} changed on second pass", fk.path);
        compared += 1;
    }

    // Same on a single frame, directly.
    let mut frame = Frame::new(32, 32, 16, 1, (0..2048u32).map(|i| (i * 37 % 251) as u8).collect());
    let boxes = [TextBox::new(4, 4, 20, 10, "DOE^JOHN", 0.9), TextBox::new(0, 20, 12, 28, "MRN1234567", 0.9)];
    redact_boxes(&mut frame, &boxes);
    let first = frame.pixels.clone();
    redact_boxes(&mut frame, &boxes);
    ensure!(frame.pixels == first, "second redaction changed the frame");

    Ok(format!(
        "{}/{} boxes redacted, min change {:.1}%, 0 pixels outside, {compared} files idempotent",
        p.phi_boxes_redacted,
        p.phi_boxes,
        100.0 * min
    ))
}

fn throughput(f: &Fixture) -> Check {
    let out = f.root.join("metadata-only");
    let mut cfg = RunConfig::new(f.input(), &out);
    cfg.salt = Some(b"acceptance".to_vec());
    let t = Instant::now();
    let report = run(&cfg).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let rate = report.totals.ok as f64 / secs;
    ensure!(report.totals.ok == f.corpus.files.len(), "{} files ok", report.totals.ok);
    ensure!(rate >= 50.0, "{rate:.1} files/s");
    Ok(format!("{rate:.1} files/s ({} files, 1 worker)", report.totals.ok))
}

fn tree(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(out)
}

fn parallel_determinism(f: &Fixture) -> Check {
    let mut trees = Vec::new();
    for workers in [1, 8] {
        let csv = f.root.join(format!("mapping-{workers}.csv"));
        let out = f.run(&format!("workers-{workers}"), |c| {
            c.workers = workers;
            c.mapping_csv = Some(csv.clone());
        })?;
        trees.push((tree(&out)?, std::fs::read(&csv).map_err(|e| e.to_string())?));
    }
    let ((t1, c1), (t8, c8)) = (&trees[0], &trees[1]);
    ensure!(t1.len() == f.corpus.files.len(), "{} files written", t1.len());
    ensure!(t1.keys().eq(t8.keys()), "different file sets");
    let differ = t1.iter().filter(|(k, v)| t8.get(*k) != Some(v)).count();
    ensure!(differ == 0, "{differ} files differ");
    ensure!(c1 == c8, "mapping CSVs differ");
    Ok(format!("{} files and {} CSV bytes identical", t1.len(), c1.len()))
}

fn main() {
    let fixture = Fixture::new(500, 2024);
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("codec round-trip", Box::new(codec_round_trip)),
        ("end-to-end accuracy", Box::new(|| end_to_end_accuracy(&fixture))),
        ("ablation ordering", Box::new(|| ablation(&fixture))),
        ("date shifting", Box::new(date_shift)),
        ("UID consistency", Box::new(|| uid_consistency(&fixture))),
        ("private key construction", Box::new(private_key)),
        ("whitelist regression", Box::new(whitelist_regression)),
        ("validator repair", Box::new(|| validator_repair(&fixture))),
        ("pixel redaction", Box::new(|| pixel_redaction(&fixture))),
        ("throughput", Box::new(|| throughput(&fixture))),
        ("parallel determinism", Box::new(|| parallel_determinism(&fixture))),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
