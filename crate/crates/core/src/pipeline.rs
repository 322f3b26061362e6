//! Directory-level de-identification: discover, process each file through
//! header rules, private tags, burned-in text and validation, then export.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dcm_codec::{has_part10_magic, parse_file, serialize_file, tags, DataElement, DataSet, Vr};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::identity::{IdentityStore, DEFAULT_DATE_OFFSET_DAYS};
use crate::phi::{load_whitelist, PatternDetector, PhiDetector, RemoteDetector, Whitelist};
use crate::pixel::{deidentify_image, DetectionsFile, ImageDeidConfig, NoText, RemoteOcr, TextSource};
use crate::private::{deidentify_private, load_private_dict, PrivateDict};
use crate::rules::{deidentify_dataset, load_rule_file, CustomRuleSet, DeidContext, RuleTable};
use crate::validate::{self, IgnoreList, RequiredAttributeProfile};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("walking {0}")]
    Walk(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Off,
    Bundled,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectorMode {
    Pattern,
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OcrMode {
    Off,
    Remote(String),
    Detections { path: PathBuf, strict: bool },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Bundled profile name; ignored when `rules_file` is set.
    pub profile: String,
    pub rules_file: Option<PathBuf>,
    /// Custom rule overlay. A file is read as a rule document and its
    /// `@custom` section used.
    pub custom_rules: Source,
    /// Private tag dictionary. `Off` removes every private element.
    pub private_dict: Source,
    pub whitelist: Source,
    pub date_offset: i64,
    pub detector: DetectorMode,
    pub ocr: OcrMode,
    pub validate: bool,
    pub ignore_list: Option<PathBuf>,
    pub required_attributes: Option<PathBuf>,
    pub external_validator: Option<PathBuf>,
    pub workers: usize,
    /// `None` draws a random salt, so pseudonyms differ between runs.
    pub salt: Option<Vec<u8>>,
    pub mapping_csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(input_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            input_dir: input_dir.into(),
            output_dir: output_dir.into(),
            profile: "tcia".into(),
            rules_file: None,
            custom_rules: Source::Bundled,
            private_dict: Source::Bundled,
            whitelist: Source::Bundled,
            date_offset: DEFAULT_DATE_OFFSET_DAYS,
            detector: DetectorMode::Pattern,
            ocr: OcrMode::Off,
            validate: true,
            ignore_list: None,
            required_attributes: None,
            external_validator: None,
            workers: 1,
            salt: None,
            mapping_csv: None,
            report: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileStatus {
    Ok,
    Failed,
}

/// Microseconds per step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTimings {
    pub parse: u64,
    pub metadata: u64,
    pub private: u64,
    pub pixel: u64,
    pub validate: u64,
    pub export: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub status: FileStatus,
    pub error: Option<String>,
    pub actions: BTreeMap<String, usize>,
    pub degraded: usize,
    pub private_removed: usize,
    pub pixel_redacted: usize,
    pub repairs: Vec<String>,
    pub ignored_issues: Vec<String>,
    /// The only non-deterministic part of a record.
    pub timing: StepTimings,
}

impl FileRecord {
    fn new(path: &str) -> Self {
        FileRecord {
            path: path.to_string(),
            status: FileStatus::Ok,
            error: None,
            actions: BTreeMap::new(),
            degraded: 0,
            private_removed: 0,
            pixel_redacted: 0,
            repairs: Vec::new(),
            ignored_issues: Vec::new(),
            timing: StepTimings::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub files: usize,
    pub ok: usize,
    pub failed: usize,
    pub skipped: usize,
    pub degraded: usize,
    pub private_removed: usize,
    pub pixel_redacted: usize,
    pub repairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub files: Vec<FileRecord>,
    pub skipped: Vec<SkippedFile>,
    pub totals: Totals,
    pub wall_ms: u64,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.totals.failed > 0)
    }

    fn total(&mut self) {
        let t = &mut self.totals;
        *t = Totals { files: self.files.len(), skipped: self.skipped.len(), ..Totals::default() };
        for f in &self.files {
            match f.status {
                FileStatus::Ok => t.ok += 1,
                FileStatus::Failed => t.failed += 1,
            }
            t.degraded += f.degraded;
            t.private_removed += f.private_removed;
            t.pixel_redacted += f.pixel_redacted;
            t.repairs += f.repairs.len();
        }
    }

    /// One JSON record per file, then the skipped files and a totals line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for f in &self.files {
            out.push_str(&serde_json::to_string(f).expect("record serializes"));
            out.push('\n');
        }
        for s in &self.skipped {
            out.push_str(&serde_json::json!({ "skipped": s }).to_string());
            out.push('\n');
        }
        out.push_str(&serde_json::json!({ "totals": self.totals, "timing": { "wall_ms": self.wall_ms } }).to_string());
        out.push('\n');
        out
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.totals;
        writeln!(f, "files: {} ok, {} failed, {} skipped", t.ok, t.failed, t.skipped)?;
        writeln!(f, "private elements removed: {}", t.private_removed)?;
        writeln!(f, "pixel boxes redacted: {}", t.pixel_redacted)?;
        writeln!(f, "attributes repaired: {}", t.repairs)?;
        writeln!(f, "degraded elements: {}", t.degraded)?;
        let secs = self.wall_ms as f64 / 1000.0;
        let rate = if secs > 0.0 { t.files as f64 / secs } else { 0.0 };
        write!(f, "wall time: {secs:.2} s ({rate:.1} files/s)")?;
        for r in self.files.iter().filter(|r| r.status == FileStatus::Failed) {
            write!(f, "\nFAILED {}: {}", r.path, r.error.as_deref().unwrap_or(""))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Discovery {
    pub files: Vec<PathBuf>,
    pub skipped: Vec<(PathBuf, String)>,
}

fn is_dcm(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("dcm"))
}

fn sniff(path: &Path) -> bool {
    use std::io::Read;
    let mut buf = [0u8; 132];
    std::fs::File::open(path).and_then(|mut f| f.read_exact(&mut buf)).is_ok() && has_part10_magic(&buf)
}

/// `.dcm` files and extensionless files carrying the DICM marker, relative
/// to `input_dir`, sorted by path. `exclude` (typically a nested output
/// directory) is not descended into.
pub fn discover_files(input_dir: &Path, exclude: Option<&Path>) -> Result<Discovery, PipelineError> {
    if !input_dir.is_dir() {
        return Err(PipelineError::Config(format!("{} is not a directory", input_dir.display())));
    }
    let exclude = exclude.and_then(|p| p.canonicalize().ok());
    let mut d = Discovery::default();
    let walker = WalkDir::new(input_dir).follow_links(false).into_iter().filter_entry(|e| match &exclude {
        Some(x) => e.path().canonicalize().map_or(true, |p| &p != x),
        None => true,
    });
    for entry in walker {
        let entry = entry.map_err(|e| PipelineError::Walk(e.to_string()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(input_dir).expect("under input dir").to_path_buf();
        if is_dcm(entry.path()) || (entry.path().extension().is_none() && sniff(entry.path())) {
            d.files.push(rel);
        } else {
            log::info!("skipping {}: not a DICOM file", rel.display());
            d.skipped.push((rel, "not a DICOM file".into()));
        }
    }
    d.files.sort();
    d.skipped.sort();
    Ok(d)
}

/// Forward-slash form of a relative path, used as the key in reports and
/// detection files.
pub fn rel_key(rel: &Path) -> String {
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// Everything loaded from a [`RunConfig`], ready to process files.
pub struct Pipeline {
    pub table: RuleTable,
    pub custom: CustomRuleSet,
    pub private_dict: PrivateDict,
    pub whitelist: Option<Whitelist>,
    pub store: IdentityStore,
    pub detector: Box<dyn PhiDetector>,
    pub text_source: Box<dyn TextSource>,
    pub ocr_enabled: bool,
    pub image_cfg: ImageDeidConfig,
    pub validation: Option<(RequiredAttributeProfile, IgnoreList)>,
    pub external_validator: Option<PathBuf>,
}

fn cfg_err(e: impl fmt::Display) -> PipelineError {
    PipelineError::Config(e.to_string())
}

impl Pipeline {
    pub fn new(cfg: &RunConfig) -> Result<Self, PipelineError> {
        let (table, from_file) = match &cfg.rules_file {
            Some(p) => {
                let (t, c) = load_rule_file(p).map_err(cfg_err)?;
                (t, Some(c))
            }
            None => (RuleTable::bundled(&cfg.profile).map_err(cfg_err)?, None),
        };
        let custom = match &cfg.custom_rules {
            Source::Off => CustomRuleSet::default(),
            Source::Bundled => CustomRuleSet::bundled(),
            Source::File(p) => load_rule_file(p).map_err(cfg_err)?.1,
        };
        let custom = match from_file {
            Some(c) if cfg.custom_rules == Source::Off => c,
            Some(mut c) => {
                c.overrides.extend(custom.overrides);
                c
            }
            None => custom,
        };
        let private_dict = match &cfg.private_dict {
            Source::Off => PrivateDict::default(),
            Source::Bundled => PrivateDict::bundled(),
            Source::File(p) => load_private_dict(p).map_err(cfg_err)?,
        };
        let whitelist = match &cfg.whitelist {
            Source::Off => None,
            Source::Bundled => Some(Whitelist::bundled()),
            Source::File(p) => Some(load_whitelist(p).map_err(cfg_err)?),
        };
        let store = match &cfg.salt {
            Some(s) => IdentityStore::new(s.clone(), cfg.date_offset),
            None => IdentityStore::with_random_salt(cfg.date_offset),
        };
        let detector: Box<dyn PhiDetector> = match &cfg.detector {
            DetectorMode::Pattern => Box::new(PatternDetector),
            DetectorMode::Remote(url) => Box::new(RemoteDetector::new(url)),
        };
        let (text_source, ocr_enabled): (Box<dyn TextSource>, bool) = match &cfg.ocr {
            OcrMode::Off => (Box::new(NoText), false),
            OcrMode::Remote(url) => (Box::new(RemoteOcr::new(url)), true),
            OcrMode::Detections { path, strict } => (Box::new(DetectionsFile::load(path, *strict).map_err(cfg_err)?), true),
        };
        let validation = if cfg.validate {
            let profile = match &cfg.required_attributes {
                Some(p) => RequiredAttributeProfile::load(p).map_err(cfg_err)?,
                None => RequiredAttributeProfile::bundled().clone(),
            };
            let ignore = match &cfg.ignore_list {
                Some(p) => IgnoreList::load(p).map_err(cfg_err)?,
                None => IgnoreList::bundled(),
            };
            Some((profile, ignore))
        } else {
            None
        };
        Ok(Pipeline {
            table,
            custom,
            private_dict,
            whitelist,
            store,
            detector,
            text_source,
            ocr_enabled,
            image_cfg: ImageDeidConfig::default(),
            validation,
            external_validator: cfg.external_validator.clone(),
        })
    }

    fn ctx(&self) -> DeidContext<'_> {
        DeidContext { store: &self.store, detector: self.detector.as_ref(), whitelist: self.whitelist.as_ref() }
    }

    /// De-identify one parsed data set. `key` identifies the file to the
    /// text source.
    pub fn deidentify(&self, ds: &DataSet, key: &str, rec: &mut FileRecord) -> Result<DataSet, String> {
        let t = Instant::now();
        let (ds, report) = deidentify_dataset(ds, &self.table, &self.custom, &self.ctx());
        rec.actions = report.action_counts();
        rec.degraded = report.degraded();
        rec.timing.metadata = micros(t);

        let t = Instant::now();
        let (mut ds, preport) = deidentify_private(&ds, &self.private_dict, &self.store);
        rec.private_removed = preport.removed();
        sync_media_storage_uid(&mut ds, &self.store)?;
        rec.timing.private = micros(t);

        let t = Instant::now();
        if self.ocr_enabled {
            let (out, irep) =
                deidentify_image(&ds, key, self.text_source.as_ref(), self.detector.as_ref(), self.whitelist.as_ref(), &self.image_cfg)
                    .map_err(|e| format!("pixel: {e}"))?;
            rec.pixel_redacted = irep.redacted();
            ds = out;
        }
        rec.timing.pixel = micros(t);

        let t = Instant::now();
        if let Some((profile, ignore)) = &self.validation {
            let issues = validate::validate(&ds, profile);
            let (out, rep) = validate::repair(&ds, &issues, ignore);
            rec.repairs.extend(rep.inserted.into_iter().map(|i| i.keyword));
            rec.ignored_issues.extend(rep.ignored.into_iter().map(|i| i.keyword));
            ds = out;
        }
        rec.timing.validate = micros(t);
        Ok(ds)
    }

    /// Parse, de-identify and serialize one file held in memory.
    pub fn process_bytes(&self, key: &str, bytes: &[u8]) -> (Option<Vec<u8>>, FileRecord) {
        let mut rec = FileRecord::new(key);
        let t = Instant::now();
        let parsed = parse_file(bytes);
        rec.timing.parse = micros(t);
        let result = parsed.map_err(|e| format!("parse: {e}")).and_then(|ds| self.deidentify(&ds, key, &mut rec)).and_then(|ds| {
            let t = Instant::now();
            let out = serialize_file(&ds).map_err(|e| format!("serialize: {e}"));
            rec.timing.export = micros(t);
            out
        });
        match result {
            Ok(b) => (Some(b), rec),
            Err(e) => {
                fail(&mut rec, e);
                (None, rec)
            }
        }
    }

    fn process_path(&self, cfg: &RunConfig, rel: &Path) -> FileRecord {
        let key = rel_key(rel);
        let src = cfg.input_dir.join(rel);
        let bytes = match std::fs::read(&src) {
            Ok(b) => b,
            Err(e) => {
                let mut rec = FileRecord::new(&key);
                fail(&mut rec, format!("read: {e}"));
                return rec;
            }
        };
        let (out, mut rec) = self.process_bytes(&key, &bytes);
        let Some(out) = out else { return rec };
        let t = Instant::now();
        let dst = cfg.output_dir.join(rel);
        let written = dst
            .parent()
            .map_or(Ok(()), std::fs::create_dir_all)
            .and_then(|_| std::fs::write(&dst, &out))
            .map_err(|e| format!("write {}: {e}", dst.display()));
        if let Err(e) = written {
            fail(&mut rec, e);
            return rec;
        }
        if let Err(e) = self.external_check(&dst, &mut rec) {
            let _ = std::fs::remove_file(&dst);
            fail(&mut rec, e);
        }
        rec.timing.export += micros(t);
        rec
    }

    /// Run the external validator on a written file and repair whatever it
    /// reports.
    fn external_check(&self, dst: &Path, rec: &mut FileRecord) -> Result<(), String> {
        let (Some(program), Some((_, ignore))) = (&self.external_validator, &self.validation) else { return Ok(()) };
        let issues = validate::run_external_validator(program, dst).map_err(|e| e.to_string())?;
        if issues.is_empty() {
            return Ok(());
        }
        let ds = parse_file(&std::fs::read(dst).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let (ds, rep) = validate::repair(&ds, &issues, ignore);
        rec.repairs.extend(rep.inserted.iter().map(|i| i.keyword.clone()));
        rec.ignored_issues.extend(rep.ignored.iter().map(|i| i.keyword.clone()));
        if !rep.inserted.is_empty() {
            std::fs::write(dst, serialize_file(&ds).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

fn fail(rec: &mut FileRecord, e: String) {
    log::warn!("{}: {e}", rec.path);
    rec.status = FileStatus::Failed;
    rec.error = Some(e);
}

fn micros(t: Instant) -> u64 {
    t.elapsed().as_micros() as u64
}

/// File meta SOP instance UID follows the (remapped) body value.
fn sync_media_storage_uid(ds: &mut DataSet, store: &IdentityStore) -> Result<(), String> {
    let uid = match ds.text(tags::SOP_INSTANCE_UID) {
        Some(u) if !u.is_empty() => u,
        _ => match ds.text(tags::MEDIA_STORAGE_SOP_INSTANCE_UID) {
            Some(old) if !old.is_empty() => store.remap_uid(&old).map_err(|e| format!("meta UID: {e}"))?,
            _ => return Ok(()),
        },
    };
    ds.set(DataElement::text(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, Vr::UI, &uid));
    Ok(())
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Process every file under `cfg.input_dir` and write the mirrored output
/// tree, mapping CSV and report.
pub fn run(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    let start = Instant::now();
    if same_dir(&cfg.input_dir, &cfg.output_dir) {
        return Err(PipelineError::Config("output directory must differ from input directory".into()));
    }
    let pipeline = Pipeline::new(cfg)?;
    run_with(cfg, &pipeline, start)
}

/// [`run`] with an already prepared pipeline.
pub fn run_with(cfg: &RunConfig, pipeline: &Pipeline, start: Instant) -> Result<RunReport, PipelineError> {
    let found = discover_files(&cfg.input_dir, Some(&cfg.output_dir))?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let files = crate::parallel::with_workers(cfg.workers, || {
        crate::parallel::map(found.files.clone(), |rel| pipeline.process_path(cfg, &rel))
    });
    let mut report = RunReport {
        files,
        skipped: found.skipped.iter().map(|(p, r)| SkippedFile { path: rel_key(p), reason: r.clone() }).collect(),
        ..RunReport::default()
    };
    report.total();
    if let Some(p) = &cfg.mapping_csv {
        pipeline.store.export_mappings(p).map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    report.wall_ms = start.elapsed().as_millis() as u64;
    if let Some(p) = &cfg.report {
        std::fs::write(p, report.to_jsonl()).map_err(io_err(p))?;
    }
    Ok(report)
}
