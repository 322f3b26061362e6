//! `dcmdeid`: de-identify DICOM trees, generate synthetic corpora and score
//! runs against their answer keys.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deid_core::pipeline::{run, DetectorMode, OcrMode, RunConfig, Source};
use deid_core::validate::{validate, RequiredAttributeProfile};
use deid_eval::{generate, score_run, write_corpus, AnswerKey, CorpusSpec, PhiFamily};

#[derive(Parser)]
#[command(name = "dcmdeid", version, about = "DICOM de-identification toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// De-identify every DICOM file under a directory.
    Deid(DeidArgs),
    /// Write a synthetic PHI-laden corpus with its answer key.
    Generate(GenerateArgs),
    /// Score a de-identified tree against an answer key.
    Score(ScoreArgs),
    /// List required attributes missing from DICOM files.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct DeidArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Bundled rule profile.
    #[arg(long, default_value = "tcia")]
    profile: String,
    /// Rule document replacing the bundled profile.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, conflicts_with = "no_custom")]
    custom_rules: Option<PathBuf>,
    #[arg(long)]
    no_custom: bool,
    #[arg(long, conflicts_with = "no_private_dict")]
    private_dict: Option<PathBuf>,
    /// Remove every private element.
    #[arg(long)]
    no_private_dict: bool,
    #[arg(long, conflicts_with = "no_whitelist")]
    whitelist: Option<PathBuf>,
    #[arg(long)]
    no_whitelist: bool,
    /// Days subtracted from every date.
    #[arg(long, default_value_t = deid_core::identity::DEFAULT_DATE_OFFSET_DAYS, allow_negative_numbers = true)]
    date_offset: i64,
    /// Remote PHI detector; the offline pattern detector is used when unset.
    #[arg(long, env = "DEID_DETECTOR_URL")]
    detector_url: Option<String>,
    /// Remote OCR service for burned-in text.
    #[arg(long, env = "DEID_OCR_URL", conflicts_with = "detections")]
    ocr_url: Option<String>,
    /// Precomputed OCR detections (JSON lines).
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Fail frames that have no detections record.
    #[arg(long, requires = "detections")]
    strict_detections: bool,
    #[arg(long)]
    no_validate: bool,
    #[arg(long)]
    ignore_list: Option<PathBuf>,
    #[arg(long)]
    required_attributes: Option<PathBuf>,
    /// Program run on each output file; its stdout lists missing attributes.
    #[arg(long)]
    external_validator: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Pseudonym salt. A random one is drawn when unset.
    #[arg(long, env = "DEID_SALT", hide_env_values = true)]
    salt: Option<String>,
    #[arg(long)]
    mapping_csv: Option<PathBuf>,
    /// Per-file report, one JSON record per line.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, short, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated families: name,date,id,location,contact,uid.
    #[arg(long, value_delimiter = ',')]
    phi: Vec<PhiFamily>,
    #[arg(long, default_value_t = 0.3)]
    pixel_text_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    implicit_vr_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    multiframe_rate: f64,
    #[arg(long, default_value_t = deid_core::identity::DEFAULT_DATE_OFFSET_DAYS, allow_negative_numbers = true)]
    date_offset: i64,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    key: PathBuf,
    /// Original corpus files, for pixel comparison.
    #[arg(long)]
    corpus: PathBuf,
    /// De-identified tree.
    #[arg(long, short)]
    output: PathBuf,
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    required_attributes: Option<PathBuf>,
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

fn source(path: Option<PathBuf>, off: bool) -> Source {
    match (path, off) {
        (_, true) => Source::Off,
        (Some(p), _) => Source::File(p),
        (None, _) => Source::Bundled,
    }
}

fn deid(a: DeidArgs) -> Result<ExitCode, String> {
    let mut cfg = RunConfig::new(a.input, a.output);
    cfg.profile = a.profile;
    cfg.rules_file = a.rules;
    cfg.custom_rules = source(a.custom_rules, a.no_custom);
    cfg.private_dict = source(a.private_dict, a.no_private_dict);
    cfg.whitelist = source(a.whitelist, a.no_whitelist);
    cfg.date_offset = a.date_offset;
    cfg.detector = a.detector_url.map_or(DetectorMode::Pattern, DetectorMode::Remote);
    cfg.ocr = match (a.detections, a.ocr_url) {
        (Some(path), _) => OcrMode::Detections { path, strict: a.strict_detections },
        (None, Some(url)) => OcrMode::Remote(url),
        (None, None) => OcrMode::Off,
    };
    cfg.validate = !a.no_validate;
    cfg.ignore_list = a.ignore_list;
    cfg.required_attributes = a.required_attributes;
    cfg.external_validator = a.external_validator;
    cfg.workers = if a.workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { a.workers };
    cfg.salt = a.salt.map(String::into_bytes);
    cfg.mapping_csv = a.mapping_csv;
    cfg.report = a.report;
    if !cfg.input_dir.is_dir() {
        return Err(format!("{}: not a directory", cfg.input_dir.display()));
    }
    let report = run(&cfg).map_err(|e| e.to_string())?;
    println!("{report}");
    Ok(if report.exit_code() == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn gen(a: GenerateArgs) -> Result<ExitCode, String> {
    let mut spec = CorpusSpec {
        n_files: a.n,
        seed: a.seed,
        pixel_text_rate: a.pixel_text_rate,
        implicit_vr_rate: a.implicit_vr_rate,
        multiframe_rate: a.multiframe_rate,
        date_offset: a.date_offset,
        ..CorpusSpec::default()
    };
    if !a.phi.is_empty() {
        spec.phi_mix = a.phi.into_iter().collect::<BTreeSet<_>>();
    }
    let corpus = generate(&spec).map_err(|e| e.to_string())?;
    let (files, key, det) = (a.out.join("files"), a.out.join("answer_key.json"), a.out.join("detections.jsonl"));
    write_corpus(&corpus, &files, &key, &det).map_err(|e| e.to_string())?;
    println!("{} files in {}", corpus.files.len(), files.display());
    println!("answer key: {}", key.display());
    println!("detections: {}", det.display());
    Ok(ExitCode::SUCCESS)
}

fn score(a: ScoreArgs) -> Result<ExitCode, String> {
    let key = AnswerKey::load(&a.key).map_err(|e| e.to_string())?;
    let report = score_run(&key, &a.corpus, &a.output).map_err(|e| e.to_string())?;
    println!("{report}");
    if let Some(p) = &a.json {
        let text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
        std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(if report.matched == report.total { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn check(a: ValidateArgs) -> Result<ExitCode, String> {
    let loaded;
    let profile = match &a.required_attributes {
        Some(p) => {
            loaded = RequiredAttributeProfile::load(p).map_err(|e| e.to_string())?;
            &loaded
        }
        None => RequiredAttributeProfile::bundled(),
    };
    let mut bad = false;
    for f in &a.files {
        let issues = read(f).map(|ds| validate(&ds, profile));
        match issues {
            Ok(v) if v.is_empty() => println!("{}: ok", f.display()),
            Ok(v) => {
                bad = true;
                for i in v {
                    println!("{}: missing {} {}", f.display(), i.tag, i.keyword);
                }
            }
            Err(e) => {
                bad = true;
                println!("{}: {e}", f.display());
            }
        }
    }
    Ok(if bad { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn read(path: &Path) -> Result<dcm_codec::DataSet, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    dcm_codec::parse_file(&bytes).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Deid(a) => deid(a),
        Cmd::Generate(a) => gen(a),
        Cmd::Score(a) => score(a),
        Cmd::Validate(a) => check(a),
    };
    res.unwrap_or_else(|e| {
        eprintln!("dcmdeid: {e}");
        ExitCode::from(2)
    })
}
