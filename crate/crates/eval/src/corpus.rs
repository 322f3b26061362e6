//! Seeded synthetic corpus: DICOM files with injected PHI, the answer key
//! describing their ideal de-identified form, and OCR detections for the
//! text burned into their pixels.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use dcm_codec::{dictionary, serialize_file, tags, DataElement, DataSet, Item, Tag, TagPath, TransferSyntax, Vr};
use deid_core::pixel::{DetectionRecord, Frame, WireBox};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::shift_yyyymmdd;
use crate::key::{AnswerKey, Expect, FileKey, FrameKey, KeyBox, KeyEntry, Label};
use crate::EvalError;

pub const FILES_PER_PATIENT: usize = 8;
pub const FILES_PER_SERIES: usize = 4;
pub const IMAGE_SIZE: u32 = 64;

const UID_ROOT: &str = "1.2.826.0.1.3680043.9.7433";
const SOP_CT: &str = "1.2.840.10008.5.1.4.1.1.2";
const SOP_MR: &str = "1.2.840.10008.5.1.4.1.1.4";
const SOP_CR: &str = "1.2.840.10008.5.1.4.1.1.1";
const SOP_SC: &str = "1.2.840.10008.5.1.4.1.1.7";

const GIVEN: &[&str] = &["John", "Mary", "Robert", "Linda", "Michael", "Susan", "David", "Karen", "James", "Patricia"];
const SURNAMES: &[&str] = &["Smith", "Johnson", "Williams", "Jones", "Miller", "Davis", "Garcia", "Wilson", "Anderson"];
const CITIES: &[&str] = &["Boston", "Denver", "Chicago", "Seattle", "Phoenix", "Houston", "Dallas", "Atlanta"];
const OCCUPATIONS: &[&str] = &["teacher", "engineer", "retired", "nurse", "farmer"];
const ALLERGIES: &[&str] = &["penicillin", "latex", "none known", "iodine contrast"];
const HISTORY: &[&str] = &["follow up of nodule", "pain after fall", "rule out infection", "post op check"];
const COMMENTS: &[&str] = &["motion artifact", "patient cooperative", "repeat acquisition", "limited study"];
const MARKERS: &[&str] = &["R", "L", "AXIAL"];

/// Kinds of identifier the generator can plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiFamily {
    Name,
    Date,
    Id,
    Location,
    Contact,
    Uid,
}

impl PhiFamily {
    pub const ALL: [PhiFamily; 6] =
        [PhiFamily::Name, PhiFamily::Date, PhiFamily::Id, PhiFamily::Location, PhiFamily::Contact, PhiFamily::Uid];

    fn as_str(self) -> &'static str {
        match self {
            PhiFamily::Name => "name",
            PhiFamily::Date => "date",
            PhiFamily::Id => "id",
            PhiFamily::Location => "location",
            PhiFamily::Contact => "contact",
            PhiFamily::Uid => "uid",
        }
    }
}

impl fmt::Display for PhiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhiFamily {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PhiFamily::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| EvalError::Spec(format!("unknown PHI family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_files: usize,
    pub seed: u64,
    /// Families present. Attributes that carry only a disabled family are
    /// left out, or written empty when the IOD requires them, and free text
    /// draws injections from the enabled families only.
    pub phi_mix: BTreeSet<PhiFamily>,
    /// Share of files with text burned into their pixels.
    pub pixel_text_rate: f64,
    pub implicit_vr_rate: f64,
    pub multiframe_rate: f64,
    /// Offset the answer key assumes for shifted dates.
    pub date_offset: i64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_files: 100,
            seed: 0,
            phi_mix: PhiFamily::ALL.into_iter().collect(),
            pixel_text_rate: 0.3,
            implicit_vr_rate: 0.2,
            multiframe_rate: 0.1,
            date_offset: deid_core::identity::DEFAULT_DATE_OFFSET_DAYS,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (name, r) in
            [("pixel_text_rate", self.pixel_text_rate), ("implicit_vr_rate", self.implicit_vr_rate), ("multiframe_rate", self.multiframe_rate)]
        {
            if !(0.0..=1.0).contains(&r) {
                return Err(EvalError::Spec(format!("{name} must be in [0, 1], got {r}")));
            }
        }
        if self.date_offset.abs() > 36_500 {
            return Err(EvalError::Spec(format!("date offset {} out of range", self.date_offset)));
        }
        Ok(())
    }

    fn has(&self, f: PhiFamily) -> bool {
        self.phi_mix.contains(&f)
    }
}

/// Files as (relative path, Part-10 bytes), in path order.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub files: Vec<(String, Vec<u8>)>,
    pub key: AnswerKey,
    pub detections: Vec<DetectionRecord>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Modality {
    Ct,
    Mr,
    Cr,
    Sc,
}

impl Modality {
    fn code(self) -> &'static str {
        match self {
            Modality::Ct => "CT",
            Modality::Mr => "MR",
            Modality::Cr => "CR",
            Modality::Sc => "OT",
        }
    }

    fn sop_class(self) -> &'static str {
        match self {
            Modality::Ct => SOP_CT,
            Modality::Mr => SOP_MR,
            Modality::Cr => SOP_CR,
            Modality::Sc => SOP_SC,
        }
    }

    fn study_descriptions(self) -> &'static [&'static str] {
        match self {
            Modality::Ct => &["CT CHEST W CONTRAST", "CT ABDOMEN PELVIS", "CT HEAD WO CONTRAST"],
            Modality::Mr => &["MRI BRAIN WO CONTRAST", "MRI KNEE", "MRI SPINE"],
            Modality::Cr => &["XR CHEST", "XR KNEE"],
            Modality::Sc => &["OUTSIDE IMAGES", "SCANNED DOCUMENT"],
        }
    }

    fn series_descriptions(self) -> &'static [&'static str] {
        match self {
            Modality::Ct => &["AXIAL 5MM", "CORONAL REFORMAT", "BONE WINDOW"],
            Modality::Mr => &["AX T2 FLAIR", "SAG T1", "MR BREAST", "DWI"],
            Modality::Cr => &["PA VIEW", "LATERAL"],
            Modality::Sc => &["SCREEN CAPTURE", "REPORT PAGE"],
        }
    }

    fn protocols(self) -> &'static [&'static str] {
        match self {
            Modality::Ct => &["routine chest", "trauma protocol", "low dose lung"],
            Modality::Mr => &["brain protocol", "knee routine", "breast dynamic"],
            Modality::Cr => &["chest two views", "knee standing"],
            Modality::Sc => &["secondary capture"],
        }
    }
}

struct Patient {
    given: &'static str,
    surname: &'static str,
    id: String,
    mrn: String,
    birth_date: String,
    sex: &'static str,
    age: String,
    city: &'static str,
    phone: String,
    occupation: &'static str,
    allergy: &'static str,
}

struct Study {
    uid: String,
    date: String,
    time: String,
    accession: String,
    study_id: String,
    description: &'static str,
    referring: (&'static str, &'static str),
    modality: Modality,
}

struct Series {
    uid: String,
    frame_of_reference: String,
    number: usize,
    modality: Modality,
    description: &'static str,
    protocol: &'static str,
    operator: (&'static str, &'static str),
    station: String,
    serial: String,
    device_uid: String,
    undefined_length_refs: bool,
}

struct Gen<'s> {
    spec: &'s CorpusSpec,
    rng: ChaCha8Rng,
    next_uid: u64,
}

impl<'s> Gen<'s> {
    fn uid(&mut self, kind: u32) -> String {
        self.next_uid += 1;
        format!("{UID_ROOT}.{kind}.{}.{}", self.spec.seed % 100_000, self.next_uid)
    }

    fn digits(&mut self, n: usize) -> String {
        (0..n).map(|i| char::from(b'0' + self.rng.gen_range(u8::from(i == 0)..10))).collect()
    }

    fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        *xs.choose(&mut self.rng).expect("non-empty list")
    }

    fn date(&mut self, years: std::ops::Range<i32>) -> String {
        let y = self.rng.gen_range(years);
        let m = self.rng.gen_range(1..=12u32);
        let d = self.rng.gen_range(1..=crate::calendar::days_in_month(y as i64, m));
        format!("{y:04}{m:02}{d:02}")
    }

    fn time(&mut self) -> String {
        format!("{:02}{:02}{:02}", self.rng.gen_range(7..19), self.rng.gen_range(0..60), self.rng.gen_range(0..60))
    }

    fn patient(&mut self) -> Patient {
        let birth_date = self.date(1935..2005);
        Patient {
            given: self.pick(GIVEN),
            surname: self.pick(SURNAMES),
            id: format!("PID{}", self.digits(6)),
            mrn: format!("MRN{}", self.digits(7)),
            age: format!("{:03}Y", 2023 - birth_date[..4].parse::<i64>().unwrap()),
            birth_date,
            sex: self.pick(&["M", "F"]),
            city: self.pick(CITIES),
            phone: format!("{}-{}-{}", self.digits(3), self.digits(3), self.digits(4)),
            occupation: self.pick(OCCUPATIONS),
            allergy: self.pick(ALLERGIES),
        }
    }

    fn modality(&mut self) -> Modality {
        match self.rng.gen_range(0..10) {
            0..=5 => Modality::Ct,
            6 | 7 => Modality::Mr,
            8 => Modality::Cr,
            _ => Modality::Sc,
        }
    }

    /// A PHI string from one of the enabled free-text families.
    fn injection(&mut self, p: &Patient) -> Option<String> {
        let families: Vec<PhiFamily> = self
            .spec
            .phi_mix
            .iter()
            .copied()
            .filter(|f| !matches!(f, PhiFamily::Uid))
            .collect();
        if families.is_empty() || !self.rng.gen_bool(0.5) {
            return None;
        }
        Some(match self.pick(&families) {
            PhiFamily::Name if self.rng.gen_bool(0.5) => format!("{} {}", p.given, p.surname),
            PhiFamily::Name => format!("Dr. {}", self.pick(SURNAMES)),
            PhiFamily::Date => {
                let d = self.date(2015..2024);
                format!("{}/{}/{}", d[4..6].trim_start_matches('0'), d[6..8].trim_start_matches('0'), &d[..4])
            }
            PhiFamily::Id => p.mrn.clone(),
            PhiFamily::Location => p.city.to_string(),
            PhiFamily::Contact => p.phone.clone(),
            PhiFamily::Uid => unreachable!(),
        })
    }
}

/// The part of a Name injection the detector reports; "Dr. " stays.
fn injected_span(inj: &str) -> &str {
    inj.strip_prefix("Dr. ").unwrap_or(inj)
}

struct FileBuilder {
    ds: DataSet,
    entries: Vec<KeyEntry>,
    offset: i64,
}

fn kw(keyword: &str) -> (Tag, Vr) {
    let e = dictionary::by_keyword(keyword).unwrap_or_else(|| panic!("{keyword} missing from dictionary"));
    (e.tag, e.vr)
}

fn shift_value(vr: Vr, v: &str, offset: i64) -> String {
    match vr {
        Vr::DA | Vr::DT => format!("{}{}", shift_yyyymmdd(&v[..8], offset), &v[8..]),
        _ => v.to_string(),
    }
}

impl FileBuilder {
    fn entry(&mut self, path: TagPath, name: &str, e: &DataElement, expect: Expect, label: Label) {
        let original = e.to_display_string().unwrap_or_default();
        self.entries.push(KeyEntry { path, name: name.to_string(), vr: e.vr, original, expect, label });
    }

    fn put_element(&mut self, name: &str, e: DataElement, expect: Expect, label: Label) {
        self.entry(TagPath::root(e.tag), name, &e, expect, label);
        self.ds.set(e);
    }

    fn put(&mut self, keyword: &str, value: &str, expect: Expect, label: Label) {
        let (tag, vr) = kw(keyword);
        self.put_element(keyword, DataElement::text(tag, vr, value), expect, label);
    }

    fn keep(&mut self, keyword: &str, value: &str) {
        self.put(keyword, value, Expect::Unchanged, Label::Standard);
    }

    fn keep_u16(&mut self, keyword: &str, value: u16) {
        let (tag, _) = kw(keyword);
        self.put_element(keyword, DataElement::u16(tag, value), Expect::Unchanged, Label::Standard);
    }

    /// Date-like value: shifted, or written empty when absent.
    fn date(&mut self, keyword: &str, value: Option<&str>, label: Label) {
        let (_, vr) = kw(keyword);
        match value {
            Some(v) => self.put(keyword, v, Expect::Value(shift_value(vr, v, self.offset)), label),
            None => self.put(keyword, "", Expect::Empty, label),
        }
    }

    /// Free text. An injection goes after `base`, followed by `suffix`.
    fn free_text(&mut self, keyword: &str, base: &str, injection: Option<String>, suffix: &str, label: Label) {
        let custom = label == Label::Custom;
        match injection {
            None => self.put(keyword, base, if custom { Expect::Absent } else { Expect::Unchanged }, label),
            Some(inj) => {
                let kept = inj.strip_suffix(injected_span(&inj)).unwrap_or("");
                let text = format!("{base} {inj}{suffix}");
                let expect = if custom {
                    Expect::Absent
                } else {
                    Expect::Value(format!("{base} {kept}{suffix}").trim_end_matches(' ').to_string())
                };
                self.put(keyword, &text, expect, if custom { label } else { Label::PhiText });
            }
        }
    }

    fn private(&mut self, tag: Tag, vr: Vr, bytes: Vec<u8>, creator: &str, expect: Expect) {
        let e = DataElement::new(tag, vr, bytes);
        let name = format!("({:04x},{},{:02x})_{}", tag.group, creator, tag.element & 0xFF, vr);
        self.put_element(&name, e, expect, Label::Private);
    }

    fn creator(&mut self, tag: Tag, creator: &str, expect: Expect) {
        let e = DataElement::text(tag, Vr::LO, creator);
        self.put_element(&format!("{tag} creator {creator}"), e, expect, Label::Private);
    }
}

fn text_bytes(vr: Vr, s: &str) -> Vec<u8> {
    dcm_codec::encode_text(vr, s)
}

struct Pixels {
    bits: u16,
    spp: u16,
    frames: Vec<Frame>,
    boxes: Vec<KeyBox>,
}

impl Gen<'_> {
    fn pixels(&mut self, modality: Modality, n_frames: usize, burned: Vec<String>) -> Pixels {
        let (bits, spp, noise_max, ink) = if modality == Modality::Sc { (8u16, 3u16, 200u16, 255u16) } else { (16, 1, 4000, 4095) };
        let bytes = (IMAGE_SIZE * IMAGE_SIZE) as usize * spp as usize * (bits as usize / 8);
        let mut boxes = Vec::new();
        let mut rows = [4u32, 18, 32].into_iter();
        for text in burned {
            let y0 = rows.next().expect("at most three PHI boxes");
            let w = (6 * text.len() as u32).clamp(6, IMAGE_SIZE - 8);
            boxes.push(KeyBox { x0: 4, y0, x1: 4 + w, y1: y0 + 8, text, phi: true });
        }
        if !boxes.is_empty() {
            let marker = self.pick(MARKERS).to_string();
            let w = 6 * marker.len() as u32;
            boxes.push(KeyBox { x0: 4, y0: 48, x1: 4 + w, y1: 56, text: marker, phi: false });
        }
        let frames = (0..n_frames)
            .map(|_| {
                let mut f = Frame::new(IMAGE_SIZE, IMAGE_SIZE, bits, spp, vec![0; bytes]);
                for y in 0..IMAGE_SIZE {
                    for x in 0..IMAGE_SIZE {
                        for s in 0..spp {
                            let v = self.rng.gen_range(0..noise_max);
                            f.set(x, y, s, v);
                        }
                    }
                }
                for b in &boxes {
                    for y in b.y0..b.y1 {
                        for x in b.x0..b.x1 {
                            for s in 0..spp {
                                f.set(x, y, s, ink);
                            }
                        }
                    }
                }
                f
            })
            .collect();
        Pixels { bits, spp, frames, boxes }
    }
}

fn file_path(i: usize) -> String {
    let (p, s) = (i / FILES_PER_PATIENT, i / FILES_PER_SERIES);
    // Every 25th file has no extension and is found by its magic bytes.
    let ext = if i % 25 == 24 { "" } else { ".dcm" };
    format!("patient_{p:03}/series_{s:04}/{i:05}{ext}")
}

/// Generate `spec.n_files` files. Same spec, same bytes.
pub fn generate(spec: &CorpusSpec) -> Result<Corpus, EvalError> {
    spec.validate()?;
    let mut g = Gen { spec, rng: ChaCha8Rng::seed_from_u64(spec.seed), next_uid: 0 };
    let has = |f| spec.has(f);
    let mut files = Vec::with_capacity(spec.n_files);
    let mut keys = Vec::with_capacity(spec.n_files);
    let mut detections = Vec::new();

    let mut patient: Option<(Patient, Study)> = None;
    let mut series: Option<Series> = None;
    let mut previous: Option<(String, String)> = None;

    for i in 0..spec.n_files {
        if i % FILES_PER_PATIENT == 0 {
            let p = g.patient();
            let modality = g.modality();
            let study = Study {
                uid: g.uid(1),
                date: g.date(2015..2024),
                time: g.time(),
                accession: format!("ACC{}", g.digits(7)),
                study_id: g.digits(4),
                description: g.pick(modality.study_descriptions()),
                referring: (g.pick(GIVEN), g.pick(SURNAMES)),
                modality,
            };
            patient = Some((p, study));
            series = None;
        }
        if i % FILES_PER_SERIES == 0 {
            let modality = patient.as_ref().expect("patient set").1.modality;
            series = Some(Series {
                uid: g.uid(2),
                frame_of_reference: g.uid(3),
                number: 1 + (i % FILES_PER_PATIENT) / FILES_PER_SERIES,
                modality,
                description: g.pick(modality.series_descriptions()),
                protocol: g.pick(modality.protocols()),
                operator: (g.pick(GIVEN), g.pick(SURNAMES)),
                station: format!("{}SCAN{}", modality.code(), g.digits(2)),
                serial: format!("SN{}", g.digits(6)),
                device_uid: g.uid(4),
                undefined_length_refs: g.rng.gen_bool(0.5),
            });
            previous = None;
        }
        let (p, study) = patient.as_ref().expect("patient set");
        let s = series.as_ref().expect("series set");
        let m = s.modality;
        let path = file_path(i);

        let ts = if g.rng.gen_bool(spec.implicit_vr_rate) {
            TransferSyntax::ImplicitVrLittleEndian
        } else {
            TransferSyntax::ExplicitVrLittleEndian
        };
        let mut f = FileBuilder { ds: DataSet::new(ts), entries: Vec::new(), offset: spec.date_offset };
        let sop_uid = g.uid(5);
        f.ds.set(DataElement::text(tags::MEDIA_STORAGE_SOP_CLASS_UID, Vr::UI, m.sop_class()));
        f.ds.set(DataElement::text(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, Vr::UI, &sop_uid));

        // General, patient, study and series modules.
        f.keep("SpecificCharacterSet", "ISO_IR 100");
        f.keep("SOPClassUID", m.sop_class());
        f.put("SOPInstanceUID", &sop_uid, Expect::Uid, Label::PhiTag);
        f.put("StudyInstanceUID", &study.uid, Expect::Uid, Label::PhiTag);
        f.put("SeriesInstanceUID", &s.uid, Expect::Uid, Label::PhiTag);
        f.keep("Modality", m.code());
        f.keep("Manufacturer", "ACME MEDICAL");
        f.put("ManufacturerModelName", "Imager 3000", Expect::Unchanged, Label::Custom);
        f.put("SoftwareVersions", "VX 4.2", Expect::Unchanged, Label::Custom);
        f.put("StationName", &s.station, Expect::Unchanged, Label::Custom);
        f.put("DeviceSerialNumber", &s.serial, Expect::Unchanged, Label::Custom);

        let study_date = has(PhiFamily::Date).then_some(study.date.as_str());
        f.date("StudyDate", study_date, Label::PhiTag);
        f.keep("StudyTime", &study.time);
        f.keep("SeriesTime", &study.time);
        let content_dt = format!("{}{}.{}", study.date, study.time, g.digits(3));
        if has(PhiFamily::Date) {
            f.date("SeriesDate", Some(&study.date), Label::PhiTag);
            f.date("ContentDate", Some(&study.date), Label::PhiTag);
            f.date("AcquisitionDateTime", Some(&content_dt), Label::PhiTag);
        }
        let name = |(gv, sn): (&str, &str)| format!("{}^{}", sn.to_uppercase(), gv.to_uppercase());

        if has(PhiFamily::Name) {
            f.put("PatientName", &name((p.given, p.surname)), Expect::Value(deid_core::rules::DUMMY_PERSON_NAME.into()), Label::PhiTag);
            f.put("ReferringPhysicianName", &name(study.referring), Expect::Empty, Label::Repaired);
            f.put("OperatorsName", &name(s.operator), Expect::Absent, Label::PhiTag);
            f.put("PerformingPhysicianName", &name(study.referring), Expect::Absent, Label::PhiTag);
        } else {
            f.put("PatientName", "", Expect::Empty, Label::PhiTag);
            f.put("ReferringPhysicianName", "", Expect::Empty, Label::Repaired);
        }
        if has(PhiFamily::Id) {
            f.put("PatientID", &p.id, Expect::Pseudonym, Label::PhiTag);
            f.put("OtherPatientIDs", &p.mrn, Expect::Absent, Label::PhiTag);
            f.put("AccessionNumber", &study.accession, Expect::Empty, Label::Repaired);
            f.put("StudyID", &study.study_id, Expect::Empty, Label::Repaired);
        } else {
            f.put("PatientID", "", Expect::Empty, Label::PhiTag);
            f.put("AccessionNumber", "", Expect::Empty, Label::Repaired);
            f.put("StudyID", "", Expect::Empty, Label::Repaired);
        }
        if has(PhiFamily::Date) {
            f.put("PatientBirthDate", &p.birth_date, Expect::Empty, Label::Repaired);
        } else {
            f.put("PatientBirthDate", "", Expect::Empty, Label::Repaired);
        }
        if has(PhiFamily::Location) {
            f.put("InstitutionName", &format!("{} General Hospital", p.city), Expect::Absent, Label::PhiTag);
            f.put("PatientAddress", &format!("12 Main St {}", p.city), Expect::Absent, Label::PhiTag);
        }
        if has(PhiFamily::Contact) {
            f.put("PatientTelephoneNumbers", &p.phone, Expect::Absent, Label::PhiTag);
        }
        f.keep("PatientSex", p.sex);
        f.put("PatientAge", &p.age, Expect::Unchanged, Label::Custom);
        f.put("Occupation", p.occupation, Expect::Absent, Label::Custom);
        f.put("Allergies", p.allergy, Expect::Absent, Label::Custom);
        f.put("SmokingStatus", "NO", Expect::Absent, Label::Custom);

        let inj = g.injection(p);
        f.free_text("StudyDescription", study.description, inj, "", Label::Standard);
        // "MR BREAST" is whitelisted text and never carries an injection.
        let inj = if s.description == "MR BREAST" { None } else { g.injection(p) };
        f.free_text("SeriesDescription", s.description, inj, "", Label::Standard);
        let inj = g.injection(p);
        f.free_text("ProtocolName", s.protocol, inj, "", Label::Standard);
        let inj = g.injection(p);
        let history = g.pick(HISTORY);
        f.free_text("AdditionalPatientHistory", history, inj, " today", Label::Standard);
        let inj = g.injection(p);
        let comment = g.pick(COMMENTS);
        f.free_text("ImageComments", comment, inj, "", Label::Custom);
        let inj = g.injection(p);
        f.free_text("PatientComments", "no prior studies", inj, "", Label::Custom);

        // Makes ClinicalTrialSubjectID required; the ignore list keeps the
        // validator from inserting it.
        if i % 10 == 3 {
            f.keep("ClinicalTrialSeriesID", "SERIES A");
        }

        f.keep("SeriesNumber", &s.number.to_string());
        f.keep("InstanceNumber", &(1 + i % FILES_PER_SERIES).to_string());
        f.keep("PatientOrientation", "L\\P");
        f.keep("BurnedInAnnotation", "NO");

        match m {
            Modality::Ct | Modality::Mr => {
                f.keep("ImageType", "ORIGINAL\\PRIMARY\\AXIAL");
                f.put("FrameOfReferenceUID", &s.frame_of_reference, Expect::Uid, Label::PhiTag);
                f.keep("PositionReferenceIndicator", "");
                f.keep("ImagePositionPatient", &format!("-100\\-100\\{}", 5 * (i % FILES_PER_SERIES)));
                f.keep("ImageOrientationPatient", "1\\0\\0\\0\\1\\0");
                f.keep("PixelSpacing", "0.7\\0.7");
                f.keep("SliceThickness", "5");
                f.keep("PatientPosition", "HFS");
                if m == Modality::Ct {
                    f.keep("KVP", "120");
                    f.keep("AcquisitionNumber", "1");
                    f.keep("RescaleIntercept", "-1024");
                    f.keep("RescaleSlope", "1");
                } else {
                    f.put("ScanningSequence", "SE", Expect::Unchanged, Label::Custom);
                    f.put("SequenceVariant", "SK", Expect::Unchanged, Label::Custom);
                    f.put("ScanOptions", "FS", Expect::Unchanged, Label::Custom);
                    f.put("MRAcquisitionType", "2D", Expect::Unchanged, Label::Custom);
                    f.keep("EchoTime", "90");
                    f.keep("RepetitionTime", "4000");
                }
            }
            Modality::Cr => {
                f.put("BodyPartExamined", "CHEST", Expect::Unchanged, Label::Custom);
                f.put("ViewPosition", "PA", Expect::Unchanged, Label::Custom);
                f.put("PlateID", &format!("PLATE{}", g.digits(3)), Expect::Unchanged, Label::Custom);
            }
            Modality::Sc => {
                f.put("ConversionType", "WSD", Expect::Unchanged, Label::Custom);
            }
        }
        if has(PhiFamily::Uid) {
            f.put("DeviceUID", &s.device_uid, Expect::Unchanged, Label::Custom);
            if let Some((class, inst)) = &previous {
                let (seq_tag, _) = kw("ReferencedImageSequence");
                let (c_tag, _) = kw("ReferencedSOPClassUID");
                let (i_tag, _) = kw("ReferencedSOPInstanceUID");
                let seq_path = TagPath::root(seq_tag);
                let c = DataElement::text(c_tag, Vr::UI, class);
                let u = DataElement::text(i_tag, Vr::UI, inst);
                f.entry(seq_path.child(0, c_tag), "ReferencedSOPClassUID", &c, Expect::Unchanged, Label::Standard);
                f.entry(seq_path.child(0, i_tag), "ReferencedSOPInstanceUID", &u, Expect::Uid, Label::PhiTag);
                let mut item = Item::new([c, u]);
                item.undefined_length = s.undefined_length_refs;
                let mut seq = DataElement::sequence(seq_tag, vec![item]);
                seq.undefined_length = s.undefined_length_refs;
                f.ds.set(seq);
            }
        }

        // Private blocks.
        if m != Modality::Sc {
            let creator = "gems_petd_01";
            let t = |e: u16| Tag::new(0x0009, e);
            f.creator(t(0x0010), creator, Expect::Unchanged);
            let note = format!("{}^{} recon", p.surname.to_uppercase(), p.given.to_uppercase());
            f.private(t(0x1001), Vr::LO, text_bytes(Vr::LO, &note), creator, Expect::Absent);
            f.private(t(0x1002), Vr::LO, text_bytes(Vr::LO, "PETD_SCAN"), creator, Expect::Unchanged);
            if has(PhiFamily::Date) {
                let v = shift_value(Vr::DA, &study.date, spec.date_offset);
                f.private(t(0x100D), Vr::DA, text_bytes(Vr::DA, &study.date), creator, Expect::Value(v));
            }
            if has(PhiFamily::Uid) {
                f.private(t(0x1006), Vr::UI, text_bytes(Vr::UI, &study.uid), creator, Expect::Uid);
            }
            let sl: i32 = g.rng.gen_range(-50_000..50_000);
            f.private(t(0x102B), Vr::SL, sl.to_le_bytes().to_vec(), creator, Expect::Unchanged);
            f.private(t(0x1036), Vr::LO, text_bytes(Vr::LO, "reader note"), creator, Expect::Empty);
            f.private(t(0x1042), Vr::FL, 1.5f32.to_le_bytes().to_vec(), creator, Expect::Unchanged);

            let acme = "ACME_RESEARCH_1";
            let a = |e: u16| Tag::new(0x0011, e);
            f.creator(a(0x0010), acme, Expect::Absent);
            f.private(a(0x1001), Vr::LO, text_bytes(Vr::LO, "trial arm B"), acme, Expect::Absent);
            f.private(a(0x1002), Vr::SL, 7i32.to_le_bytes().to_vec(), acme, Expect::Absent);
        }
        if m == Modality::Mr {
            let sie = "SIEMENS MR HEADER";
            let t = |e: u16| Tag::new(0x0019, e);
            f.creator(t(0x0010), sie, Expect::Unchanged);
            f.private(t(0x1008), Vr::CS, text_bytes(Vr::CS, "IMAGE NUM 4"), sie, Expect::Unchanged);
            f.private(t(0x100B), Vr::DS, text_bytes(Vr::DS, "3500"), sie, Expect::Unchanged);
        }

        // Image pixel module.
        let multiframe = matches!(m, Modality::Ct | Modality::Mr) && g.rng.gen_bool(spec.multiframe_rate);
        let n_frames = if multiframe { 2 } else { 1 };
        let burned: Vec<String> = if g.rng.gen_bool(spec.pixel_text_rate) {
            let mut v = Vec::new();
            if has(PhiFamily::Name) {
                v.push(format!("{}^{}", p.surname.to_uppercase(), p.given.to_uppercase()));
            }
            if has(PhiFamily::Id) {
                v.push(p.mrn.clone());
            }
            if has(PhiFamily::Date) {
                v.push(format!("{}/{}/{}", &study.date[4..6], &study.date[6..8], &study.date[..4]));
            }
            v
        } else {
            Vec::new()
        };
        let px = g.pixels(m, n_frames, burned);
        f.keep_u16("SamplesPerPixel", px.spp);
        f.keep("PhotometricInterpretation", if px.spp == 3 { "RGB" } else { "MONOCHROME2" });
        if px.spp == 3 {
            f.keep_u16("PlanarConfiguration", 0);
        }
        if multiframe {
            f.keep("NumberOfFrames", &n_frames.to_string());
        }
        f.keep_u16("Rows", IMAGE_SIZE as u16);
        f.keep_u16("Columns", IMAGE_SIZE as u16);
        f.keep_u16("BitsAllocated", px.bits);
        f.keep_u16("BitsStored", if px.bits == 16 { 12 } else { 8 });
        f.keep_u16("HighBit", if px.bits == 16 { 11 } else { 7 });
        f.keep_u16("PixelRepresentation", 0);
        let data: Vec<u8> = px.frames.iter().flat_map(|fr| fr.pixels.iter().copied()).collect();
        f.ds.set(DataElement::new(tags::PIXEL_DATA, if px.bits == 16 { Vr::OW } else { Vr::OB }, data));

        let mut frame_keys = Vec::new();
        for k in 0..n_frames {
            let wire: Vec<WireBox> = px
                .boxes
                .iter()
                .map(|b| WireBox { x0: b.x0 as i64, y0: b.y0 as i64, x1: b.x1 as i64, y1: b.y1 as i64, text: b.text.clone(), score: 0.9 })
                .collect();
            detections.push(DetectionRecord { file: path.clone(), frame: k, boxes: wire });
            if !px.boxes.is_empty() {
                frame_keys.push(FrameKey { frame: k, boxes: px.boxes.clone() });
            }
        }

        let bytes = serialize_file(&f.ds).map_err(|e| EvalError::Format(format!("{path}: {e}")))?;
        previous = Some((m.sop_class().to_string(), sop_uid));
        files.push((path.clone(), bytes));
        keys.push(FileKey { path, entries: f.entries, frames: frame_keys });
    }

    Ok(Corpus { files, key: AnswerKey { seed: spec.seed, date_offset: spec.date_offset, files: keys }, detections })
}

/// Write files under `files_dir`, the key as JSON and detections as JSON
/// lines.
pub fn write_corpus(corpus: &Corpus, files_dir: &Path, key_path: &Path, detections_path: &Path) -> Result<(), EvalError> {
    for (rel, bytes) in &corpus.files {
        let p = files_dir.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
        }
        std::fs::write(&p, bytes).map_err(|e| EvalError::io(&p, e))?;
    }
    corpus.key.save(key_path)?;
    let mut lines = String::new();
    for d in &corpus.detections {
        lines.push_str(&serde_json::to_string(d).expect("record serializes"));
        lines.push('\n');
    }
    std::fs::write(detections_path, lines).map_err(|e| EvalError::io(detections_path, e))
}
