//! Deterministic pseudonyms for UIDs and patient IDs, plus date shifting.
//!
//! Replacements are derived from a keyed hash of the original, so the maps
//! here are only caches: any number of workers can race on the same input
//! and they all compute the same value.

use std::collections::{BTreeMap, HashSet};
use std::io;
use std::path::Path;
use std::sync::RwLock;

use chrono::{Datelike, Days, NaiveDate};
use hmac::{Hmac, Mac};
use rand::RngCore;
use sha2::Sha256;

pub const DEFAULT_DATE_OFFSET_DAYS: i64 = 120;
const UID_ROOT: &str = "2.25.";
const MAX_UID_LEN: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum IdentityError {
    #[error("invalid UID {0:?}")]
    InvalidUid(String),
    #[error("empty patient ID")]
    EmptyId,
    #[error("unparseable date {0:?}")]
    UnparseableDate(String),
    #[error("mapping file: {0}")]
    Io(#[from] io::Error),
    #[error("mapping file: {0}")]
    Csv(#[from] csv::Error),
    #[error("mapping file row {row}: unknown kind {kind:?}")]
    UnknownKind { row: usize, kind: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MappingKind {
    PatientId,
    Uid,
}

impl MappingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MappingKind::PatientId => "patient_id",
            MappingKind::Uid => "uid",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "patient_id" => Some(MappingKind::PatientId),
            "uid" => Some(MappingKind::Uid),
            _ => None,
        }
    }
}

#[derive(Debug, Default)]
struct Cache {
    forward: BTreeMap<String, String>,
    outputs: HashSet<String>,
}

impl Cache {
    fn lookup(&self, key: &str) -> Option<String> {
        if let Some(v) = self.forward.get(key) {
            return Some(v.clone());
        }
        self.outputs.contains(key).then(|| key.to_string())
    }

    fn insert(&mut self, key: String, value: String) {
        self.outputs.insert(value.clone());
        self.forward.insert(key, value);
    }
}

/// Shared pseudonym store. `&self` methods are safe to call from many
/// threads at once.
#[derive(Debug)]
pub struct IdentityStore {
    salt: Vec<u8>,
    date_offset_days: i64,
    uids: RwLock<Cache>,
    ids: RwLock<Cache>,
}

impl IdentityStore {
    pub fn new(salt: impl Into<Vec<u8>>, date_offset_days: i64) -> Self {
        IdentityStore {
            salt: salt.into(),
            date_offset_days,
            uids: RwLock::default(),
            ids: RwLock::default(),
        }
    }

    /// Store with a fresh 32-byte random salt.
    pub fn with_random_salt(date_offset_days: i64) -> Self {
        let mut salt = vec![0u8; 32];
        rand::thread_rng().fill_bytes(&mut salt);
        Self::new(salt, date_offset_days)
    }

    pub fn salt(&self) -> &[u8] {
        &self.salt
    }

    pub fn date_offset_days(&self) -> i64 {
        self.date_offset_days
    }

    fn mac(&self, domain: &str, value: &str) -> [u8; 32] {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.salt).expect("hmac accepts any key length");
        mac.update(domain.as_bytes());
        mac.update(&[0]);
        mac.update(value.as_bytes());
        mac.finalize().into_bytes().into()
    }

    /// Replacement UID under the `2.25` root. Previously issued outputs map
    /// to themselves, so remapping is idempotent.
    pub fn remap_uid(&self, uid: &str) -> Result<String, IdentityError> {
        if !is_valid_uid_syntax(uid) {
            return Err(IdentityError::InvalidUid(uid.to_string()));
        }
        if let Some(hit) = self.uids.read().unwrap().lookup(uid) {
            return Ok(hit);
        }
        let digest = self.mac("uid", uid);
        let n = u128::from_be_bytes(digest[..16].try_into().unwrap());
        let mut out = format!("{UID_ROOT}{n}");
        out.truncate(MAX_UID_LEN);
        self.uids.write().unwrap().insert(uid.to_string(), out.clone());
        Ok(out)
    }

    /// `PSN-` followed by 12 hex digits of the keyed hash.
    pub fn remap_patient_id(&self, id: &str) -> Result<String, IdentityError> {
        if id.is_empty() {
            return Err(IdentityError::EmptyId);
        }
        if let Some(hit) = self.ids.read().unwrap().lookup(id) {
            return Ok(hit);
        }
        let digest = self.mac("pid", id);
        let out = format!("PSN-{}", hex::encode(&digest[..6]));
        self.ids.write().unwrap().insert(id.to_string(), out.clone());
        Ok(out)
    }

    /// Shift with the store's configured offset.
    pub fn shift(&self, value: &str, kind: DateKind) -> Result<String, IdentityError> {
        shift_date(value, kind, self.date_offset_days)
    }

    /// All cached mappings, sorted by (kind, original).
    pub fn mappings(&self) -> Vec<(MappingKind, String, String)> {
        let mut rows = Vec::new();
        for (k, v) in &self.ids.read().unwrap().forward {
            rows.push((MappingKind::PatientId, k.clone(), v.clone()));
        }
        for (k, v) in &self.uids.read().unwrap().forward {
            rows.push((MappingKind::Uid, k.clone(), v.clone()));
        }
        rows.sort();
        rows
    }

    pub fn write_mappings<W: io::Write>(&self, w: W) -> Result<(), IdentityError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kind", "original", "replacement"])?;
        for (kind, original, replacement) in self.mappings() {
            out.write_record([kind.as_str(), &original, &replacement])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn export_mappings(&self, path: &Path) -> Result<(), IdentityError> {
        let f = std::fs::File::create(path)?;
        self.write_mappings(io::BufWriter::new(f))
    }

    /// Load rows written by [`export_mappings`](Self::export_mappings). Loaded
    /// entries take precedence over derivation.
    pub fn import_mappings(&self, path: &Path) -> Result<usize, IdentityError> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut n = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let (kind, original, replacement) = (&rec[0], &rec[1], &rec[2]);
            let kind = MappingKind::parse(kind).ok_or_else(|| IdentityError::UnknownKind {
                row: i + 2,
                kind: kind.to_string(),
            })?;
            let cache = match kind {
                MappingKind::PatientId => &self.ids,
                MappingKind::Uid => &self.uids,
            };
            cache.write().unwrap().insert(original.to_string(), replacement.to_string());
            n += 1;
        }
        Ok(n)
    }
}

/// Digits and dots, no empty components, at most 64 characters.
pub fn is_valid_uid_syntax(uid: &str) -> bool {
    !uid.is_empty()
        && uid.len() <= MAX_UID_LEN
        && uid.split('.').all(|c| !c.is_empty() && c.bytes().all(|b| b.is_ascii_digit()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DateKind {
    /// `YYYYMMDD`, or truncated to `YYYY` / `YYYYMM`.
    Da,
    /// Date part shifted; time and offset suffix preserved.
    Dt,
    /// No date component, returned unchanged.
    Tm,
}

/// Shift a single DICOM date value by whole days.
pub fn shift_date(value: &str, kind: DateKind, offset_days: i64) -> Result<String, IdentityError> {
    let bad = || IdentityError::UnparseableDate(value.to_string());
    match kind {
        DateKind::Tm => {
            if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit() || b == b'.' || b == b':') {
                return Err(bad());
            }
            Ok(value.to_string())
        }
        DateKind::Da => {
            if !value.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            shift_date_digits(value, offset_days).ok_or_else(bad)
        }
        DateKind::Dt => {
            let digits = value.bytes().take_while(u8::is_ascii_digit).count();
            let date_len = digits.min(8);
            let (date, rest) = value.split_at(date_len);
            let shifted = shift_date_digits(date, offset_days).ok_or_else(bad)?;
            Ok(shifted + rest)
        }
    }
}

fn shift_date_digits(date: &str, offset_days: i64) -> Option<String> {
    let len = date.len();
    if !matches!(len, 4 | 6 | 8) {
        return None;
    }
    let year: i32 = date[..4].parse().ok()?;
    let month: u32 = if len >= 6 { date[4..6].parse().ok()? } else { 1 };
    let day: u32 = if len == 8 { date[6..8].parse().ok()? } else { 1 };
    let d = NaiveDate::from_ymd_opt(year, month, day)?;
    let shifted = if offset_days >= 0 {
        d.checked_add_days(Days::new(offset_days as u64))?
    } else {
        d.checked_sub_days(Days::new(offset_days.unsigned_abs()))?
    };
    if !(0..=9999).contains(&shifted.year()) {
        return None;
    }
    let full = format!("{:04}{:02}{:02}", shifted.year(), shifted.month(), shifted.day());
    Some(full[..len].to_string())
}
