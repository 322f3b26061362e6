use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{merge_spans, Category, DetectError, EntitySpan, PhiDetector};

pub const DEFAULT_REMOTE_THRESHOLD: f64 = 0.5;

/// Client for a `POST /detect` entity service.
///
/// Labels follow the i2b2 de-identification set, optionally with BIO/BILOU
/// prefixes (`B-PATIENT`, `U-DATE`, ...):
///
/// | label | category |
/// |---|---|
/// | PATIENT, STAFF, DOCTOR, USERNAME, NAME | NAME |
/// | HOSP, HOSPITAL, LOC, LOCATION, PATORG, ORGANIZATION, CITY, STATE, STREET, ZIP, COUNTRY | LOCATION |
/// | ID, MEDICALRECORD, IDNUM, DEVICE, BIOID, HEALTHPLAN | ID |
/// | PHONE, FAX, EMAIL, URL, CONTACT | CONTACT |
/// | AGE | AGE |
/// | DATE | DATE |
/// | OTHERPHI, PROFESSION, anything else | OTHER |
#[derive(Debug, Clone)]
pub struct RemoteDetector {
    endpoint: String,
    threshold: f64,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct DetectRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct DetectResponse {
    entities: Vec<RemoteEntity>,
}

#[derive(Deserialize)]
struct RemoteEntity {
    start: usize,
    end: usize,
    label: String,
    score: f64,
}

pub fn map_remote_label(label: &str) -> Category {
    let bare = match label.split_once('-') {
        Some((p, rest)) if matches!(p, "B" | "I" | "L" | "U" | "E" | "S") => rest,
        _ => label,
    };
    match bare.to_ascii_uppercase().as_str() {
        "PATIENT" | "STAFF" | "DOCTOR" | "USERNAME" | "NAME" => Category::Name,
        "HOSP" | "HOSPITAL" | "LOC" | "LOCATION" | "PATORG" | "ORGANIZATION" | "CITY" | "STATE" | "STREET"
        | "ZIP" | "COUNTRY" => Category::Location,
        "ID" | "MEDICALRECORD" | "IDNUM" | "DEVICE" | "BIOID" | "HEALTHPLAN" => Category::Id,
        "PHONE" | "FAX" | "EMAIL" | "URL" | "CONTACT" => Category::Contact,
        "AGE" => Category::Age,
        "DATE" => Category::Date,
        _ => Category::Other,
    }
}

impl RemoteDetector {
    /// `base_url` is the service root; requests go to `{base_url}/detect`.
    pub fn new(base_url: &str) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .pool_max_idle_per_host(8)
            .build()
            .expect("http client");
        RemoteDetector {
            endpoint: format!("{}/detect", base_url.trim_end_matches('/')),
            threshold: DEFAULT_REMOTE_THRESHOLD,
            client,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl PhiDetector for RemoteDetector {
    fn detect_entities(&self, text: &str) -> Result<Vec<EntitySpan>, DetectError> {
        if text.is_empty() {
            return Ok(Vec::new());
        }
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&DetectRequest { text })
            .send()
            .map_err(|e| DetectError::RemoteUnavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(DetectError::RemoteUnavailable(format!("HTTP {}", resp.status())));
        }
        let body: DetectResponse = resp.json().map_err(|e| DetectError::BadResponse(e.to_string()))?;
        let n = text.chars().count();
        let mut spans = Vec::with_capacity(body.entities.len());
        for e in body.entities {
            if e.start >= e.end || e.end > n {
                return Err(DetectError::BadResponse(format!("span {}..{} outside text of {n} chars", e.start, e.end)));
            }
            if e.score < self.threshold {
                continue;
            }
            spans.push(EntitySpan::new(text, e.start, e.end, map_remote_label(&e.label), e.score.clamp(0.0, 1.0)));
        }
        Ok(merge_spans(text, spans))
    }
}
