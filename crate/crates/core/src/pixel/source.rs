use std::collections::HashMap;
use std::io::{BufRead, BufReader, Cursor};
use std::path::Path;
use std::time::Duration;

use base64::Engine;
use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};
use serde::{Deserialize, Serialize};

use super::{Frame, PixelError, TextBox};

/// Where text boxes for a frame come from.
pub trait TextSource: Send + Sync {
    fn detect_text(&self, file: &str, frame_index: usize, frame: &Frame) -> Result<Vec<TextBox>, PixelError>;
}

/// Reports no text anywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoText;

impl TextSource for NoText {
    fn detect_text(&self, _: &str, _: usize, _: &Frame) -> Result<Vec<TextBox>, PixelError> {
        Ok(Vec::new())
    }
}

/// Box as it appears on the wire and in detection files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireBox {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
    #[serde(default)]
    pub text: String,
    #[serde(default = "one")]
    pub score: f64,
}

fn one() -> f64 {
    1.0
}

impl From<&TextBox> for WireBox {
    fn from(b: &TextBox) -> Self {
        WireBox { x0: b.x0 as i64, y0: b.y0 as i64, x1: b.x1 as i64, y1: b.y1 as i64, text: b.text.clone(), score: b.confidence }
    }
}

impl WireBox {
    fn exact(&self) -> Option<TextBox> {
        let ok = [self.x0, self.y0, self.x1, self.y1].iter().all(|v| (0..=u32::MAX as i64).contains(v));
        ok.then(|| TextBox::new(self.x0 as u32, self.y0 as u32, self.x1 as u32, self.y1 as u32, &self.text, self.score))
    }

    /// Clip to the frame; `None` when nothing is left.
    fn clamped(&self, frame: &Frame) -> Option<TextBox> {
        let cx = |v: i64| v.clamp(0, frame.cols as i64) as u32;
        let cy = |v: i64| v.clamp(0, frame.rows as i64) as u32;
        let b = TextBox::new(cx(self.x0), cy(self.y0), cx(self.x1), cy(self.y1), &self.text, self.score);
        (b.x0 < b.x1 && b.y0 < b.y1).then_some(b)
    }
}

/// One line of a detections file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub file: String,
    pub frame: usize,
    pub boxes: Vec<WireBox>,
}

/// Pre-computed OCR output, one JSON object per line.
#[derive(Debug, Clone, Default)]
pub struct DetectionsFile {
    records: HashMap<(String, usize), Vec<WireBox>>,
    /// Missing entries are an error instead of "no text".
    pub strict: bool,
}

impl DetectionsFile {
    pub fn parse(text: &str, strict: bool) -> Result<Self, PixelError> {
        Self::from_reader(Cursor::new(text), strict)
    }

    pub fn load(path: &Path, strict: bool) -> Result<Self, PixelError> {
        let f = std::fs::File::open(path).map_err(|e| PixelError::DetectionsFile(format!("{}: {e}", path.display())))?;
        Self::from_reader(BufReader::new(f), strict)
    }

    fn from_reader(r: impl BufRead, strict: bool) -> Result<Self, PixelError> {
        let mut records: HashMap<(String, usize), Vec<WireBox>> = HashMap::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| PixelError::DetectionsFile(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DetectionRecord =
                serde_json::from_str(&line).map_err(|e| PixelError::DetectionsFile(format!("line {}: {e}", n + 1)))?;
            records.entry((normalize(&rec.file), rec.frame)).or_default().extend(rec.boxes);
        }
        Ok(DetectionsFile { records, strict })
    }

    pub fn from_records(records: impl IntoIterator<Item = DetectionRecord>, strict: bool) -> Self {
        let mut map: HashMap<(String, usize), Vec<WireBox>> = HashMap::new();
        for r in records {
            map.entry((normalize(&r.file), r.frame)).or_default().extend(r.boxes);
        }
        DetectionsFile { records: map, strict }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn normalize(p: &str) -> String {
    p.replace('\\', "/")
}

impl TextSource for DetectionsFile {
    fn detect_text(&self, file: &str, frame_index: usize, frame: &Frame) -> Result<Vec<TextBox>, PixelError> {
        match self.records.get(&(normalize(file), frame_index)) {
            None if self.strict => Err(PixelError::MissingDetections(format!("{file} frame {frame_index}"))),
            None => Ok(Vec::new()),
            Some(boxes) => boxes
                .iter()
                .map(|w| match w.exact() {
                    Some(b) if b.fits(frame) => Ok(b),
                    Some(b) => Err(PixelError::InvalidBox(b, frame.cols, frame.rows)),
                    None => Err(PixelError::InvalidBox(TextBox::new(0, 0, 0, 0, &w.text, w.score), frame.cols, frame.rows)),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct OcrRequest<'a> {
    image: String,
    frame_id: &'a str,
}

#[derive(Deserialize)]
struct OcrResponse {
    boxes: Vec<WireBox>,
}

/// Client for an OCR service answering `POST {base}/ocr`.
#[derive(Debug, Clone)]
pub struct RemoteOcr {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl RemoteOcr {
    pub fn new(base_url: &str) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("HTTP client");
        RemoteOcr { endpoint: format!("{}/ocr", base_url.trim_end_matches('/')), client }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

/// PNG encoding of a frame. 16-bit gray stays 16-bit; colour is 8-bit RGB.
pub fn frame_to_png(frame: &Frame) -> Result<Vec<u8>, PixelError> {
    let (w, h) = (frame.cols, frame.rows);
    let bad = || PixelError::InconsistentDimensions(format!("{h}x{w} frame cannot be encoded"));
    let img = match (frame.samples_per_pixel, frame.bits_allocated) {
        (1, 8) => DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, frame.pixels.clone()).ok_or_else(bad)?),
        (1, _) => {
            let px: Vec<u16> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| frame.get(x, y, 0)).collect();
            DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, px).ok_or_else(bad)?)
        }
        _ => {
            let shift = if frame.bits_allocated > 8 { 8 } else { 0 };
            let px: Vec<u8> = (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .flat_map(|(x, y)| (0..3).map(move |s| (frame.get(x, y, s) >> shift) as u8))
                .collect();
            DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, px).ok_or_else(bad)?)
        }
    };
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).map_err(|e| PixelError::BadResponse(format!("PNG encoding: {e}")))?;
    Ok(out.into_inner())
}

impl TextSource for RemoteOcr {
    fn detect_text(&self, file: &str, frame_index: usize, frame: &Frame) -> Result<Vec<TextBox>, PixelError> {
        let png = frame_to_png(frame)?;
        let frame_id = format!("{file}#{frame_index}");
        let body = OcrRequest { image: base64::engine::general_purpose::STANDARD.encode(png), frame_id: &frame_id };
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()
            .map_err(|e| PixelError::RemoteUnavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(PixelError::RemoteUnavailable(format!("status {}", resp.status())));
        }
        let parsed: OcrResponse = resp.json().map_err(|e| PixelError::BadResponse(e.to_string()))?;
        Ok(parsed.boxes.iter().filter_map(|b| b.clamped(frame)).collect())
    }
}
