//! Burned-in text: find text boxes in each frame, check their text for PHI,
//! and paint over the ones that contain it.

mod source;

use std::collections::HashSet;

use dcm_codec::{tags, DataSet, TransferSyntax, Vr};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::phi::{detect_filtered, PhiDetector, Whitelist};

pub use source::{DetectionRecord, DetectionsFile, NoText, RemoteOcr, TextSource, WireBox};

pub const DEFAULT_OCR_THRESHOLD: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum PixelError {
    #[error("pixel data uses compressed transfer syntax {0}")]
    CompressedPixelData(String),
    #[error("inconsistent image dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("text box {0:?} outside a {1}x{2} frame")]
    InvalidBox(TextBox, u32, u32),
    #[error("no recorded detections for {0}")]
    MissingDetections(String),
    #[error("OCR service unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("OCR service returned an invalid response: {0}")]
    BadResponse(String),
    #[error("detections file: {0}")]
    DetectionsFile(String),
    #[error("PHI check failed: {0}")]
    PhiCheck(String),
}

/// One decoded frame. `pixels` holds little-endian samples, row-major, with
/// colour samples interleaved (planar configuration 0) or in planes (1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub rows: u32,
    pub cols: u32,
    pub bits_allocated: u16,
    pub samples_per_pixel: u16,
    pub planar: bool,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(rows: u32, cols: u32, bits_allocated: u16, samples_per_pixel: u16, pixels: Vec<u8>) -> Self {
        Frame { rows, cols, bits_allocated, samples_per_pixel, planar: false, pixels }
    }

    /// Byte length implied by the dimensions.
    pub fn expected_len(&self) -> usize {
        self.rows as usize * self.cols as usize * (self.bits_allocated as usize / 8) * self.samples_per_pixel as usize
    }

    fn bytes_per_sample(&self) -> usize {
        self.bits_allocated as usize / 8
    }

    fn offset(&self, x: u32, y: u32, s: u16) -> usize {
        let (x, y, s) = (x as usize, y as usize, s as usize);
        let n = self.rows as usize * self.cols as usize;
        let spp = self.samples_per_pixel as usize;
        let idx = if self.planar { s * n + y * self.cols as usize + x } else { (y * self.cols as usize + x) * spp + s };
        idx * self.bytes_per_sample()
    }

    pub fn get(&self, x: u32, y: u32, s: u16) -> u16 {
        let o = self.offset(x, y, s);
        match self.bytes_per_sample() {
            1 => self.pixels[o] as u16,
            _ => u16::from_le_bytes([self.pixels[o], self.pixels[o + 1]]),
        }
    }

    pub fn set(&mut self, x: u32, y: u32, s: u16, v: u16) {
        let o = self.offset(x, y, s);
        match self.bytes_per_sample() {
            1 => self.pixels[o] = v as u8,
            _ => self.pixels[o..o + 2].copy_from_slice(&v.to_le_bytes()),
        }
    }
}

/// Axis-aligned text region, half-open pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub text: String,
    #[serde(rename = "score")]
    pub confidence: f64,
}

impl TextBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32, text: &str, confidence: f64) -> Self {
        TextBox { x0, y0, x1, y1, text: text.to_string(), confidence }
    }

    pub fn fits(&self, frame: &Frame) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1 && self.x1 <= frame.cols && self.y1 <= frame.rows
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn area(&self) -> u64 {
        (self.x1 - self.x0) as u64 * (self.y1 - self.y0) as u64
    }
}

fn check_transfer_syntax(ds: &DataSet) -> Result<(), PixelError> {
    if let Some(uid) = ds.text(tags::TRANSFER_SYNTAX_UID) {
        if TransferSyntax::from_uid(&uid).is_none() {
            return Err(PixelError::CompressedPixelData(uid));
        }
    }
    Ok(())
}

/// Decode every frame of an uncompressed image. Returns an empty list when
/// there is no PixelData.
pub fn extract_frames(ds: &DataSet) -> Result<Vec<Frame>, PixelError> {
    check_transfer_syntax(ds)?;
    let Some(pd) = ds.get(tags::PIXEL_DATA) else { return Ok(Vec::new()) };
    let bad = |m: String| PixelError::InconsistentDimensions(m);
    let bytes = pd.bytes().ok_or_else(|| bad("PixelData is a sequence".into()))?;
    let rows = ds.int(tags::ROWS).ok_or_else(|| bad("missing Rows".into()))?;
    let cols = ds.int(tags::COLUMNS).ok_or_else(|| bad("missing Columns".into()))?;
    let bits = ds.int(tags::BITS_ALLOCATED).ok_or_else(|| bad("missing BitsAllocated".into()))?;
    let spp = ds.int(tags::SAMPLES_PER_PIXEL).unwrap_or(1);
    let planar = ds.int(tags::PLANAR_CONFIGURATION).unwrap_or(0) == 1;
    let n_frames = ds.int(tags::NUMBER_OF_FRAMES).unwrap_or(1);
    if rows <= 0 || cols <= 0 || rows > u16::MAX as i64 || cols > u16::MAX as i64 {
        return Err(bad(format!("{rows}x{cols}")));
    }
    if bits != 8 && bits != 16 {
        return Err(bad(format!("BitsAllocated {bits}")));
    }
    if spp != 1 && spp != 3 {
        return Err(bad(format!("SamplesPerPixel {spp}")));
    }
    if n_frames < 1 {
        return Err(bad(format!("NumberOfFrames {n_frames}")));
    }
    let proto = Frame {
        rows: rows as u32,
        cols: cols as u32,
        bits_allocated: bits as u16,
        samples_per_pixel: spp as u16,
        planar,
        pixels: Vec::new(),
    };
    let size = proto.expected_len();
    let need = size * n_frames as usize;
    // One trailing pad byte is allowed for odd totals.
    if bytes.len() != need && bytes.len() != need + (need % 2) {
        return Err(bad(format!("{} pixel bytes, expected {need}", bytes.len())));
    }
    Ok(bytes[..need].chunks(size).map(|c| Frame { pixels: c.to_vec(), ..proto.clone() }).collect())
}

/// Write frames back into PixelData, keeping any trailing pad byte.
pub fn write_frames(ds: &mut DataSet, frames: &[Frame]) {
    let Some(pd) = ds.get_mut(tags::PIXEL_DATA) else { return };
    if let dcm_codec::Value::Bytes(b) = &mut pd.value {
        let mut off = 0;
        for f in frames {
            b[off..off + f.pixels.len()].copy_from_slice(&f.pixels);
            off += f.pixels.len();
        }
    }
    debug_assert!(matches!(pd.vr, Vr::OW | Vr::OB | Vr::UN));
}

/// First pixel outside every box, walking from `(x, y)` by `(dx, dy)`.
fn walk_clear(boxes: &[&TextBox], frame: &Frame, mut x: i64, mut y: i64, dx: i64, dy: i64) -> Option<(u32, u32)> {
    while x >= 0 && y >= 0 && x < frame.cols as i64 && y < frame.rows as i64 {
        if !boxes.iter().any(|b| b.contains(x as u32, y as u32)) {
            return Some((x as u32, y as u32));
        }
        x += dx;
        y += dy;
    }
    None
}

/// Fill each box with the colour of a neighbouring pixel: left of the
/// top-left corner, else right of the top-right corner, else above the
/// top-left corner, else zero. A neighbour that falls inside another box is
/// skipped by continuing in the same direction, so the sample always comes
/// from untouched pixels and re-applying the same boxes changes nothing.
pub fn redact_boxes(frame: &mut Frame, boxes: &[TextBox]) {
    let valid: Vec<&TextBox> = boxes.iter().filter(|b| b.fits(frame)).collect();
    let fills: Vec<Vec<u16>> = valid
        .iter()
        .map(|b| {
            let at = walk_clear(&valid, frame, b.x0 as i64 - 1, b.y0 as i64, -1, 0)
                .or_else(|| walk_clear(&valid, frame, b.x1 as i64, b.y0 as i64, 1, 0))
                .or_else(|| walk_clear(&valid, frame, b.x0 as i64, b.y0 as i64 - 1, 0, -1));
            (0..frame.samples_per_pixel).map(|s| at.map_or(0, |(x, y)| frame.get(x, y, s))).collect()
        })
        .collect();
    for (b, fill) in valid.iter().zip(fills) {
        for y in b.y0..b.y1 {
            for x in b.x0..b.x1 {
                for (s, v) in fill.iter().enumerate() {
                    frame.set(x, y, s as u16, *v);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageDeidConfig {
    /// Boxes scored below this are ignored.
    pub confidence_threshold: f64,
    /// Redact every box when the PHI check itself fails.
    pub fail_safe_all: bool,
}

impl Default for ImageDeidConfig {
    fn default() -> Self {
        ImageDeidConfig { confidence_threshold: DEFAULT_OCR_THRESHOLD, fail_safe_all: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRow {
    pub frame: usize,
    pub rect: [u32; 4],
    pub text_hash: String,
    pub redacted: bool,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub frames: usize,
    pub boxes: Vec<BoxRow>,
    pub note: Option<String>,
}

impl ImageReport {
    pub fn redacted(&self) -> usize {
        self.boxes.iter().filter(|b| b.redacted).count()
    }
}

fn text_hash(t: &str) -> String {
    hex::encode(&Sha256::digest(t.as_bytes())[..8])
}

fn process_frame(
    file: &str,
    index: usize,
    mut frame: Frame,
    source: &dyn TextSource,
    detector: &dyn PhiDetector,
    whitelist: Option<&Whitelist>,
    cfg: &ImageDeidConfig,
) -> Result<(Frame, Vec<BoxRow>), PixelError> {
    let boxes = source.detect_text(file, index, &frame)?;
    let mut rows = Vec::with_capacity(boxes.len());
    let mut chosen = Vec::new();
    for b in boxes {
        if let Some(bad) = (!b.fits(&frame)).then(|| b.clone()) {
            return Err(PixelError::InvalidBox(bad, frame.cols, frame.rows));
        }
        let (redact, reason) = if b.confidence < cfg.confidence_threshold {
            (false, "below-threshold".to_string())
        } else {
            match detect_filtered(detector, whitelist, &b.text) {
                Ok(spans) if spans.is_empty() => (false, "no-phi".to_string()),
                Ok(_) => (true, "phi".to_string()),
                Err(e) if cfg.fail_safe_all => (true, format!("fail-safe: {e}")),
                Err(e) => return Err(PixelError::PhiCheck(e.to_string())),
            }
        };
        rows.push(BoxRow { frame: index, rect: [b.x0, b.y0, b.x1, b.y1], text_hash: text_hash(&b.text), redacted: redact, reason });
        if redact {
            chosen.push(b);
        }
    }
    redact_boxes(&mut frame, &chosen);
    Ok((frame, rows))
}

/// Detect, check and redact every frame of `ds`. `file` is the key used to
/// look up recorded detections (the path relative to the input root).
pub fn deidentify_image(
    ds: &DataSet,
    file: &str,
    source: &dyn TextSource,
    detector: &dyn PhiDetector,
    whitelist: Option<&Whitelist>,
    cfg: &ImageDeidConfig,
) -> Result<(DataSet, ImageReport), PixelError> {
    let frames = extract_frames(ds)?;
    if frames.is_empty() {
        return Ok((ds.clone(), ImageReport { note: Some("no pixel data".into()), ..Default::default() }));
    }
    let n = frames.len();
    let indexed: Vec<(usize, Frame)> = frames.into_iter().enumerate().collect();
    let results = crate::parallel::map(indexed, |(i, f)| process_frame(file, i, f, source, detector, whitelist, cfg));
    let mut out_frames = Vec::with_capacity(n);
    let mut rows = Vec::new();
    for r in results {
        let (f, mut b) = r?;
        out_frames.push(f);
        rows.append(&mut b);
    }
    let mut out = ds.clone();
    if rows.iter().any(|r| r.redacted) {
        write_frames(&mut out, &out_frames);
    }
    Ok((out, ImageReport { frames: n, boxes: rows, note: None }))
}

/// Every pixel covered by at least one of `boxes`.
pub fn covered_pixels(boxes: &[TextBox]) -> HashSet<(u32, u32)> {
    let mut set = HashSet::new();
    for b in boxes {
        for y in b.y0..b.y1 {
            for x in b.x0..b.x1 {
                set.insert((x, y));
            }
        }
    }
    set
}
