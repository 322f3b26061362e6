#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use dcm_codec::{tags, DataElement, DataSet, Item, Tag, TransferSyntax, Vr};
use deid_core::phi::{DetectError, EntitySpan, PhiDetector};

pub const CT_IMAGE_STORAGE: &str = "1.2.840.10008.5.1.4.1.1.2";

pub fn t(g: u16, e: u16) -> Tag {
    Tag::new(g, e)
}

pub fn kw(keyword: &str) -> Tag {
    dcm_codec::dictionary::by_keyword(keyword).unwrap_or_else(|| panic!("{keyword}")).tag
}

pub fn txt(keyword: &str, value: &str) -> DataElement {
    let e = dcm_codec::dictionary::by_keyword(keyword).unwrap_or_else(|| panic!("{keyword}"));
    DataElement::text(e.tag, e.vr, value)
}

/// CT header with PHI in the usual places, one nested sequence, a GE private
/// block and an 8x8 8-bit image.
pub fn ct_dataset() -> DataSet {
    let mut ds = DataSet::new(TransferSyntax::ExplicitVrLittleEndian);
    ds.set(DataElement::text(tags::MEDIA_STORAGE_SOP_CLASS_UID, Vr::UI, CT_IMAGE_STORAGE));
    ds.set(DataElement::text(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, Vr::UI, "1.2.3.4.5.6.7"));
    for (k, v) in [
        ("SpecificCharacterSet", "ISO_IR 100"),
        ("ImageType", "ORIGINAL\\PRIMARY\\AXIAL"),
        ("SOPClassUID", CT_IMAGE_STORAGE),
        ("SOPInstanceUID", "1.2.3.4.5.6.7"),
        ("StudyDate", "20200314"),
        ("StudyTime", "101500"),
        ("AccessionNumber", "ACC123456"),
        ("Modality", "CT"),
        ("Manufacturer", "GE MEDICAL SYSTEMS"),
        ("InstitutionName", "Boston General Hospital"),
        ("ReferringPhysicianName", "Smith^John"),
        ("StationName", "CTSTATION1"),
        ("StudyDescription", "CT abdomen for John Smith"),
        ("SeriesDescription", "MR BREAST"),
        ("PatientName", "Doe^Jane"),
        ("PatientID", "MRN0012345"),
        ("PatientBirthDate", "19610704"),
        ("PatientSex", "F"),
        ("KVP", "120"),
        ("StudyInstanceUID", "1.2.3.4"),
        ("SeriesInstanceUID", "1.2.3.4.5"),
        ("StudyID", "S1234"),
        ("SeriesNumber", "3"),
        ("AcquisitionNumber", "1"),
        ("InstanceNumber", "7"),
        ("FrameOfReferenceUID", "1.2.3.4.9"),
        ("PositionReferenceIndicator", ""),
        ("ImagePositionPatient", "0\\0\\0"),
        ("ImageOrientationPatient", "1\\0\\0\\0\\1\\0"),
        ("PixelSpacing", "0.5\\0.5"),
        ("SliceThickness", "1.25"),
        ("PhotometricInterpretation", "MONOCHROME2"),
        ("RescaleIntercept", "-1024"),
        ("RescaleSlope", "1"),
    ] {
        ds.set(txt(k, v));
    }
    for (tag, v) in [(tags::SAMPLES_PER_PIXEL, 1), (tags::ROWS, 8), (tags::COLUMNS, 8), (tags::BITS_ALLOCATED, 8)] {
        ds.set(DataElement::u16(tag, v));
    }
    for (k, v) in [("BitsStored", 8u16), ("HighBit", 7), ("PixelRepresentation", 0)] {
        ds.set(DataElement::u16(kw(k), v));
    }
    ds.set(DataElement::sequence(
        kw("ReferencedImageSequence"),
        vec![Item::new([txt("ReferencedSOPClassUID", CT_IMAGE_STORAGE), txt("ReferencedSOPInstanceUID", "1.2.3.4.5.6.8")])],
    ));
    ds.set(DataElement::text(t(0x0009, 0x0010), Vr::LO, "gems_petd_01"));
    ds.set(DataElement::new(t(0x0009, 0x102B), Vr::SL, 5i32.to_le_bytes().to_vec()));
    ds.set(DataElement::text(t(0x0009, 0x1006), Vr::UI, "1.2.3.4.5"));
    ds.set(DataElement::text(t(0x0009, 0x1001), Vr::LO, "secret"));
    ds.set(DataElement::new(tags::PIXEL_DATA, Vr::OW, (0..64u8).collect()));
    ds
}

/// Detector that always fails.
pub struct FailingDetector;

impl PhiDetector for FailingDetector {
    fn detect_entities(&self, _: &str) -> Result<Vec<EntitySpan>, DetectError> {
        Err(DetectError::RemoteUnavailable("down".into()))
    }
}

/// Wraps a detector and counts calls.
pub struct Counting<D> {
    pub inner: D,
    pub calls: AtomicUsize,
}

impl<D> Counting<D> {
    pub fn new(inner: D) -> Self {
        Counting { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<D: PhiDetector> PhiDetector for Counting<D> {
    fn detect_entities(&self, text: &str) -> Result<Vec<EntitySpan>, DetectError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.detect_entities(text)
    }
}

/// Request captured by [`MockServer`].
#[derive(Debug, Clone)]
pub struct Captured {
    pub method: String,
    pub path: String,
    pub body: String,
}

/// One-thread HTTP/1.1 server answering every request with `handler`.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Captured>>>,
}

impl MockServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(&Captured) -> (u16, String) + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    continue;
                }
                let mut parts = line.split_whitespace();
                let method = parts.next().unwrap_or("").to_string();
                let path = parts.next().unwrap_or("").to_string();
                let mut len = 0;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let req = Captured { method, path, body: String::from_utf8_lossy(&body).into_owned() };
                let (status, resp) = handler(&req);
                log.lock().unwrap().push(req);
                let msg = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{resp}",
                    resp.len()
                );
                let _ = stream.write_all(msg.as_bytes());
            }
        });
        MockServer { url, requests }
    }

    pub fn requests(&self) -> Vec<Captured> {
        self.requests.lock().unwrap().clone()
    }
}
