mod common;

use base64::Engine;
use common::MockServer;
use deid_core::phi::{Category, DetectError, PhiDetector, RemoteDetector};
use deid_core::pixel::{Frame, PixelError, RemoteOcr, TextBox, TextSource};

#[test]
fn detect_posts_text_and_maps_labels() {
    let server = MockServer::start(|req| {
        assert_eq!(req.method, "POST");
        assert_eq!(req.path, "/detect");
        let v: serde_json::Value = serde_json::from_str(&req.body).unwrap();
        assert_eq!(v["text"], "Seen by John Smith on 01/02/2020");
        (
            200,
            r#"{"entities":[{"start":8,"end":12,"label":"B-PATIENT","score":0.99},
                            {"start":13,"end":18,"label":"I-PATIENT","score":0.98},
                            {"start":22,"end":32,"label":"DATE","score":0.97},
                            {"start":0,"end":4,"label":"HOSP","score":0.1}]}"#
                .to_string(),
        )
    });
    let det = RemoteDetector::new(&format!("{}/", server.url));
    assert!(det.endpoint().ends_with("/detect"));
    let spans = det.detect_entities("Seen by John Smith on 01/02/2020").unwrap();
    let got: Vec<(usize, usize, Category)> = spans.iter().map(|s| (s.start, s.end, s.category)).collect();
    assert_eq!(got, vec![(8, 12, Category::Name), (13, 18, Category::Name), (22, 32, Category::Date)]);
    assert_eq!(spans[0].text, "John");
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn detect_empty_text_skips_the_call() {
    let server = MockServer::start(|_| (200, r#"{"entities":[]}"#.into()));
    assert!(RemoteDetector::new(&server.url).detect_entities("").unwrap().is_empty());
    assert!(server.requests().is_empty());
}

#[test]
fn detect_rejects_bad_spans_and_errors() {
    let server = MockServer::start(|_| (200, r#"{"entities":[{"start":0,"end":99,"label":"NAME","score":1.0}]}"#.into()));
    assert!(matches!(RemoteDetector::new(&server.url).detect_entities("abc"), Err(DetectError::BadResponse(_))));
    let server = MockServer::start(|_| (503, r#"{"error":"model not loaded"}"#.into()));
    assert!(matches!(RemoteDetector::new(&server.url).detect_entities("abc"), Err(DetectError::RemoteUnavailable(_))));
    let server = MockServer::start(|_| (200, "not json".into()));
    assert!(matches!(RemoteDetector::new(&server.url).detect_entities("abc"), Err(DetectError::BadResponse(_))));
}

#[test]
fn ocr_sends_png_and_clamps_boxes() {
    let server = MockServer::start(|req| {
        assert_eq!(req.path, "/ocr");
        let v: serde_json::Value = serde_json::from_str(&req.body).unwrap();
        assert_eq!(v["frame_id"], "dir/f.dcm#1");
        let png = base64::engine::general_purpose::STANDARD.decode(v["image"].as_str().unwrap()).unwrap();
        let img = image::load_from_memory(&png).unwrap();
        assert_eq!((img.width(), img.height()), (6, 4));
        (
            200,
            r#"{"boxes":[{"x0":-3,"y0":1,"x1":3,"y1":9,"text":"TEST 123","score":0.9},
                         {"x0":10,"y0":10,"x1":12,"y1":12,"text":"gone","score":0.9}]}"#
                .into(),
        )
    });
    let ocr = RemoteOcr::new(&server.url);
    let frame = Frame::new(4, 6, 16, 1, vec![7; 48]);
    let boxes = ocr.detect_text("dir/f.dcm", 1, &frame).unwrap();
    assert_eq!(boxes, vec![TextBox::new(0, 1, 3, 4, "TEST 123", 0.9)]);
}

#[test]
fn ocr_unreachable() {
    let ocr = RemoteOcr::new("http://127.0.0.1:9");
    let frame = Frame::new(2, 2, 8, 1, vec![0; 4]);
    assert!(matches!(ocr.detect_text("f", 0, &frame), Err(PixelError::RemoteUnavailable(_))));
}
