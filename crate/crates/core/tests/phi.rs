use dcm_codec::{Tag, TagPath};
use deid_core::phi::{detect_filtered, merge_spans, remove_spans, Category, EntitySpan, PatternDetector, PhiDetector, Whitelist};
use deid_core::rules::{apply_entity_removals, MedicalNote};
use proptest::prelude::*;

fn span(doc: &str, s: usize, e: usize, c: f64) -> EntitySpan {
    EntitySpan::new(doc, s, e, Category::Other, c)
}

#[test]
fn pattern_families() {
    let d = PatternDetector;
    for (text, needle) in [
        ("Patient John Smith seen today", "John Smith"),
        ("DOB 01/02/1960", "01/02/1960"),
        ("call 617-555-0199", "617-555-0199"),
        ("mail jane.doe@example.org", "jane.doe@example.org"),
        ("MRN 12345678", "12345678"),
        ("SMITH^JOHN", "SMITH^JOHN"),
        ("referred from Boston", "Boston"),
    ] {
        let spans = d.detect_entities(text).unwrap();
        assert!(spans.iter().any(|s| s.text.contains(needle) || needle.contains(&s.text) && !s.text.is_empty()), "{text}: {spans:?}");
    }
    for clean in ["CT ABDOMEN PELVIS W CONTRAST", "AXIAL T1 POST", "Chest PA and lateral"] {
        assert!(d.detect_entities(clean).unwrap().is_empty(), "{clean}");
    }
}

#[test]
fn whitelist_rule() {
    let wl = Whitelist::bundled();
    assert!(detect_filtered(&PatternDetector, Some(&wl), "MR BREAST").unwrap().is_empty());
    assert!(!detect_filtered(&PatternDetector, None, "MR BREAST").unwrap().is_empty());
}

proptest! {
    #[test]
    fn merged_spans_disjoint_and_cover_input(raw in proptest::collection::vec((0usize..30, 1usize..8, 0.0f64..1.0), 0..8)) {
        let doc: String = "x".repeat(40);
        let spans: Vec<EntitySpan> = raw.iter().map(|&(s, l, c)| span(&doc, s, s + l, c)).collect();
        let merged = merge_spans(&doc, spans.clone());
        for w in merged.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for s in &spans {
            prop_assert!(merged.iter().any(|m| m.start <= s.start && s.end <= m.end));
        }
    }

    #[test]
    fn whitelist_only_removes(text in "[A-Za-z ]{0,40}") {
        let wl = Whitelist::bundled();
        let all = detect_filtered(&PatternDetector, None, &text).unwrap();
        let kept = detect_filtered(&PatternDetector, Some(&wl), &text).unwrap();
        prop_assert!(kept.len() <= all.len());
        for k in &kept {
            prop_assert!(all.iter().any(|a| a.start == k.start && a.end == k.end));
        }
    }

    #[test]
    fn note_removal_matches_mask(texts in proptest::collection::vec("[a-z ]{0,12}", 1..5),
                                 ents in proptest::collection::vec((0usize..80, 0usize..10), 0..6)) {
        let mut note = MedicalNote::new();
        for (i, t) in texts.iter().enumerate() {
            note.push(TagPath::root(Tag::new(0x0008, i as u16 + 1)), t);
        }
        let len = note.char_len();
        let spans: Vec<EntitySpan> = ents.iter()
            .map(|&(s, l)| (s.min(len), (s + l).min(len)))
            .map(|(s, e)| span(&note.document, s, e, 1.0))
            .collect();
        let mut mask = vec![false; len];
        for s in &spans {
            for m in &mut mask[s.start..s.end] {
                *m = true;
            }
        }
        let out = apply_entity_removals(&note, &spans).unwrap();
        for seg in &note.segments {
            let expect: String = seg.text.chars().zip(&mask[seg.range.clone()]).filter(|(_, m)| !**m).map(|(c, _)| c).collect();
            let touched = mask[seg.range.clone()].iter().any(|m| *m);
            match out.get(&seg.path) {
                Some(v) => prop_assert_eq!(v, &expect),
                None => prop_assert!(!touched),
            }
        }
    }

    #[test]
    fn remove_spans_deletes_exactly(text in "[a-z]{0,30}", s in 0usize..30, l in 0usize..10) {
        let n = text.chars().count();
        let (a, b) = (s.min(n), (s + l).min(n));
        let out = remove_spans(&text, &[span(&text, a, b, 1.0)]);
        let expect: String = text.chars().take(a).chain(text.chars().skip(b)).collect();
        prop_assert_eq!(out, expect);
    }
}
