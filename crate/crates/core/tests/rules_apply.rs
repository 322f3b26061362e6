mod common;

use common::*;
use dcm_codec::{tags, DataElement, Item, TagPath, Vr};
use deid_core::identity::IdentityStore;
use deid_core::phi::{NullDetector, PatternDetector, Whitelist};
use deid_core::rules::{
    deidentify_dataset, load_rule_table, Action, CustomRuleSet, DeidContext, Outcome, RuleTable, DUMMY_PERSON_NAME,
};

fn store() -> IdentityStore {
    IdentityStore::new(b"test-salt".to_vec(), 120)
}

fn tcia() -> RuleTable {
    RuleTable::bundled("tcia").unwrap()
}

#[test]
fn tcia_profile_on_ct_header() {
    let s = store();
    let wl = Whitelist::bundled();
    let ctx = DeidContext { store: &s, detector: &PatternDetector, whitelist: Some(&wl) };
    let ds = ct_dataset();
    let (out, report) = deidentify_dataset(&ds, &tcia(), &CustomRuleSet::bundled(), &ctx);

    assert_eq!(out.text(kw("PatientName")).unwrap(), DUMMY_PERSON_NAME);
    let pid = out.text(tags::PATIENT_ID).unwrap();
    assert!(pid.starts_with("PSN-") && pid != "MRN0012345");
    assert!(out.get(kw("PatientBirthDate")).is_none());
    assert!(out.get(kw("AccessionNumber")).is_none());
    assert_eq!(out.text(kw("StudyDate")).unwrap(), "20200712");
    assert_eq!(out.text(kw("StudyDescription")).unwrap(), "CT abdomen for");
    assert_eq!(out.text(kw("SeriesDescription")).unwrap(), "MR BREAST");
    assert_eq!(out.text(kw("Modality")).unwrap(), "CT");
    assert_eq!(out.text(kw("SOPClassUID")).unwrap(), CT_IMAGE_STORAGE);
    // Custom overlay keeps the station name.
    assert_eq!(out.text(kw("StationName")).unwrap(), "CTSTATION1");

    let sop = out.text(tags::SOP_INSTANCE_UID).unwrap();
    assert_eq!(sop, s.remap_uid("1.2.3.4.5.6.7").unwrap());
    let nested = TagPath::root(kw("ReferencedImageSequence")).child(0, kw("ReferencedSOPInstanceUID"));
    assert_eq!(out.get_path(&nested).unwrap().to_text().unwrap(), s.remap_uid("1.2.3.4.5.6.8").unwrap());
    let nested_class = TagPath::root(kw("ReferencedImageSequence")).child(0, kw("ReferencedSOPClassUID"));
    assert_eq!(out.get_path(&nested_class).unwrap().to_text().unwrap(), CT_IMAGE_STORAGE);

    // Private elements are left for the private-tag step.
    assert!(out.get(t(0x0009, 0x1001)).is_some());
    assert!(report.rows.iter().any(|r| r.outcome == Outcome::Delegated));
    assert_eq!(report.rows.len(), ds.walk().len());
    assert_eq!(report.degraded(), 0);
}

#[test]
fn whitelist_off_empties_series_description() {
    let s = store();
    let ctx = DeidContext { store: &s, detector: &PatternDetector, whitelist: None };
    let (out, _) = deidentify_dataset(&ct_dataset(), &tcia(), &CustomRuleSet::bundled(), &ctx);
    assert_eq!(out.text(kw("SeriesDescription")).unwrap_or_default(), "");
}

#[test]
fn idempotent_on_own_output() {
    let s = store();
    let wl = Whitelist::bundled();
    let ctx = DeidContext { store: &s, detector: &PatternDetector, whitelist: Some(&wl) };
    let table = load_rule_table("@profile tcia\nSOPInstanceUID Keep\nStudyInstanceUID Keep\nSeriesInstanceUID Keep\nFrameOfReferenceUID Keep\nReferencedSOPInstanceUID Keep\nStudyDate Keep\n").unwrap().0;
    let (once, _) = deidentify_dataset(&ct_dataset(), &table, &CustomRuleSet::bundled(), &ctx);
    let (twice, report) = deidentify_dataset(&once, &table, &CustomRuleSet::bundled(), &ctx);
    for e in once.walk() {
        if e.element.tag == tags::PATIENT_ID {
            continue;
        }
        assert_eq!(twice.get_path(&e.path), Some(e.element), "{}", e.path);
    }
    assert_eq!(report.rows.len(), once.walk().len());
}

#[test]
fn failing_detector_empties_and_marks_degraded() {
    let s = store();
    let ctx = DeidContext { store: &s, detector: &FailingDetector, whitelist: None };
    let (out, report) = deidentify_dataset(&ct_dataset(), &tcia(), &CustomRuleSet::default(), &ctx);
    assert_eq!(out.text(kw("StudyDescription")).unwrap_or_default(), "");
    assert!(report.degraded() >= 1);
    let row = report.rows.iter().find(|r| r.path == TagPath::root(kw("StudyDescription"))).unwrap();
    assert!(row.degraded && row.error.is_some());
    // Non-text actions are unaffected.
    assert_eq!(out.text(kw("Modality")).unwrap(), "CT");
}

#[test]
fn removed_sequence_children_reported_with_parent() {
    let s = store();
    let ctx = DeidContext { store: &s, detector: &NullDetector, whitelist: None };
    let mut ds = ct_dataset();
    ds.set(DataElement::sequence(
        kw("ReferencedPatientSequence"),
        vec![Item::new([txt("ReferencedSOPInstanceUID", "9.9"), txt("ReferencedSOPClassUID", "1.2")])],
    ));
    let table = load_rule_table("@profile tcia\nReferencedPatientSequence Remove\n").unwrap().0;
    let (out, report) = deidentify_dataset(&ds, &table, &CustomRuleSet::default(), &ctx);
    assert!(out.get(kw("ReferencedPatientSequence")).is_none());
    let under: Vec<_> = report.rows.iter().filter(|r| r.path.parents.first().is_some_and(|p| p.0 == kw("ReferencedPatientSequence"))).collect();
    assert_eq!(under.len(), 2);
    assert!(under.iter().all(|r| r.outcome == Outcome::RemovedWithParent));
    assert_eq!(report.rows.len(), ds.walk().len());
}

#[test]
fn per_element_mode_matches_consolidated() {
    let s = store();
    let wl = Whitelist::bundled();
    let ctx = DeidContext { store: &s, detector: &PatternDetector, whitelist: Some(&wl) };
    let consolidated = tcia();
    let per = load_rule_table("@profile tcia\n@free-text per-element\n").unwrap().0;
    let (a, _) = deidentify_dataset(&ct_dataset(), &consolidated, &CustomRuleSet::bundled(), &ctx);
    let (b, _) = deidentify_dataset(&ct_dataset(), &per, &CustomRuleSet::bundled(), &ctx);
    assert_eq!(a, b);
}

#[test]
fn custom_overlay_wins() {
    let custom = CustomRuleSet::bundled();
    let t = tcia();
    for k in ["StationName", "DeviceSerialNumber", "DeviceUID", "PlateID"] {
        assert_eq!(deid_core::rules::resolve_action(&t, &custom, kw(k), Vr::LO), Action::Keep, "{k}");
        assert_eq!(deid_core::rules::resolve_action(&t, &CustomRuleSet::default(), kw(k), Vr::LO), Action::Remove, "{k}");
    }
    for k in ["Allergies", "PatientState", "Occupation", "PatientComments", "ImageComments"] {
        assert_eq!(deid_core::rules::resolve_action(&t, &custom, kw(k), Vr::LO), Action::Remove, "{k}");
    }
}
