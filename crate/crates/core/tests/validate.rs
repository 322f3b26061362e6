mod common;

use common::*;
use dcm_codec::{dictionary, DataSet, TransferSyntax, Vr};
use deid_core::validate::{repair, validate, IgnoreList, RequiredAttributeProfile};

fn complete_ct() -> DataSet {
    let mut ds = ct_dataset();
    ds.set(txt("ClinicalTrialSeriesID", "SERIES-A"));
    ds.set(txt("ClinicalTrialSubjectID", "SUBJ-1"));
    ds
}

#[test]
fn complete_dataset_has_no_issues() {
    assert_eq!(validate(&complete_ct(), RequiredAttributeProfile::bundled()), vec![]);
    assert_eq!(validate(&ct_dataset(), RequiredAttributeProfile::bundled()), vec![]);
}

#[test]
fn five_stripped_two_ignored() {
    let mut ds = complete_ct();
    let stripped = ["StudyDate", "PatientName", "Manufacturer", "ClinicalTrialSubjectID", "StudyID"];
    for k in stripped {
        assert!(ds.remove(kw(k)).is_some(), "{k}");
    }
    let profile = RequiredAttributeProfile::bundled();
    let ignore = IgnoreList::bundled();
    let issues = validate(&ds, profile);
    let mut kws: Vec<&str> = issues.iter().map(|i| i.keyword.as_str()).collect();
    kws.sort();
    let mut want = stripped.to_vec();
    want.sort();
    assert_eq!(kws, want);

    let (fixed, rep) = repair(&ds, &issues, &ignore);
    assert_eq!(rep.inserted.len(), 3);
    assert_eq!(fixed.elements.len(), ds.elements.len() + 3);
    for i in &rep.inserted {
        let e = fixed.get(i.tag).unwrap();
        assert_eq!(e.value_len(), 0);
        assert_eq!(e.vr, dictionary::lookup(i.tag).unwrap().vr);
    }
    assert_eq!(fixed.get(kw("StudyDate")).unwrap().vr, Vr::DA);
    assert!(fixed.get(kw("Manufacturer")).is_none());

    let again = validate(&fixed, profile);
    let mut left: Vec<&str> = again.iter().map(|i| i.keyword.as_str()).collect();
    left.sort();
    assert_eq!(left, vec!["ClinicalTrialSubjectID", "Manufacturer"]);
    assert!(again.iter().all(|i| ignore.contains(&i.keyword)));
}

#[test]
fn repair_never_touches_existing_values() {
    let mut ds = ct_dataset();
    ds.remove(kw("StudyDate"));
    let issues = validate(&ds, RequiredAttributeProfile::bundled());
    let (fixed, _) = repair(&ds, &issues, &IgnoreList::bundled());
    for e in ds.walk() {
        assert_eq!(fixed.get_path(&e.path), Some(e.element));
    }
    let (same, rep) = repair(&fixed, &[], &IgnoreList::bundled());
    assert_eq!(same, fixed);
    assert!(rep.inserted.is_empty());
}

#[test]
fn conditional_requirement() {
    let mut ds = ct_dataset();
    ds.set(txt("ClinicalTrialSeriesID", "S"));
    let issues = validate(&ds, RequiredAttributeProfile::bundled());
    assert_eq!(issues.len(), 1);
    assert_eq!(issues[0].keyword, "ClinicalTrialSubjectID");
}

#[test]
fn unknown_sop_class() {
    let mut ds = DataSet::new(TransferSyntax::ExplicitVrLittleEndian);
    ds.set(txt("SOPClassUID", "1.2.3.999"));
    assert!(validate(&ds, RequiredAttributeProfile::bundled()).is_empty());
}

#[test]
fn profile_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("req.txt");
    std::fs::write(&p, "[1.2.3 Test]\nPatientName\n").unwrap();
    let profile = RequiredAttributeProfile::load(&p).unwrap();
    let mut ds = DataSet::new(TransferSyntax::ExplicitVrLittleEndian);
    ds.set(txt("SOPClassUID", "1.2.3"));
    assert_eq!(validate(&ds, &profile).len(), 1);
}

#[cfg(unix)]
#[test]
fn external_validator_subprocess() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("fake-validator");
    std::fs::write(
        &script,
        "#!/bin/sh\necho 'Error - Missing attribute Type 2 Required Element=<StudyID> Module=<General Study>' >&2\necho 'Warning - whatever'\n",
    )
    .unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    let issues = deid_core::validate::run_external_validator(&script, &dir.path().join("x.dcm")).unwrap();
    assert_eq!(issues.len(), 1);
    assert_eq!(issues[0].keyword, "StudyID");
}
