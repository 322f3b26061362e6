mod common;

use std::path::{Path, PathBuf};

use common::*;
use dcm_codec::{parse_file, serialize_file, tags};
use deid_core::pipeline::{discover_files, run, FileStatus, RunConfig, RunReport, StepTimings};

fn write_dcm(root: &Path, rel: &str, sop: &str) {
    let mut ds = ct_dataset();
    ds.set(txt("SOPInstanceUID", sop));
    ds.set(dcm_codec::DataElement::text(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, dcm_codec::Vr::UI, sop));
    let p = root.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, serialize_file(&ds).unwrap()).unwrap();
}

fn config(input: &Path, output: &Path) -> RunConfig {
    let mut c = RunConfig::new(input, output);
    c.salt = Some(b"pipeline-test".to_vec());
    c
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = walkdir(root).into_iter().map(|p| (p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap())).collect();
    out.sort();
    out
}

fn walkdir(root: &Path) -> Vec<PathBuf> {
    let mut v = Vec::new();
    for e in std::fs::read_dir(root).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(walkdir(&p));
        } else {
            v.push(p);
        }
    }
    v
}

fn strip_timing(mut r: RunReport) -> RunReport {
    r.wall_ms = 0;
    for f in &mut r.files {
        f.timing = StepTimings::default();
    }
    r
}

#[test]
fn empty_input() {
    let (i, o) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r = run(&config(i.path(), o.path())).unwrap();
    assert_eq!(r.totals.files, 0);
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn discovery_order_and_skips() {
    let i = tempfile::tempdir().unwrap();
    write_dcm(i.path(), "b/2.dcm", "1.2.2");
    write_dcm(i.path(), "a/1.dcm", "1.2.1");
    write_dcm(i.path(), "a/noext", "1.2.3");
    std::fs::write(i.path().join("a/readme.txt"), "hello").unwrap();
    std::fs::write(i.path().join("plain"), "not dicom at all").unwrap();
    let d = discover_files(i.path(), None).unwrap();
    let files: Vec<String> = d.files.iter().map(|p| p.to_string_lossy().into_owned()).collect();
    assert_eq!(files, vec!["a/1.dcm", "a/noext", "b/2.dcm"]);
    assert_eq!(d.skipped.len(), 2);
}

#[test]
fn corrupt_file_fails_alone() {
    let (i, o) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_dcm(i.path(), "a/1.dcm", "1.2.1");
    write_dcm(i.path(), "c/3.dcm", "1.2.3");
    std::fs::create_dir_all(i.path().join("b")).unwrap();
    std::fs::write(i.path().join("b/broken.dcm"), b"garbage that is not DICOM").unwrap();
    let r = run(&config(i.path(), o.path())).unwrap();
    assert_eq!((r.totals.files, r.totals.ok, r.totals.failed), (3, 2, 1));
    assert_eq!(r.exit_code(), 1);
    let failed: Vec<_> = r.files.iter().filter(|f| f.status == FileStatus::Failed).map(|f| f.path.as_str()).collect();
    assert_eq!(failed, vec!["b/broken.dcm"]);
    let outs: Vec<PathBuf> = tree(o.path()).into_iter().map(|(p, _)| p).collect();
    assert_eq!(outs, vec![PathBuf::from("a/1.dcm"), PathBuf::from("c/3.dcm")]);
}

#[test]
fn outputs_are_deidentified_and_mapped() {
    let (i, o, m) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for k in 0..5 {
        write_dcm(i.path(), &format!("s/{k}.dcm"), &format!("1.2.9.{k}"));
    }
    let mut c = config(i.path(), o.path());
    c.mapping_csv = Some(m.path().join("map.csv"));
    c.report = Some(m.path().join("report.jsonl"));
    let r = run(&c).unwrap();
    assert_eq!(r.totals.ok, 5);
    for k in 0..5 {
        let ds = parse_file(&std::fs::read(o.path().join(format!("s/{k}.dcm"))).unwrap()).unwrap();
        let sop = ds.text(tags::SOP_INSTANCE_UID).unwrap();
        assert!(sop.starts_with("2.25."));
        assert_eq!(ds.text(tags::MEDIA_STORAGE_SOP_INSTANCE_UID).unwrap(), sop);
        assert_eq!(ds.text(kw("PatientName")).unwrap(), "ANON^ANON");
        assert!(ds.get(t(0x0009, 0x1001)).is_none());
        assert!(ds.get(t(0x0009, 0x102B)).is_some());
        // StudyID and AccessionNumber are removed by the profile and put back empty.
        assert_eq!(ds.get(kw("StudyID")).unwrap().value_len(), 0);
    }
    let csv = std::fs::read_to_string(m.path().join("map.csv")).unwrap();
    assert!(csv.starts_with("kind,original,replacement"));
    for k in 0..5 {
        assert!(csv.contains(&format!("uid,1.2.9.{k},2.25.")));
    }
    let report = std::fs::read_to_string(m.path().join("report.jsonl")).unwrap();
    assert_eq!(report.lines().count(), 6);
    assert!(r.files.iter().all(|f| f.repairs.contains(&"StudyID".to_string())));
}

#[test]
fn worker_count_does_not_change_output() {
    let i = tempfile::tempdir().unwrap();
    for k in 0..24 {
        write_dcm(i.path(), &format!("d{}/{k:02}.dcm", k % 3), &format!("1.2.7.{k}"));
    }
    let mut results = Vec::new();
    for workers in [1, 8] {
        let (o, m) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut c = config(i.path(), o.path());
        c.workers = workers;
        c.mapping_csv = Some(m.path().join("map.csv"));
        let r = run(&c).unwrap();
        results.push((tree(o.path()), std::fs::read(m.path().join("map.csv")).unwrap(), strip_timing(r)));
    }
    assert_eq!(results[0], results[1]);
}

#[test]
fn same_input_and_output_rejected() {
    let i = tempfile::tempdir().unwrap();
    assert!(run(&config(i.path(), i.path())).is_err());
}

#[test]
fn nested_output_is_not_rediscovered() {
    let i = tempfile::tempdir().unwrap();
    write_dcm(i.path(), "1.dcm", "1.2.1");
    let out = i.path().join("out");
    let c = config(i.path(), &out);
    assert_eq!(run(&c).unwrap().totals.files, 1);
    assert_eq!(run(&c).unwrap().totals.files, 1);
}
