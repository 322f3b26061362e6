use std::collections::HashSet;

use deid_core::identity::{is_valid_uid_syntax, shift_date, DateKind, IdentityStore, DEFAULT_DATE_OFFSET_DAYS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Calendar arithmetic by walking one day at a time.
mod oracle {
    pub fn leap(y: i32) -> bool {
        (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
    }

    pub fn month_len(y: i32, m: u32) -> u32 {
        match m {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            _ if leap(y) => 29,
            _ => 28,
        }
    }

    pub fn day_of_year(y: i32, m: u32, d: u32) -> u32 {
        (1..m).map(|k| month_len(y, k)).sum::<u32>() + d
    }

    pub fn step(mut y: i32, mut m: u32, mut d: u32, days: i64) -> (i32, u32, u32) {
        for _ in 0..days.abs() {
            if days > 0 {
                d += 1;
                if d > month_len(y, m) {
                    d = 1;
                    m += 1;
                    if m > 12 {
                        m = 1;
                        y += 1;
                    }
                }
            } else {
                d -= 1;
                if d == 0 {
                    m = if m == 1 { 12 } else { m - 1 };
                    if m == 12 {
                        y -= 1;
                    }
                    d = month_len(y, m);
                }
            }
        }
        (y, m, d)
    }

    /// Days since 0001-01-01 via day-of-year sums.
    pub fn ordinal(y: i32, m: u32, d: u32) -> i64 {
        (1..y).map(|k| if leap(k) { 366i64 } else { 365 }).sum::<i64>() + day_of_year(y, m, d) as i64
    }
}

fn parse(s: &str) -> (i32, u32, u32) {
    (s[..4].parse().unwrap(), s[4..6].parse().unwrap(), s[6..8].parse().unwrap())
}

fn random_date(rng: &mut impl Rng) -> (i32, u32, u32) {
    let y = rng.gen_range(1900..=2100);
    let m = rng.gen_range(1..=12);
    let d = rng.gen_range(1..=oracle::month_len(y, m));
    (y, m, d)
}

#[test]
fn default_offset() {
    assert_eq!(DEFAULT_DATE_OFFSET_DAYS, 120);
}

#[test]
fn date_shift_matches_calendar_oracle() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let (y, m, d) = random_date(&mut rng);
        let off = rng.gen_range(-365..=365);
        let got = shift_date(&format!("{y:04}{m:02}{d:02}"), DateKind::Da, off).unwrap();
        let (ey, em, ed) = oracle::step(y, m, d, off);
        assert_eq!(got, format!("{ey:04}{em:02}{ed:02}"), "{y}-{m}-{d} {off:+}");
    }
}

#[test]
fn known_shifts() {
    assert_eq!(shift_date("20200314", DateKind::Da, 120).unwrap(), "20200712");
    assert_eq!(shift_date("20191231", DateKind::Da, 1).unwrap(), "20200101");
    assert_eq!(shift_date("20200301", DateKind::Da, -1).unwrap(), "20200229");
    assert_eq!(shift_date("20200314120000.5+0100", DateKind::Dt, 120).unwrap(), "20200712120000.5+0100");
    assert!(shift_date("2020-03-14", DateKind::Da, 1).is_err());
    assert!(shift_date("20200230", DateKind::Da, 1).is_err());
}

#[test]
fn uid_remap_is_a_consistent_injection() {
    let s = IdentityStore::new(b"uids".to_vec(), 120);
    let mut seen = HashSet::new();
    for i in 0..20_000u32 {
        let u = format!("1.2.840.113619.2.{}.{}", i / 100, i);
        let r = s.remap_uid(&u).unwrap();
        assert!(r.len() <= 64 && r.starts_with("2.25.") && is_valid_uid_syntax(&r), "{r}");
        assert!(seen.insert(r.clone()));
        assert_eq!(s.remap_uid(&u).unwrap(), r);
        assert_eq!(s.remap_uid(&r).unwrap(), r);
    }
}

#[test]
fn mappings_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let s = IdentityStore::new(b"a".to_vec(), 120);
    let u = s.remap_uid("1.2.3").unwrap();
    let p = s.remap_patient_id("MRN1").unwrap();
    let path = dir.path().join("map.csv");
    s.export_mappings(&path).unwrap();
    let fresh = IdentityStore::new(b"different".to_vec(), 120);
    assert_eq!(fresh.import_mappings(&path).unwrap(), 2);
    assert_eq!(fresh.remap_uid("1.2.3").unwrap(), u);
    assert_eq!(fresh.remap_patient_id("MRN1").unwrap(), p);
}

#[test]
fn salts_change_pseudonyms() {
    let a = IdentityStore::new(b"a".to_vec(), 120);
    let b = IdentityStore::new(b"b".to_vec(), 120);
    assert_ne!(a.remap_uid("1.2.3").unwrap(), b.remap_uid("1.2.3").unwrap());
    assert!(a.remap_uid("1.2.a").is_err());
    assert!(a.remap_patient_id("").is_err());
}

proptest! {
    #[test]
    fn intervals_preserved(y1 in 1900i32..2100, m1 in 1u32..=12, d1 in 1u32..=28,
                           y2 in 1900i32..2100, m2 in 1u32..=12, d2 in 1u32..=28,
                           off in -365i64..=365) {
        let a = format!("{y1:04}{m1:02}{d1:02}");
        let b = format!("{y2:04}{m2:02}{d2:02}");
        let (sa, sb) = (shift_date(&a, DateKind::Da, off).unwrap(), shift_date(&b, DateKind::Da, off).unwrap());
        let before = oracle::ordinal(y2, m2, d2) - oracle::ordinal(y1, m1, d1);
        let (ay, am, ad) = parse(&sa);
        let (by, bm, bd) = parse(&sb);
        prop_assert_eq!(oracle::ordinal(by, bm, bd) - oracle::ordinal(ay, am, ad), before);
        prop_assert_eq!(oracle::ordinal(ay, am, ad) - oracle::ordinal(y1, m1, d1), off);
    }

    #[test]
    fn uid_remap_deterministic_across_stores(parts in proptest::collection::vec(1u32..100_000, 2..8)) {
        let uid = parts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(".");
        let a = IdentityStore::new(b"k".to_vec(), 0);
        let b = IdentityStore::new(b"k".to_vec(), 0);
        prop_assert_eq!(a.remap_uid(&uid).unwrap(), b.remap_uid(&uid).unwrap());
    }
}
