//! BLER records and their CSV form.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::arq::Scheme;
use crate::error::{invalid, Result};

pub const CSV_HEADER: &str = "scheme,ebn0_db,round,trials,frame_errors,bler,ci_lo,ci_hi";

/// 95% two-sided normal quantile used for the Wilson interval.
pub const WILSON_Z: f64 = 1.96;

/// One (scheme, Eb/N0, round) measurement. A frame is in error at round `k`
/// when it was not decoded at any round `≤ k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlerRecord {
    pub scheme: Scheme,
    pub ebn0_db: f64,
    pub round: usize,
    pub trials: u64,
    pub frame_errors: u64,
}

impl BlerRecord {
    pub fn bler(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.trials as f64
        }
    }

    /// Wilson score interval for the error probability.
    pub fn wilson(&self) -> (f64, f64) {
        wilson_interval(self.frame_errors, self.trials, WILSON_Z)
    }

    pub fn to_csv_row(&self) -> String {
        let (lo, hi) = self.wilson();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.scheme,
            self.ebn0_db,
            self.round,
            self.trials,
            self.frame_errors,
            format_g6(self.bler()),
            format_g6(lo),
            format_g6(hi)
        )
    }
}

pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `printf("%g")` with six significant digits.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_fraction(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Records sorted by (scheme, Eb/N0, round).
pub fn sort_records(records: &mut [BlerRecord]) {
    records.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.ebn0_db.total_cmp(&b.ebn0_db))
            .then(a.round.cmp(&b.round))
    });
}

pub fn records_to_csv(records: &[BlerRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

/// Writes the CSV through a temporary file so readers never see a torn file.
pub fn emit_records(records: &[BlerRecord], path: &Path) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(records_to_csv(records).as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn parse_records(text: &str) -> Result<Vec<BlerRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(invalid("missing or unexpected CSV header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| invalid(format!("row {}: {what}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad("expected 8 fields"));
            }
            let rec = BlerRecord {
                scheme: f[0].parse()?,
                ebn0_db: f[1].parse().map_err(|_| bad("ebn0_db"))?,
                round: f[2].parse().map_err(|_| bad("round"))?,
                trials: f[3].parse().map_err(|_| bad("trials"))?,
                frame_errors: f[4].parse().map_err(|_| bad("frame_errors"))?,
            };
            if rec.frame_errors > rec.trials {
                return Err(bad("more errors than trials"));
            }
            if f[5] != format_g6(rec.bler()) {
                return Err(bad("bler does not match errors / trials"));
            }
            Ok(rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(scheme: Scheme, ebn0: f64, round: usize, errors: u64) -> BlerRecord {
        BlerRecord {
            scheme,
            ebn0_db: ebn0,
            round,
            trials: 2000,
            frame_errors: errors,
        }
    }

    #[test]
    fn g6_formatting() {
        assert_eq!(format_g6(0.0), "0");
        assert_eq!(format_g6(1.0), "1");
        assert_eq!(format_g6(0.5), "0.5");
        assert_eq!(format_g6(1.0 / 3.0), "0.333333");
        assert_eq!(format_g6(2.0 / 3.0), "0.666667");
        assert_eq!(format_g6(0.0005), "0.0005");
        assert_eq!(format_g6(0.00005), "5e-05");
        assert_eq!(format_g6(1.234567e-7), "1.23457e-07");
        assert_eq!(format_g6(123456.7), "123457");
        assert_eq!(format_g6(1234567.0), "1.23457e+06");
        assert_eq!(format_g6(0.9999996), "1");
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100, WILSON_Z);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.0370).abs() < 1e-4);
        let (lo, hi) = wilson_interval(50, 100, WILSON_Z);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn empty_list_is_header_only() {
        assert_eq!(records_to_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_record_two_lines() {
        let text = records_to_csv(&[rec(Scheme::Proposed, 4.0, 1, 3)]);
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("proposed,4,1,2000,3,0.0015,"));
    }

    #[test]
    fn round_trip() {
        let rs = vec![
            rec(Scheme::LlrLevel, -2.5, 1, 2000),
            rec(Scheme::Proposed, 0.1, 2, 7),
            rec(Scheme::Proposed, 12.0, 3, 0),
        ];
        assert_eq!(parse_records(&records_to_csv(&rs)).unwrap(), rs);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_records(&rs, &path).unwrap();
        let back = parse_records(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, rs);
    }

    #[test]
    fn sorting() {
        let mut rs = vec![
            rec(Scheme::LlrLevel, 2.0, 1, 0),
            rec(Scheme::Proposed, 4.0, 2, 0),
            rec(Scheme::Proposed, 4.0, 1, 0),
            rec(Scheme::Proposed, -1.0, 3, 0),
        ];
        sort_records(&mut rs);
        let keys: Vec<_> = rs.iter().map(|r| (r.scheme, r.ebn0_db, r.round)).collect();
        assert_eq!(
            keys,
            vec![
                (Scheme::Proposed, -1.0, 3),
                (Scheme::Proposed, 4.0, 1),
                (Scheme::Proposed, 4.0, 2),
                (Scheme::LlrLevel, 2.0, 1),
            ]
        );
    }
}
