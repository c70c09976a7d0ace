//! CSV and JSON interchange formats, key=value configs and artifact manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluate::{
    CvReport, ExperimentResult, Method, RunSummary, SensitivityCurve, ValidationReport,
};
use crate::flex::{HourlyFlexSample, MinuteRecord};
use crate::gof::KsResult;
use crate::tail::Flexibility;

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

// ---------------------------------------------------------------- config

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key=value, got '{raw}'", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(out)
}

pub fn read_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_kv(&fs::read_to_string(path)?)
}

pub fn format_kv(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

// ------------------------------------------------------------- artifacts

/// Provenance stamped into every output artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Input file name to SHA-256 digest.
    pub inputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            tool: "tailbid".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            seed,
            inputs: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.insert(name, sha256_file(path)?);
        Ok(self)
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("'{}' is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Path of the manifest that accompanies a CSV artifact.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// CSV headers stay exact, so the manifest goes next to the file.
pub fn write_csv_artifact(path: &Path, csv: &[u8], manifest: &Manifest) -> Result<()> {
    write_atomic(path, csv)?;
    write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(manifest)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JsonArtifact<T> {
    pub manifest: Manifest,
    pub data: T,
}

pub fn write_json_artifact<T: Serialize>(path: &Path, data: &T, manifest: &Manifest) -> Result<()> {
    let doc = JsonArtifact {
        manifest: manifest.clone(),
        data,
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json_artifact<T: DeserializeOwned>(path: &Path) -> Result<JsonArtifact<T>> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

// ------------------------------------------------------------ generic csv

fn write_rows<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let got = rdr.headers()?;
    let ok = got.len() == expected.len() && got.iter().zip(expected).all(|(a, b)| a.trim() == *b);
    if !ok {
        return Err(Error::data(format!(
            "unexpected CSV header '{}', expected '{}'",
            got.iter().collect::<Vec<_>>().join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

fn read_rows<T: DeserializeOwned, R: Read>(r: R, header: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    check_header(&mut rdr, header)?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::data(format!("row {}: {e}", i + 2))))
        .collect()
}

// --------------------------------------------------------- minute records

pub const MINUTE_HEADER: [&str; 4] = ["ev_id", "minute", "power_kw", "connected"];

#[derive(Serialize, Deserialize)]
struct MinuteRow {
    ev_id: String,
    minute: i64,
    power_kw: f64,
    connected: u8,
}

/// A malformed input row that was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MinuteCsv {
    pub records: Vec<MinuteRecord>,
    pub rejected: Vec<RejectedRow>,
}

pub fn write_minute_records(records: &[MinuteRecord]) -> Result<Vec<u8>> {
    let rows: Vec<MinuteRow> = records
        .iter()
        .map(|r| MinuteRow {
            ev_id: r.ev_id.clone(),
            minute: r.minute,
            power_kw: r.power_kw,
            connected: r.connected as u8,
        })
        .collect();
    write_rows(&rows, &MINUTE_HEADER)
}

/// Reads minute records. Rows that do not parse or fail validation are
/// skipped and reported; a wrong header is an error.
pub fn read_minute_records<R: Read>(r: R) -> Result<MinuteCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r);
    check_header(&mut rdr, &MINUTE_HEADER)?;
    let mut out = MinuteCsv::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let parsed = row
            .deserialize::<MinuteRow>(None)
            .map_err(|e| e.to_string())
            .and_then(|m| match m.connected {
                0 | 1 => Ok(MinuteRecord::new(m.ev_id, m.minute, m.power_kw, m.connected == 1)),
                c => Err(format!("connected must be 0 or 1, got {c}")),
            })
            .and_then(|rec| rec.validate().map(|_| rec).map_err(|e| e.to_string()));
        match parsed {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.rejected.push(RejectedRow { line, reason }),
        }
    }
    Ok(out)
}

// ----------------------------------------------------------------- hourly

pub const HOURLY_HEADER: [&str; 5] = ["day", "hour", "r_up_kw", "r_down_kw", "r_e20_kw"];

pub fn write_hourly(samples: &[HourlyFlexSample]) -> Result<Vec<u8>> {
    write_rows(samples, &HOURLY_HEADER)
}

pub fn read_hourly<R: Read>(r: R) -> Result<Vec<HourlyFlexSample>> {
    let rows: Vec<HourlyFlexSample> = read_rows(r, &HOURLY_HEADER)?;
    for s in &rows {
        if s.hour > 23 {
            return Err(Error::data(format!("day {}: hour {} out of range", s.day, s.hour)));
        }
        if ![s.r_up_kw, s.r_down_kw, s.r_e20_kw].iter().all(|v| v.is_finite()) {
            return Err(Error::data(format!("day {} hour {}: non-finite value", s.day, s.hour)));
        }
    }
    Ok(rows)
}

// ------------------------------------------------------------------- fits

pub const FIT_HEADER: [&str; 8] =
    ["run", "hour", "flexibility", "threshold_kw", "kappa", "gamma", "n_tail", "nll"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub run: usize,
    pub hour: u8,
    pub flexibility: Flexibility,
    pub threshold_kw: f64,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub n_tail: usize,
    pub nll: Option<f64>,
}

pub fn fit_rows(result: &ExperimentResult) -> Vec<FitRow> {
    let mut out = Vec::new();
    for r in &result.runs {
        for f in Flexibility::ALL {
            let t = &r.solution.tails[f.index()];
            out.push(FitRow {
                run: r.run,
                hour: r.hour,
                flexibility: f,
                threshold_kw: t.threshold_kw,
                kappa: t.fit.map(|x| x.params.kappa),
                gamma: t.fit.map(|x| x.params.gamma),
                n_tail: t.tail_x.len(),
                nll: t.fit.map(|x| x.nll),
            });
        }
    }
    out
}

pub fn write_fits(rows: &[FitRow]) -> Result<Vec<u8>> {
    write_rows(rows, &FIT_HEADER)
}

pub fn read_fits<R: Read>(r: R) -> Result<Vec<FitRow>> {
    read_rows(r, &FIT_HEADER)
}

// ------------------------------------------------------------- ks report

pub const KS_HEADER: [&str; 6] = ["hour", "flexibility", "d_n_mean", "d_n_sd", "p_mean", "p_sd"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub hour: u8,
    pub flexibility: Flexibility,
    pub d_n_mean: f64,
    pub d_n_sd: Option<f64>,
    pub p_mean: f64,
    pub p_sd: Option<f64>,
}

/// Mean and sd of the KS statistic and p-value over runs, per hour and
/// flexibility. Runs without a fit are left out.
pub fn ks_rows(result: &ExperimentResult) -> Vec<KsRow> {
    use crate::evaluate::MeanSd;
    let mut acc: BTreeMap<(u8, Flexibility), Vec<KsResult>> = BTreeMap::new();
    for r in &result.runs {
        for f in Flexibility::ALL {
            if let Some(k) = r.solution.ks[f.index()] {
                acc.entry((r.hour, f)).or_default().push(k);
            }
        }
    }
    acc.into_iter()
        .filter_map(|((hour, flexibility), ks)| {
            let d: Vec<f64> = ks.iter().map(|k| k.d_n).collect();
            let p: Vec<f64> = ks.iter().map(|k| k.p_value).collect();
            let (d, p) = (MeanSd::of(&d)?, MeanSd::of(&p)?);
            Some(KsRow {
                hour,
                flexibility,
                d_n_mean: d.mean,
                d_n_sd: d.sd,
                p_mean: p.mean,
                p_sd: p.sd,
            })
        })
        .collect()
}

pub fn write_ks(rows: &[KsRow]) -> Result<Vec<u8>> {
    write_rows(rows, &KS_HEADER)
}

pub fn read_ks<R: Read>(r: R) -> Result<Vec<KsRow>> {
    read_rows(r, &KS_HEADER)
}

// ------------------------------------------------------------------- bids

pub const BID_HEADER: [&str; 7] =
    ["run", "hour", "method", "alpha", "b_up_kw", "b_down_kw", "feasible"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidRow {
    pub run: usize,
    pub hour: u8,
    pub method: Method,
    pub alpha: f64,
    pub b_up_kw: f64,
    pub b_down_kw: f64,
    pub feasible: bool,
}

impl BidRow {
    pub fn bid(&self) -> crate::solvers::Bid {
        crate::solvers::Bid {
            b_up_kw: self.b_up_kw,
            b_down_kw: self.b_down_kw,
        }
    }
}

/// Bid rows for the requested methods. The scenario row carries the
/// in-sample violation level `eps` in the alpha column.
pub fn bid_rows(result: &ExperimentResult, methods: &[Method]) -> Vec<BidRow> {
    let mut out = Vec::new();
    for r in &result.runs {
        for &m in methods {
            let (bid, alpha, feasible) = match m {
                Method::Analytical => {
                    let a = &r.solution.analytical;
                    (a.bid, result.config.alpha, a.feasible)
                }
                Method::Scenario => (r.solution.scenario.bid, result.config.eps, true),
            };
            out.push(BidRow {
                run: r.run,
                hour: r.hour,
                method: m,
                alpha,
                b_up_kw: bid.b_up_kw,
                b_down_kw: bid.b_down_kw,
                feasible,
            });
        }
    }
    out
}

pub fn write_bids(rows: &[BidRow]) -> Result<Vec<u8>> {
    write_rows(rows, &BID_HEADER)
}

pub fn read_bids<R: Read>(r: R) -> Result<Vec<BidRow>> {
    read_rows(r, &BID_HEADER)
}

// ----------------------------------------------------------------- splits

pub const SPLIT_HEADER: [&str; 4] = ["run", "hour", "split_hash", "in_sample_days"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRow {
    pub run: usize,
    pub hour: u8,
    pub split_hash: String,
    pub in_sample_days: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct SplitRecord {
    run: usize,
    hour: u8,
    split_hash: String,
    in_sample_days: String,
}

pub fn split_rows(result: &ExperimentResult) -> Vec<SplitRow> {
    result
        .runs
        .iter()
        .map(|r| SplitRow {
            run: r.run,
            hour: r.hour,
            split_hash: r.split_hash.clone(),
            in_sample_days: r.in_sample_days.clone(),
        })
        .collect()
}

pub fn write_splits(rows: &[SplitRow]) -> Result<Vec<u8>> {
    let recs: Vec<SplitRecord> = rows
        .iter()
        .map(|r| SplitRecord {
            run: r.run,
            hour: r.hour,
            split_hash: r.split_hash.clone(),
            in_sample_days: r
                .in_sample_days
                .iter()
                .map(i64::to_string)
                .collect::<Vec<_>>()
                .join(";"),
        })
        .collect();
    write_rows(&recs, &SPLIT_HEADER)
}

pub fn read_splits<R: Read>(r: R) -> Result<Vec<SplitRow>> {
    let recs: Vec<SplitRecord> = read_rows(r, &SPLIT_HEADER)?;
    recs.into_iter()
        .map(|s| {
            let days = s
                .in_sample_days
                .split(';')
                .filter(|d| !d.is_empty())
                .map(|d| {
                    d.trim()
                        .parse::<i64>()
                        .map_err(|_| Error::data(format!("bad day '{d}' in split")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SplitRow {
                run: s.run,
                hour: s.hour,
                split_hash: s.split_hash,
                in_sample_days: days,
            })
        })
        .collect()
}

// ----------------------------------------------------------------- prices

pub const PRICE_HEADER: [&str; 4] = ["day", "hour", "pi_up_eur_per_kw", "pi_down_eur_per_kw"];

pub fn write_prices(rows: &[(i64, u8, f64, f64)]) -> Result<Vec<u8>> {
    write_rows(rows, &PRICE_HEADER)
}

pub fn read_prices<R: Read>(r: R) -> Result<Vec<(i64, u8, f64, f64)>> {
    read_rows(r, &PRICE_HEADER)
}

// --------------------------------------------------------- report mirrors

pub const VALIDATION_HEADER: [&str; 9] = [
    "run",
    "hour",
    "method",
    "n_oos",
    "violations_up",
    "violations_down",
    "violations_e20",
    "violations_joint",
    "joint_rate",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub run: usize,
    pub hour: u8,
    pub method: Method,
    #[serde(flatten)]
    pub report: ValidationReport,
}

#[derive(Serialize, Deserialize)]
struct ValidationRecord {
    run: usize,
    hour: u8,
    method: Method,
    n_oos: usize,
    violations_up: usize,
    violations_down: usize,
    violations_e20: usize,
    violations_joint: usize,
    joint_rate: f64,
}

pub fn write_validation(rows: &[ValidationRow]) -> Result<Vec<u8>> {
    let recs: Vec<ValidationRecord> = rows
        .iter()
        .map(|r| ValidationRecord {
            run: r.run,
            hour: r.hour,
            method: r.method,
            n_oos: r.report.n_oos,
            violations_up: r.report.violations_up,
            violations_down: r.report.violations_down,
            violations_e20: r.report.violations_e20,
            violations_joint: r.report.violations_joint,
            joint_rate: r.report.joint_rate,
        })
        .collect();
    write_rows(&recs, &VALIDATION_HEADER)
}

pub fn read_validation<R: Read>(r: R) -> Result<Vec<ValidationRow>> {
    let recs: Vec<ValidationRecord> = read_rows(r, &VALIDATION_HEADER)?;
    Ok(recs
        .into_iter()
        .map(|v| ValidationRow {
            run: v.run,
            hour: v.hour,
            method: v.method,
            report: ValidationReport {
                n_oos: v.n_oos,
                violations_up: v.violations_up,
                violations_down: v.violations_down,
                violations_e20: v.violations_e20,
                violations_joint: v.violations_joint,
                joint_rate: v.joint_rate,
            },
        })
        .collect())
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "method",
    "hour",
    "n_runs",
    "b_up_mean",
    "b_up_sd",
    "b_down_mean",
    "b_down_sd",
    "joint_rate_mean",
    "joint_rate_sd",
];

pub fn write_summary(summaries: &[(Method, &RunSummary)]) -> Result<Vec<u8>> {
    type Row = (Method, u8, usize, f64, Option<f64>, f64, Option<f64>, f64, Option<f64>);
    let rows: Vec<Row> = summaries
        .iter()
        .flat_map(|(m, s)| {
            s.hours.iter().map(move |h| {
                (
                    *m,
                    h.hour,
                    s.n_runs,
                    h.b_up.mean,
                    h.b_up.sd,
                    h.b_down.mean,
                    h.b_down.sd,
                    h.joint_rate.mean,
                    h.joint_rate.sd,
                )
            })
        })
        .collect();
    write_rows(&rows, &SUMMARY_HEADER)
}

pub const CV_HEADER: [&str; 5] = ["hour", "flexibility", "mean", "sd", "cv"];

pub fn write_cv(report: &CvReport) -> Result<Vec<u8>> {
    let rows: Vec<(u8, Flexibility, f64, f64, Option<f64>)> = report
        .entries
        .iter()
        .map(|e| (e.hour, e.flexibility, e.stats.mean, e.stats.sd, e.stats.cv))
        .collect();
    write_rows(&rows, &CV_HEADER)
}

pub const SENSITIVITY_HEADER: [&str; 8] = [
    "run",
    "alpha",
    "hour",
    "b_up_kw",
    "b_down_kw",
    "feasible",
    "total_bid_kw",
    "down_fraction",
];

/// One row per run, alpha and hour; the totals repeat across hours.
pub fn write_sensitivity(curves: &[SensitivityCurve]) -> Result<Vec<u8>> {
    type Row = (usize, f64, u8, f64, f64, bool, f64, Option<f64>);
    let mut rows: Vec<Row> = Vec::new();
    for (run, c) in curves.iter().enumerate() {
        for p in &c.points {
            for h in &p.hours {
                rows.push((
                    run,
                    p.alpha,
                    h.hour,
                    h.bid.b_up_kw,
                    h.bid.b_down_kw,
                    h.feasible,
                    p.total_bid_kw,
                    p.down_fraction,
                ));
            }
        }
    }
    write_rows(&rows, &SENSITIVITY_HEADER)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parsing() {
        let kv = parse_kv("# c\n eps = 0.1 # trailing\n\nseed=7\n").unwrap();
        assert_eq!(kv["eps"], "0.1");
        assert_eq!(kv["seed"], "7");
        assert!(parse_kv("novalue\n").is_err());
        assert!(parse_kv("a=1\na=2\n").is_err());
        let pairs = vec![("a".to_string(), "1".to_string())];
        assert_eq!(parse_kv(&format_kv(&pairs)).unwrap()["a"], "1");
    }

    #[test]
    fn minute_round_trip_and_rejects() {
        let recs = vec![
            MinuteRecord::new("ev1", 0, 3.7, true),
            MinuteRecord::new("ev1", 1, 0.0, false),
        ];
        let bytes = write_minute_records(&recs).unwrap();
        assert!(bytes.starts_with(b"ev_id,minute,power_kw,connected\n"));
        let back = read_minute_records(bytes.as_slice()).unwrap();
        assert_eq!(back.records, recs);
        assert!(back.rejected.is_empty());

        let bad = "ev_id,minute,power_kw,connected\nev1,0,1.0,1\nev1,x,1.0,1\nev1,2,1.0,3\nev1,3,-1.0,1\n";
        let r = read_minute_records(bad.as_bytes()).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.rejected.iter().map(|x| x.line).collect::<Vec<_>>(), vec![3, 4, 5]);
        assert!(read_minute_records("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_minute_file_has_header_only() {
        assert_eq!(write_minute_records(&[]).unwrap(), b"ev_id,minute,power_kw,connected\n");
    }

    #[test]
    fn hourly_round_trip() {
        let s = vec![HourlyFlexSample { day: 3, hour: 19, r_up_kw: 1.5, r_down_kw: 0.25, r_e20_kw: 7.0 }];
        let b = write_hourly(&s).unwrap();
        assert!(b.starts_with(b"day,hour,r_up_kw,r_down_kw,r_e20_kw\n"));
        assert_eq!(read_hourly(b.as_slice()).unwrap(), s);
    }

    #[test]
    fn splits_and_fits_round_trip() {
        let s = vec![SplitRow { run: 1, hour: 2, split_hash: "ab".into(), in_sample_days: vec![0, 5, 9] }];
        assert_eq!(read_splits(write_splits(&s).unwrap().as_slice()).unwrap(), s);
        let f = vec![
            FitRow { run: 0, hour: 1, flexibility: Flexibility::E20, threshold_kw: 2.0, kappa: Some(0.5), gamma: Some(1.5), n_tail: 22, nll: Some(3.0) },
            FitRow { run: 0, hour: 1, flexibility: Flexibility::Up, threshold_kw: 0.0, kappa: None, gamma: None, n_tail: 0, nll: None },
        ];
        let b = write_fits(&f).unwrap();
        assert!(String::from_utf8_lossy(&b).contains("0,1,up,0.0,,,0,"));
        assert_eq!(read_fits(b.as_slice()).unwrap(), f);
    }

    #[test]
    fn atomic_write_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.csv");
        let m = Manifest::new("test", "h".into(), 1);
        write_csv_artifact(&p, b"a\n", &m).unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"a\n");
        let side: Manifest = serde_json::from_slice(&fs::read(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(side, m);
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
        let m2 = m.with_input(&p).unwrap();
        assert_eq!(m2.inputs["x.csv"], sha256_hex(b"a\n"));
    }
}
