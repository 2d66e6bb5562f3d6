//! Reading paired samples and reading/writing study reports.
//!
//! Sample files hold two numeric columns separated by commas or tabs, with an
//! optional header line. Reports are written as JSON or CSV; CSV floats carry
//! 17 significant digits so that every value survives a round trip exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, XiError};
use crate::ranks::Sample;
use crate::simulation::{ReportRow, StudyKind, StudyReport};

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> XiError {
    XiError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> XiError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    parse_error(line, 0, e.to_string())
}

fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Parses a two-column sample. The first line is treated as a header when
/// none of its fields is a number. Missing and non-finite values are
/// rejected with their 1-based line and column.
pub fn parse_sample(text: &str) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let (mut x, mut y) = (vec![], vec![]);
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(k + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if k == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() != 2 {
            return Err(parse_error(
                line,
                record.len().min(2) + 1,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let mut values = [0.0; 2];
        for (c, field) in record.iter().enumerate() {
            if field.is_empty() {
                return Err(parse_error(line, c + 1, "missing value"));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(line, c + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(line, c + 1, format!("non-finite value {field:?}")));
            }
            values[c] = v;
        }
        x.push(values[0]);
        y.push(values[1]);
    }
    Sample::new(x, y)
}

pub fn load_sample(path: &Path) -> Result<Sample> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_sample(&text)
}

/// Report file formats, chosen from the file extension by [`ReportFormat::from_path`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Ok(ReportFormat::Json),
            Some(e) if e.eq_ignore_ascii_case("csv") => Ok(ReportFormat::Csv),
            _ => Err(XiError::Config(format!(
                "cannot infer report format from {}; use .json or .csv",
                path.display()
            ))),
        }
    }
}

pub fn write_report_json<W: Write>(report: &StudyReport, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| XiError::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

pub fn read_report_json<R: Read>(r: R) -> Result<StudyReport> {
    serde_json::from_reader(r).map_err(|e| parse_error(e.line(), e.column(), e.to_string()))
}

const CSV_COLUMNS: [&str; 24] = [
    "schema_version",
    "kind",
    "method",
    "n",
    "M",
    "rho0",
    "rho",
    "replicates",
    "B",
    "alpha",
    "master_seed",
    "rejection_frequency",
    "mean",
    "variance",
    "variance_ratio",
    "scaled_variance",
    "ks_distance",
    "q25",
    "median",
    "q75",
    "population_xi",
    "median_seconds",
    "median_seconds_ranked",
    "report_seed",
];

/// 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_f(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn opt_u(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn kind_name(kind: StudyKind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn row_record(report: &StudyReport, r: &ReportRow) -> Vec<String> {
    vec![
        report.schema_version.to_string(),
        kind_name(report.kind),
        r.method.clone(),
        r.n.to_string(),
        opt_u(r.m),
        opt_f(r.rho0),
        opt_f(r.rho),
        r.replicates.to_string(),
        opt_u(r.b),
        opt_f(r.alpha),
        r.master_seed.to_string(),
        opt_f(r.rejection_frequency),
        opt_f(r.mean),
        opt_f(r.variance),
        opt_f(r.variance_ratio),
        opt_f(r.scaled_variance),
        opt_f(r.ks_distance),
        opt_f(r.q25),
        opt_f(r.median),
        opt_f(r.q75),
        opt_f(r.population_xi),
        opt_f(r.median_seconds),
        opt_f(r.median_seconds_ranked),
        report.master_seed.to_string(),
    ]
}

/// One header line, then one line per row. Report-level fields repeat on every row.
pub fn write_report_csv<W: Write>(report: &StudyReport, w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    let io_err = |e: csv::Error| XiError::Io(e.to_string());
    writer.write_record(CSV_COLUMNS).map_err(io_err)?;
    for row in &report.rows {
        writer.write_record(row_record(report, row)).map_err(io_err)?;
    }
    writer.flush()?;
    Ok(())
}

struct Field<'a> {
    line: usize,
    column: usize,
    text: &'a str,
}

impl Field<'_> {
    fn parse<T: std::str::FromStr>(&self) -> Result<T> {
        self.text.parse().map_err(|_| {
            parse_error(self.line, self.column, format!("invalid value {:?}", self.text))
        })
    }

    fn opt<T: std::str::FromStr>(&self) -> Result<Option<T>> {
        if self.text.is_empty() {
            Ok(None)
        } else {
            self.parse().map(Some)
        }
    }
}

pub fn read_report_csv<R: Read>(r: R) -> Result<StudyReport> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers().map_err(csv_error)?.clone();
    let mut index = [0usize; CSV_COLUMNS.len()];
    for (k, name) in CSV_COLUMNS.iter().enumerate() {
        index[k] = header
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| parse_error(1, 0, format!("missing column {name}")))?;
    }
    let mut meta: Option<(u32, StudyKind, u64)> = None;
    let mut rows = vec![];
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let f = |k: usize| Field {
            line,
            column: index[k] + 1,
            text: record.get(index[k]).unwrap_or(""),
        };
        let kind_text = f(1).text;
        let kind: StudyKind = serde_json::from_value(serde_json::Value::String(kind_text.into()))
            .map_err(|_| parse_error(line, index[1] + 1, format!("unknown kind {kind_text:?}")))?;
        let this = (f(0).parse()?, kind, f(23).parse()?);
        match meta {
            None => meta = Some(this),
            Some(m) if m != this => {
                return Err(parse_error(line, 0, "report-level fields differ between rows"))
            }
            _ => {}
        }
        rows.push(ReportRow {
            method: f(2).text.to_string(),
            n: f(3).parse()?,
            m: f(4).opt()?,
            rho0: f(5).opt()?,
            rho: f(6).opt()?,
            replicates: f(7).parse()?,
            b: f(8).opt()?,
            alpha: f(9).opt()?,
            master_seed: f(10).parse()?,
            rejection_frequency: f(11).opt()?,
            mean: f(12).opt()?,
            variance: f(13).opt()?,
            variance_ratio: f(14).opt()?,
            scaled_variance: f(15).opt()?,
            ks_distance: f(16).opt()?,
            q25: f(17).opt()?,
            median: f(18).opt()?,
            q75: f(19).opt()?,
            population_xi: f(20).opt()?,
            median_seconds: f(21).opt()?,
            median_seconds_ranked: f(22).opt()?,
        });
    }
    let (schema_version, kind, master_seed) =
        meta.ok_or_else(|| parse_error(1, 0, "CSV report has no rows"))?;
    Ok(StudyReport {
        schema_version,
        kind,
        master_seed,
        rows,
    })
}

pub fn write_report(report: &StudyReport, path: &Path) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    match ReportFormat::from_path(path)? {
        ReportFormat::Json => write_report_json(report, w),
        ReportFormat::Csv => write_report_csv(report, w),
    }
}

pub fn read_report(path: &Path) -> Result<StudyReport> {
    let r = BufReader::new(File::open(path)?);
    match ReportFormat::from_path(path)? {
        ReportFormat::Json => read_report_json(r),
        ReportFormat::Csv => read_report_csv(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comma_and_tab_with_header() {
        let s = parse_sample("x,y\n1,2\n3.5,-4\n\n").unwrap();
        assert_eq!(s.x(), &[1.0, 3.5]);
        assert_eq!(s.y(), &[2.0, -4.0]);
        let t = parse_sample("1\t2\n3\t4e-3\n").unwrap();
        assert_eq!(t.y(), &[2.0, 0.004]);
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse_sample("x,y\n1,2\n3,\n").unwrap_err();
        assert_eq!(
            err,
            XiError::Parse {
                line: 3,
                column: 2,
                message: "missing value".into()
            }
        );
        match parse_sample("1,foo\n") {
            Err(XiError::Parse { line: 1, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_sample("1,2\n3,abc\n") {
            Err(XiError::Parse { line: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_sample("1,2\n3,4,5\n") {
            Err(XiError::Parse { line: 2, column: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_sample("1,2\nnan,4\n") {
            Err(XiError::Parse { line: 2, column: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_sample("x,y\n1,2\n"), Err(XiError::Size { .. })));
    }

    fn sample_report() -> StudyReport {
        StudyReport {
            schema_version: crate::simulation::SCHEMA_VERSION,
            kind: StudyKind::Power,
            master_seed: u64::MAX,
            rows: vec![
                ReportRow {
                    method: "xi-pm".into(),
                    n: 1000,
                    m: Some(20),
                    rho0: Some(5.0),
                    rho: Some(5.0 / 1000f64.sqrt()),
                    replicates: 500,
                    b: Some(999),
                    alpha: Some(0.05),
                    master_seed: u64::MAX,
                    rejection_frequency: Some(0.1 + 0.2),
                    ..ReportRow::default()
                },
                ReportRow {
                    method: "pearson".into(),
                    n: 1000,
                    replicates: 500,
                    master_seed: u64::MAX,
                    mean: Some(-1e-300),
                    median_seconds: Some(std::f64::consts::PI),
                    ..ReportRow::default()
                },
            ],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let report = sample_report();
        let mut buf = vec![];
        write_report_csv(&report, &mut buf).unwrap();
        let back = read_report_csv(buf.as_slice()).unwrap();
        assert_eq!(back, report);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("3.0000000000000004e-1"), "{text}");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let report = sample_report();
        let mut buf = vec![];
        write_report_json(&report, &mut buf).unwrap();
        assert_eq!(read_report_json(buf.as_slice()).unwrap(), report);
    }

    #[test]
    fn format_has_17_significant_digits() {
        for &v in &[0.1, 1.0 / 3.0, 12345.678, -2.5e-10] {
            let s = format_f64(v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(ReportFormat::from_path(Path::new("a.JSON")).unwrap(), ReportFormat::Json);
        assert_eq!(ReportFormat::from_path(Path::new("a.csv")).unwrap(), ReportFormat::Csv);
        assert!(ReportFormat::from_path(Path::new("a.txt")).is_err());
    }
}
