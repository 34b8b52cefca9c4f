use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::record::{DailyRecord, SubjectDataset, SubjectId};
use super::{working_day_flag, WORKING_DAY_FEATURE};
use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Empty cells, `NaN` and the device sentinel `-1` are missing.
fn parse_cell(raw: &str, line: u64, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| Error::Csv {
        line,
        message: format!("column {column}: cannot parse {s:?} as a number"),
    })?;
    if v == -1.0 || !v.is_finite() {
        Ok(None)
    } else {
        Ok(Some(v))
    }
}

/// Read the `subject_id,date,<features...>,sleep_score` schema from a file.
pub fn parse_csv(path: impl AsRef<Path>) -> Result<Vec<SubjectDataset>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<SubjectDataset>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let cols: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if cols.len() < 3 || cols[0] != "subject_id" || cols[1] != "date" || cols.last().map(String::as_str) != Some("sleep_score") {
        return Err(Error::Csv {
            line: 1,
            message: "header must be subject_id,date,<features...>,sleep_score".into(),
        });
    }
    let feature_names: Vec<String> = cols[2..cols.len() - 1].to_vec();
    let working_col = feature_names.iter().position(|n| n == WORKING_DAY_FEATURE);

    let mut by_subject: BTreeMap<SubjectId, Vec<DailyRecord>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != cols.len() {
            return Err(Error::Csv {
                line,
                message: format!("expected {} fields, found {}", cols.len(), row.len()),
            });
        }
        let subject: u32 = row[0].trim().parse().map_err(|_| Error::Csv {
            line,
            message: format!("bad subject_id {:?}", &row[0]),
        })?;
        let date = NaiveDate::parse_from_str(row[1].trim(), DATE_FORMAT).map_err(|_| Error::Csv {
            line,
            message: format!("bad date {:?}, expected YYYY-MM-DD", &row[1]),
        })?;
        let mut features = Vec::with_capacity(feature_names.len());
        for (j, name) in feature_names.iter().enumerate() {
            features.push(parse_cell(&row[j + 2], line, name)?);
        }
        if let Some(w) = working_col {
            if features[w].is_none() {
                features[w] = Some(working_day_flag(date));
            }
        }
        let sleep_score = parse_cell(&row[cols.len() - 1], line, "sleep_score")?;
        by_subject.entry(SubjectId(subject)).or_default().push(DailyRecord {
            date,
            features,
            sleep_score,
        });
    }

    by_subject
        .into_iter()
        .map(|(subject, mut records)| {
            records.sort_by_key(|r| r.date);
            if let Some(w) = records.windows(2).find(|w| w[0].date == w[1].date) {
                return Err(Error::Conflict { subject, date: w[0].date });
            }
            SubjectDataset::new(subject, feature_names.clone(), records)
        })
        .collect()
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write datasets sharing one feature registry in the input schema.
pub fn write_csv_to<W: Write>(writer: W, datasets: &[SubjectDataset]) -> Result<()> {
    let names = match datasets.first() {
        Some(d) => &d.feature_names,
        None => return Err(Error::InvalidParameter("no datasets to write".into())),
    };
    if let Some(d) = datasets.iter().find(|d| &d.feature_names != names) {
        return Err(Error::Data {
            subject: d.subject,
            message: "feature registry differs from the first dataset".into(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Csv {
        line: 0,
        message: e.to_string(),
    };
    let mut header = vec!["subject_id".to_string(), "date".to_string()];
    header.extend(names.iter().cloned());
    header.push("sleep_score".into());
    w.write_record(&header).map_err(to_err)?;
    for d in datasets {
        for r in &d.records {
            let mut row = Vec::with_capacity(header.len());
            row.push(d.subject.to_string());
            row.push(r.date.format(DATE_FORMAT).to_string());
            row.extend(r.features.iter().map(|v| fmt_cell(*v)));
            row.push(fmt_cell(r.sleep_score));
            w.write_record(&row).map_err(to_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, datasets: &[SubjectDataset]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(std::io::BufWriter::new(file), datasets)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "subject_id,date,steps,stress,is_working_day,sleep_score\n";

    #[test]
    fn groups_by_subject_and_sorts() {
        let mut s = HEADER.to_string();
        for subject in [2, 1] {
            for day in (1..=30).rev() {
                s += &format!("{subject},2024-03-{day:02},{},{},,{}\n", day * 100, 30, 60 + day);
            }
        }
        let ds = read_csv(s.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds[0].subject, SubjectId(1));
        assert!(ds.iter().all(|d| d.len() == 30));
        assert!(ds[0].records.windows(2).all(|w| w[0].date < w[1].date));
        // 2024-03-01 is a Friday, 2024-03-02 a Saturday
        assert_eq!(ds[0].records[0].features[2], Some(1.0));
        assert_eq!(ds[0].records[1].features[2], Some(0.0));
    }

    #[test]
    fn sentinel_and_empty_are_missing() {
        let s = format!("{HEADER}1,2024-01-01,-1,,1,-1\n1,2024-01-02,NaN,4.5,1,80\n");
        let ds = read_csv(s.as_bytes()).unwrap();
        let r = &ds[0].records;
        assert_eq!(r[0].features[0], None);
        assert_eq!(r[0].features[1], None);
        assert_eq!(r[0].sleep_score, None);
        assert_eq!(r[1].features[0], None);
        assert_eq!(r[1].features[1], Some(4.5));
    }

    #[test]
    fn bad_date_names_line() {
        let s = format!("{HEADER}1,2024-01-01,1,1,1,70\n1,01/02/2024,1,1,1,70\n");
        match read_csv(s.as_bytes()).unwrap_err() {
            Error::Csv { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("date"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn duplicate_day_conflicts() {
        let s = format!("{HEADER}1,2024-01-01,1,1,1,70\n1,2024-01-01,2,2,1,71\n");
        assert!(matches!(read_csv(s.as_bytes()).unwrap_err(), Error::Conflict { .. }));
    }

    #[test]
    fn malformed_rows() {
        let s = format!("{HEADER}1,2024-01-01,1,1,70\n");
        assert!(matches!(read_csv(s.as_bytes()).unwrap_err(), Error::Csv { line: 2, .. }));
        let s = format!("{HEADER}x,2024-01-01,1,1,1,70\n");
        assert!(matches!(read_csv(s.as_bytes()).unwrap_err(), Error::Csv { line: 2, .. }));
        let s = "subject,date,a,sleep_score\n";
        assert!(matches!(read_csv(s.as_bytes()).unwrap_err(), Error::Csv { line: 1, .. }));
    }
}
