//! Label files: one malicious user-day per row, `user,date,scenario`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use adsage_core::eval::LabelRecord;
use adsage_core::event::time::{civil_from_days, days_from_civil};
use chrono::{Datelike, NaiveDate};

use crate::error::{ToolError, ToolResult};

pub const LABEL_HEADER: [&str; 3] = ["user", "date", "scenario"];

pub fn format_day(day: i64) -> String {
    let (y, m, d) = civil_from_days(day);
    format!("{y:04}-{m:02}-{d:02}")
}

pub fn parse_day(text: &str) -> Option<i64> {
    let d = NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d").ok()?;
    Some(days_from_civil(d.year() as i64, d.month(), d.day()))
}

pub fn write_labels<W: Write>(writer: W, labels: &[LabelRecord]) -> ToolResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| ToolError::Data(e.to_string());
    w.write_record(LABEL_HEADER).map_err(err)?;
    for l in labels {
        w.write_record([l.user.as_str(), &format_day(l.day), &l.scenario]).map_err(err)?;
    }
    w.flush().map_err(|e| ToolError::Data(e.to_string()))
}

pub fn write_labels_file(path: &Path, labels: &[LabelRecord]) -> ToolResult<()> {
    let file = File::create(path).map_err(|e| ToolError::io(path, e))?;
    write_labels(std::io::BufWriter::new(file), labels)
}

pub fn read_labels<R: Read>(reader: R, origin: &Path) -> ToolResult<Vec<LabelRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ToolError::parse(origin, e.to_string()))?;
        let line = i + 2;
        let bad = |what: &str| ToolError::parse(origin, format!("line {line}: {what}"));
        if rec.len() != 3 {
            return Err(bad("expected user,date,scenario"));
        }
        let day = parse_day(&rec[1]).ok_or_else(|| bad("date must be YYYY-MM-DD"))?;
        let scenario = rec[2].trim();
        if scenario.is_empty() {
            return Err(bad("empty scenario tag"));
        }
        out.push(LabelRecord {
            user: rec[0].trim().to_string(),
            day,
            scenario: scenario.to_string(),
        });
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn read_labels_file(path: &Path) -> ToolResult<Vec<LabelRecord>> {
    let file = File::open(path).map_err(|e| ToolError::io(path, e))?;
    read_labels(std::io::BufReader::new(file), path)
}
