//! Schema-driven reading and writing of delimited event logs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use adsage_core::event::presets;
use adsage_core::event::schema::{FieldKind, FilterOp, Transform};
use adsage_core::event::{retain_users, sample_users, FeatureSchema, Label, RawEvent, SampleOptions};
use adsage_core::model::{component_rng, streams};
use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{ToolError, ToolResult};

/// Rejected rows tolerated before a file is refused.
pub const DEFAULT_MAX_REJECT_FRACTION: f64 = 0.01;

/// A preset name or the path of a TOML schema file.
pub fn load_schema(spec: &str) -> ToolResult<FeatureSchema> {
    let schema = match presets::preset(spec) {
        Some(s) => s,
        None => {
            let path = Path::new(spec);
            if !path.is_file() {
                return Err(ToolError::Config(format!(
                    "schema `{spec}` is neither a preset ({}) nor a file",
                    presets::PRESET_NAMES.join(", ")
                )));
            }
            let text = std::fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
            toml::from_str(&text).map_err(|e| ToolError::Config(format!("{}: {e}", path.display())))?
        }
    };
    schema.validate()?;
    Ok(schema)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOptions {
    pub sample: SampleOptions,
    /// Seed of the user sample.
    pub seed: u64,
    pub max_reject_fraction: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            sample: SampleOptions::default(),
            seed: 0,
            max_reject_fraction: DEFAULT_MAX_REJECT_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// One-based line in the file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parsed {
    /// Sorted by timestamp; ties keep file order.
    pub events: Vec<RawEvent>,
    pub rejects: Vec<Reject>,
    /// Data rows read, excluding the header.
    pub rows: u64,
    /// Rows dropped by schema filters.
    pub filtered: u64,
}

pub fn parse_events(path: &Path, schema: &FeatureSchema, options: &ParseOptions) -> ToolResult<Parsed> {
    let file = File::open(path).map_err(|e| ToolError::io(path, e))?;
    parse_reader(BufReader::new(file), path, schema, options)
}

/// Parses events from `reader`; `origin` only labels error messages.
pub fn parse_reader<R: Read>(
    reader: R,
    origin: &Path,
    schema: &FeatureSchema,
    options: &ParseOptions,
) -> ToolResult<Parsed> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(schema)?)
        .has_headers(schema.header)
        .flexible(true)
        .from_reader(reader);
    let mut out = Parsed::default();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(ToolError::parse(origin, e.to_string()));
                }
                out.rows += 1;
                out.rejects.push(Reject {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        }
        out.rows += 1;
        let line = record.position().map_or(out.rows, |p| p.line());
        match parse_row(&record, line, schema) {
            Ok(Some(ev)) => out.events.push(ev),
            Ok(None) => out.filtered += 1,
            Err(reason) => out.rejects.push(Reject { line, reason }),
        }
    }
    if !out.rejects.is_empty() {
        let frac = out.rejects.len() as f64 / out.rows as f64;
        for r in out.rejects.iter().take(5) {
            log::warn!("{}:{}: {}", origin.display(), r.line, r.reason);
        }
        if frac > options.max_reject_fraction {
            let first = &out.rejects[0];
            return Err(ToolError::parse(
                origin,
                format!(
                    "{} of {} rows rejected (first at line {}: {})",
                    out.rejects.len(),
                    out.rows,
                    first.line,
                    first.reason
                ),
            ));
        }
    }
    out.events.sort_by_key(|e| e.timestamp);
    if options.sample.user_sample_rate < 1.0 || options.sample.exclude_malicious {
        let mut rng = component_rng(options.seed, streams::USER_SAMPLE);
        let users = sample_users(&out.events, &options.sample, &mut rng)?;
        retain_users(&mut out.events, &users);
    }
    Ok(out)
}

fn delimiter_byte(schema: &FeatureSchema) -> ToolResult<u8> {
    u8::try_from(schema.delimiter)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| ToolError::Config(format!("delimiter {:?} is not a single ASCII byte", schema.delimiter)))
}

/// Host part of a URL, without scheme, credentials, port or path.
pub fn url_domain(url: &str) -> &str {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let host = rest.split(['/', '?', '#']).next().unwrap_or("");
    let host = host.rsplit_once('@').map_or(host, |(_, h)| h);
    host.split(':').next().unwrap_or("")
}

fn apply(transform: Option<Transform>, value: &str) -> String {
    match transform {
        None => value.to_string(),
        Some(Transform::Lowercase) => value.to_lowercase(),
        Some(Transform::UrlDomain) => url_domain(value).to_lowercase(),
    }
}

pub fn parse_timestamp(cell: &str, schema: &FeatureSchema) -> Result<i64, String> {
    let cell = cell.trim();
    if schema.time_format == "epoch" {
        let t: i64 = cell.parse().map_err(|_| format!("bad epoch timestamp `{cell}`"))?;
        return Ok(t + schema.utc_offset_seconds);
    }
    NaiveDateTime::parse_from_str(cell, &schema.time_format)
        .or_else(|_| NaiveDate::parse_from_str(cell, &schema.time_format).map(|d| d.and_time(Default::default())))
        .map(|t| t.and_utc().timestamp())
        .map_err(|e| format!("timestamp `{cell}` does not match `{}`: {e}", schema.time_format))
}

pub fn format_timestamp(ts: i64, schema: &FeatureSchema) -> String {
    if schema.time_format == "epoch" {
        return (ts - schema.utc_offset_seconds).to_string();
    }
    DateTime::from_timestamp(ts, 0)
        .map(|t| t.naive_utc().format(&schema.time_format).to_string())
        .unwrap_or_default()
}

/// Parses one row; `Ok(None)` when a filter drops it.
pub fn parse_row(record: &csv::StringRecord, line: u64, schema: &FeatureSchema) -> Result<Option<RawEvent>, String> {
    let cell = |c: usize| {
        record
            .get(c)
            .ok_or_else(|| format!("row has {} columns, column {c} is missing", record.len()))
    };
    for f in &schema.filters {
        if !f.keeps(cell(f.column)?.trim()) {
            return Ok(None);
        }
    }
    let mut ev = RawEvent {
        key: line,
        timestamp: 0,
        user: String::new(),
        source: String::new(),
        destinations: Vec::new(),
        numerics: Vec::new(),
        categoricals: Vec::new(),
        texts: Vec::new(),
        label: Label::Normal,
    };
    let mut user = None;
    for f in &schema.fields {
        let raw = cell(f.column)?;
        let value = raw.trim();
        match f.kind {
            FieldKind::Timestamp => ev.timestamp = parse_timestamp(value, schema)?,
            FieldKind::Key => {
                ev.key = value.parse().map_err(|_| format!("bad key `{value}` in `{}`", f.name))?;
            }
            FieldKind::User => user = Some(apply(f.transform, value)),
            FieldKind::Source => {
                if value.is_empty() {
                    return Err(format!("empty source `{}`", f.name));
                }
                ev.source = apply(f.transform, value);
            }
            FieldKind::Destination => {
                let names: Vec<String> = if f.multi {
                    let sep = f.separator.as_deref().unwrap_or(";");
                    value
                        .split(sep)
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| apply(f.transform, s))
                        .collect()
                } else if value.is_empty() {
                    return Err(format!("empty destination `{}`", f.name));
                } else {
                    vec![apply(f.transform, value)]
                };
                ev.destinations.push(names);
            }
            FieldKind::Numeric => {
                let v: f64 = value
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| format!("bad number `{value}` in `{}`", f.name))?;
                ev.numerics.push(v);
            }
            FieldKind::Categorical => ev.categoricals.push(apply(f.transform, value)),
            FieldKind::Text => ev.texts.push(raw.to_string()),
            FieldKind::Label => ev.label = Label::parse(value),
        }
    }
    ev.user = user.unwrap_or_else(|| ev.source.clone());
    Ok(Some(ev))
}

/// Writes events in the column layout of `schema`, so that parsing the
/// output with the same schema yields the same events.
pub fn write_events<W: Write>(writer: W, events: &[RawEvent], schema: &FeatureSchema) -> ToolResult<()> {
    schema.validate()?;
    let width = schema.max_column() + 1;
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter_byte(schema)?)
        .flexible(false)
        .from_writer(writer);
    let mut row = vec![String::new(); width];
    let csv_err = |e: csv::Error| ToolError::Data(e.to_string());
    if schema.header {
        for (i, cell) in row.iter_mut().enumerate() {
            *cell = format!("col{i}");
        }
        for f in &schema.fields {
            row[f.column] = f.name.clone();
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    for ev in events {
        row.iter_mut().for_each(String::clear);
        for f in schema.filters.iter().filter(|f| f.op == FilterOp::Equals) {
            row[f.column] = f.value.clone();
        }
        let (mut d, mut n, mut c, mut t) = (0, 0, 0, 0);
        for f in &schema.fields {
            let cell = &mut row[f.column];
            match f.kind {
                FieldKind::Timestamp => *cell = format_timestamp(ev.timestamp, schema),
                FieldKind::Key => *cell = ev.key.to_string(),
                FieldKind::User => *cell = ev.user.clone(),
                FieldKind::Source => *cell = ev.source.clone(),
                FieldKind::Destination => {
                    let sep = f.separator.as_deref().unwrap_or(";");
                    *cell = ev.destinations[d].join(sep);
                    d += 1;
                }
                FieldKind::Numeric => {
                    *cell = ev.numerics[n].to_string();
                    n += 1;
                }
                FieldKind::Categorical => {
                    *cell = ev.categoricals[c].clone();
                    c += 1;
                }
                FieldKind::Text => {
                    *cell = ev.texts[t].clone();
                    t += 1;
                }
                FieldKind::Label => *cell = ev.label.scenario().unwrap_or("0").to_string(),
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| ToolError::Data(e.to_string()))
}

pub fn write_events_file(path: &Path, events: &[RawEvent], schema: &FeatureSchema) -> ToolResult<()> {
    let file = File::create(path).map_err(|e| ToolError::io(path, e))?;
    write_events(BufWriter::new(file), events, schema)
}
