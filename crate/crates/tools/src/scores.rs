//! Scored-event files shared by every detector:
//! `key,user,timestamp,score[,label]`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use adsage_core::eval::ScoredEvent;
use adsage_core::event::Label;

use crate::error::{ToolError, ToolResult};

pub const SCORE_HEADER: [&str; 5] = ["key", "user", "timestamp", "score", "label"];

/// Scores are written in shortest round-trip form, so reading a file back
/// recovers the exact values.
pub fn write_scores<W: Write>(writer: W, scored: &[ScoredEvent]) -> ToolResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| ToolError::Data(e.to_string());
    w.write_record(SCORE_HEADER).map_err(err)?;
    for s in scored {
        w.write_record([
            s.key.to_string(),
            s.user.clone(),
            s.timestamp.to_string(),
            s.score.to_string(),
            s.label.scenario().unwrap_or("0").to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| ToolError::Data(e.to_string()))
}

pub fn write_scores_file(path: &Path, scored: &[ScoredEvent]) -> ToolResult<()> {
    let file = File::create(path).map_err(|e| ToolError::io(path, e))?;
    write_scores(std::io::BufWriter::new(file), scored)
}

/// Reads a score file with a header row. The label column is optional,
/// which lets externally produced scores be evaluated with a label file.
pub fn read_scores<R: Read>(reader: R, origin: &Path) -> ToolResult<Vec<ScoredEvent>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ToolError::parse(origin, e.to_string()))?;
        let line = i + 2;
        let bad = |what: &str| ToolError::parse(origin, format!("line {line}: {what}"));
        if !(4..=5).contains(&rec.len()) {
            return Err(bad("expected key,user,timestamp,score[,label]"));
        }
        let score: f64 = rec[3].trim().parse().map_err(|_| bad("bad score"))?;
        if score.is_nan() {
            return Err(bad("score is NaN"));
        }
        out.push(ScoredEvent {
            key: rec[0].trim().parse().map_err(|_| bad("bad key"))?,
            user: rec[1].trim().to_string(),
            timestamp: rec[2].trim().parse().map_err(|_| bad("bad timestamp"))?,
            score,
            label: rec.get(4).map_or(Label::Normal, Label::parse),
        });
    }
    Ok(out)
}

pub fn read_scores_file(path: &Path) -> ToolResult<Vec<ScoredEvent>> {
    let file = File::open(path).map_err(|e| ToolError::io(path, e))?;
    read_scores(std::io::BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_column_files_are_accepted() {
        let s = read_scores("key,user,timestamp,score\n3,A,100,0.25\n".as_bytes(), Path::new("s")).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].score, 0.25);
        assert_eq!(s[0].label, Label::Normal);
    }

    #[test]
    fn labels_survive() {
        let s = vec![ScoredEvent {
            key: 1,
            user: "U".into(),
            timestamp: -5,
            score: 0.1 + 0.2,
            label: Label::Malicious("exfil".into()),
        }];
        let mut buf = Vec::new();
        write_scores(&mut buf, &s).unwrap();
        assert_eq!(read_scores(buf.as_slice(), Path::new("s")).unwrap(), s);
    }

    #[test]
    fn nan_rejected() {
        assert!(read_scores("key,user,timestamp,score\n1,A,0,NaN\n".as_bytes(), Path::new("s")).is_err());
    }
}
