//! Pretrained word vectors in the whitespace-separated text format.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use adsage_core::event::WordVectorTable;

use crate::error::{ToolError, ToolResult};

/// Reads `token v1 … vd` lines, keeping at most `limit` distinct tokens.
/// A repeated token keeps its first vector.
pub fn load_word_vectors(path: &Path, limit: Option<usize>) -> ToolResult<WordVectorTable> {
    let file = File::open(path).map_err(|e| ToolError::io(path, e))?;
    read_word_vectors(BufReader::new(file), path, limit)
}

pub fn read_word_vectors<R: BufRead>(reader: R, origin: &Path, limit: Option<usize>) -> ToolResult<WordVectorTable> {
    let mut table: Option<WordVectorTable> = None;
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ToolError::io(origin, e))?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        values.clear();
        for p in parts {
            let v: f64 = p
                .parse()
                .map_err(|_| ToolError::parse(origin, format!("line {}: bad value `{p}`", i + 1)))?;
            values.push(v);
        }
        if values.is_empty() {
            return Err(ToolError::parse(origin, format!("line {}: token without vector", i + 1)));
        }
        let t = table.get_or_insert_with(|| WordVectorTable::new(values.len()));
        if t.dim() != values.len() {
            return Err(ToolError::parse(
                origin,
                format!("line {}: dimension {} differs from {}", i + 1, values.len(), t.dim()),
            ));
        }
        if limit.is_some_and(|l| t.len() >= l) && t.get(token).is_none() {
            break;
        }
        if !t.insert(token, &values)? {
            log::warn!("{}:{}: duplicate token `{token}` ignored", origin.display(), i + 1);
        }
    }
    table.ok_or_else(|| ToolError::parse(origin, "no word vectors"))
}
