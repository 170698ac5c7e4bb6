use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EMBEDDING_DIM: usize = 20;
pub const DEFAULT_TEXT_TOKEN_CAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Timestamp,
    /// Identity used for per-user state and user-day grouping. Defaults to
    /// the source entity when absent.
    User,
    Source,
    Destination,
    Numeric,
    Categorical,
    Text,
    /// Ground truth: empty or `0`/`normal` is normal, anything else is a
    /// scenario tag.
    Label,
    /// Event identifier; the line number is used when absent.
    Key,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Lowercase,
    /// Host part of a URL.
    UrlDomain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    /// Zero-based column position.
    pub column: usize,
    /// Destination holding a list of entities (pooled by embedding bag).
    #[serde(default)]
    pub multi: bool,
    #[serde(default)]
    pub separator: Option<String>,
    /// Entity space; fields sharing a space share one vocabulary and one
    /// embedding table. Defaults to the field name.
    #[serde(default)]
    pub space: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub transform: Option<Transform>,
}

impl FieldSpec {
    pub fn new(name: &str, kind: FieldKind, column: usize) -> Self {
        Self {
            name: name.to_string(),
            kind,
            column,
            multi: false,
            separator: None,
            space: None,
            dim: None,
            transform: None,
        }
    }

    pub fn in_space(mut self, space: &str) -> Self {
        self.space = Some(space.to_string());
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }

    pub fn multi(mut self, separator: &str) -> Self {
        self.multi = true;
        self.separator = Some(separator.to_string());
        self
    }

    pub fn with_transform(mut self, t: Transform) -> Self {
        self.transform = Some(t);
        self
    }

    pub fn space_name(&self) -> &str {
        self.space.as_deref().unwrap_or(&self.name)
    }

    pub fn is_entity(&self) -> bool {
        matches!(self.kind, FieldKind::Source | FieldKind::Destination)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOp {
    Equals,
    NotEquals,
    NotPrefix,
    NotSuffix,
    NotContains,
}

/// Row predicate applied at ingestion; rows failing any filter are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: usize,
    pub op: FilterOp,
    pub value: String,
}

impl RowFilter {
    pub fn keeps(&self, cell: &str) -> bool {
        match self.op {
            FilterOp::Equals => cell.eq_ignore_ascii_case(&self.value),
            FilterOp::NotEquals => !cell.eq_ignore_ascii_case(&self.value),
            FilterOp::NotPrefix => !cell.starts_with(self.value.as_str()),
            FilterOp::NotSuffix => !cell.ends_with(self.value.as_str()),
            FilterOp::NotContains => !cell.contains(self.value.as_str()),
        }
    }
}

fn default_delimiter() -> char {
    ','
}

fn default_token_cap() -> usize {
    DEFAULT_TEXT_TOKEN_CAP
}

/// Declarative description of an event source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub header: bool,
    /// `epoch` for integer seconds, otherwise a strftime pattern.
    pub time_format: String,
    /// Added to epoch timestamps to move them into the analysis zone.
    #[serde(default)]
    pub utc_offset_seconds: i64,
    #[serde(default = "default_token_cap")]
    pub text_token_cap: usize,
    #[serde(rename = "field")]
    pub fields: Vec<FieldSpec>,
    #[serde(default, rename = "filter")]
    pub filters: Vec<RowFilter>,
}

/// An entity space with its embedding width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceSpec {
    pub name: String,
    pub dim: usize,
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        let count = |k: FieldKind| self.fields.iter().filter(|f| f.kind == k).count();
        let exactly = |k: FieldKind, n: usize, what: &str| {
            if count(k) == n {
                Ok(())
            } else {
                Err(Error::Schema(format!(
                    "schema `{}` needs exactly {n} {what} field, found {}",
                    self.name,
                    count(k)
                )))
            }
        };
        exactly(FieldKind::Timestamp, 1, "timestamp")?;
        exactly(FieldKind::Source, 1, "source")?;
        if count(FieldKind::Destination) == 0 {
            return Err(Error::Schema(format!(
                "schema `{}` needs at least one destination field",
                self.name
            )));
        }
        for k in [FieldKind::User, FieldKind::Label, FieldKind::Key] {
            if count(k) > 1 {
                return Err(Error::Schema(format!(
                    "schema `{}` has more than one {k:?} field",
                    self.name
                )));
            }
        }
        let mut dims: BTreeMap<&str, usize> = BTreeMap::new();
        for f in self.fields.iter().filter(|f| f.is_entity()) {
            if f.multi && f.kind == FieldKind::Source {
                return Err(Error::Schema(format!("source field `{}` cannot be multi-valued", f.name)));
            }
            let Some(d) = f.dim else { continue };
            if d == 0 {
                return Err(Error::Schema(format!("field `{}` has zero embedding dim", f.name)));
            }
            if let Some(prev) = dims.insert(f.space_name(), d) {
                if prev != d {
                    return Err(Error::Schema(format!(
                        "space `{}` declared with dims {prev} and {d}",
                        f.space_name()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn fields_of(&self, kind: FieldKind) -> impl Iterator<Item = &FieldSpec> {
        self.fields.iter().filter(move |f| f.kind == kind)
    }

    pub fn field_of(&self, kind: FieldKind) -> Option<&FieldSpec> {
        self.fields_of(kind).next()
    }

    /// Entity spaces in order of first appearance (source first).
    pub fn spaces(&self) -> Vec<SpaceSpec> {
        struct Slot {
            name: String,
            dim: usize,
            explicit: bool,
        }
        let mut out: Vec<Slot> = Vec::new();
        let entities = self
            .fields_of(FieldKind::Source)
            .chain(self.fields_of(FieldKind::Destination));
        for f in entities {
            let name = f.space_name();
            match out.iter_mut().find(|s| s.name == name) {
                Some(s) => {
                    if let (Some(d), false) = (f.dim, s.explicit) {
                        s.dim = d;
                        s.explicit = true;
                    }
                }
                None => out.push(Slot {
                    name: name.to_string(),
                    dim: f.dim.unwrap_or(DEFAULT_EMBEDDING_DIM),
                    explicit: f.dim.is_some(),
                }),
            }
        }
        out.into_iter()
            .map(|s| SpaceSpec {
                name: s.name,
                dim: s.dim,
            })
            .collect()
    }

    pub fn space_index(&self, name: &str) -> Option<usize> {
        self.spaces().iter().position(|s| s.name == name)
    }

    pub fn source_space(&self) -> usize {
        let src = self.field_of(FieldKind::Source).expect("validated schema");
        self.space_index(src.space_name()).expect("source space")
    }

    /// Space index of every destination field, in schema order.
    pub fn destination_spaces(&self) -> Vec<usize> {
        let spaces = self.spaces();
        self.fields_of(FieldKind::Destination)
            .map(|f| spaces.iter().position(|s| s.name == f.space_name()).expect("space"))
            .collect()
    }

    /// Highest column index referenced by fields or filters.
    pub fn max_column(&self) -> usize {
        self.fields
            .iter()
            .map(|f| f.column)
            .chain(self.filters.iter().map(|f| f.column))
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn logon() -> FeatureSchema {
        FeatureSchema {
            name: "t".into(),
            delimiter: ',',
            header: false,
            time_format: "epoch".into(),
            utc_offset_seconds: 0,
            text_token_cap: 200,
            fields: vec![
                FieldSpec::new("ts", FieldKind::Timestamp, 0),
                FieldSpec::new("user", FieldKind::Source, 1).with_dim(2),
                FieldSpec::new("pc", FieldKind::Destination, 2).with_dim(2),
                FieldSpec::new("activity", FieldKind::Categorical, 3),
            ],
            filters: vec![],
        }
    }

    #[test]
    fn valid_schema_passes() {
        logon().validate().unwrap();
    }

    #[test]
    fn needs_one_timestamp() {
        let mut s = logon();
        s.fields.remove(0);
        assert!(s.validate().is_err());
        let mut s = logon();
        s.fields.push(FieldSpec::new("ts2", FieldKind::Timestamp, 4));
        assert!(s.validate().is_err());
    }

    #[test]
    fn needs_destination() {
        let mut s = logon();
        s.fields.retain(|f| f.kind != FieldKind::Destination);
        assert!(s.validate().is_err());
    }

    #[test]
    fn conflicting_space_dims_rejected() {
        let mut s = logon();
        s.fields[2] = FieldSpec::new("pc", FieldKind::Destination, 2)
            .in_space("user")
            .with_dim(3);
        assert!(s.validate().is_err());
    }

    #[test]
    fn shared_space_listed_once() {
        let mut s = logon();
        s.fields[2] = FieldSpec::new("to", FieldKind::Destination, 2).in_space("user").with_dim(2);
        s.fields.push(FieldSpec::new("cc", FieldKind::Destination, 4).in_space("user").multi(";"));
        assert_eq!(s.spaces().len(), 1);
        assert_eq!(s.destination_spaces(), vec![0, 0]);
    }

    #[test]
    fn filters() {
        let f = RowFilter {
            column: 0,
            op: FilterOp::NotSuffix,
            value: "$".into(),
        };
        assert!(f.keeps("U12"));
        assert!(!f.keeps("C123$"));
        let e = RowFilter {
            column: 0,
            op: FilterOp::Equals,
            value: "Send".into(),
        };
        assert!(e.keeps("send"));
        assert!(!e.keeps("View"));
    }
}
