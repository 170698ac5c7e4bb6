//! Built-in schemas for the supported audit sources.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::schema::{FeatureSchema, FieldKind, FieldSpec, FilterOp, RowFilter, Transform, DEFAULT_TEXT_TOKEN_CAP};

pub const CERT_TIME_FORMAT: &str = "%m/%d/%Y %H:%M:%S";

pub const PRESET_NAMES: [&str; 6] = [
    "cert_logon",
    "cert_email",
    "cert_http",
    "lanl_auth",
    "synthetic_logon",
    "synthetic_email",
];

pub fn preset(name: &str) -> Option<FeatureSchema> {
    Some(match name {
        "cert_logon" => cert_logon(),
        "cert_email" => cert_email(),
        "cert_http" => cert_http(),
        "lanl_auth" => lanl_auth(),
        "synthetic_logon" => synthetic_logon(),
        "synthetic_email" => synthetic_email(),
        _ => return None,
    })
}

fn schema(name: &str, header: bool, time_format: &str, fields: Vec<FieldSpec>, filters: Vec<RowFilter>) -> FeatureSchema {
    FeatureSchema {
        name: name.to_string(),
        delimiter: ',',
        header,
        time_format: time_format.to_string(),
        utc_offset_seconds: 0,
        text_token_cap: DEFAULT_TEXT_TOKEN_CAP,
        fields,
        filters,
    }
}

fn filter(column: usize, op: FilterOp, value: &str) -> RowFilter {
    RowFilter {
        column,
        op,
        value: String::from(value),
    }
}

/// `id,date,user,pc,activity`
pub fn cert_logon() -> FeatureSchema {
    schema(
        "cert_logon",
        true,
        CERT_TIME_FORMAT,
        vec![
            FieldSpec::new("id", FieldKind::Key, 0),
            FieldSpec::new("date", FieldKind::Timestamp, 1),
            FieldSpec::new("user", FieldKind::Source, 2).with_dim(20),
            FieldSpec::new("pc", FieldKind::Destination, 3).with_dim(20),
            FieldSpec::new("activity", FieldKind::Categorical, 4),
        ],
        vec![],
    )
}

/// `id,date,user,pc,to,cc,bcc,from,activity,size,attachments,content`,
/// restricted to send events. Sender and receivers share one address space.
pub fn cert_email() -> FeatureSchema {
    schema(
        "cert_email",
        true,
        CERT_TIME_FORMAT,
        vec![
            FieldSpec::new("id", FieldKind::Key, 0),
            FieldSpec::new("date", FieldKind::Timestamp, 1),
            FieldSpec::new("user", FieldKind::User, 2),
            FieldSpec::new("to", FieldKind::Destination, 4).in_space("address").multi(";"),
            FieldSpec::new("cc", FieldKind::Destination, 5).in_space("address").multi(";"),
            FieldSpec::new("bcc", FieldKind::Destination, 6).in_space("address").multi(";"),
            FieldSpec::new("from", FieldKind::Source, 7).in_space("address").with_dim(20),
            FieldSpec::new("size", FieldKind::Numeric, 9),
            FieldSpec::new("content", FieldKind::Text, 11),
        ],
        vec![filter(8, FilterOp::Equals, "Send")],
    )
}

/// `id,date,user,pc,url,activity,content`; the URL is reduced to its domain.
pub fn cert_http() -> FeatureSchema {
    schema(
        "cert_http",
        true,
        CERT_TIME_FORMAT,
        vec![
            FieldSpec::new("id", FieldKind::Key, 0),
            FieldSpec::new("date", FieldKind::Timestamp, 1),
            FieldSpec::new("user", FieldKind::Source, 2).with_dim(20),
            FieldSpec::new("domain", FieldKind::Destination, 4)
                .with_dim(50)
                .with_transform(Transform::UrlDomain),
        ],
        vec![],
    )
}

/// LANL `auth.txt`: time, source user, source computer and destination
/// computer are kept; system and computer accounts are dropped.
pub fn lanl_auth() -> FeatureSchema {
    schema(
        "lanl_auth",
        false,
        "epoch",
        vec![
            FieldSpec::new("time", FieldKind::Timestamp, 0),
            FieldSpec::new("user", FieldKind::Source, 1).with_dim(20),
            FieldSpec::new("src_computer", FieldKind::Destination, 3).with_dim(20),
            FieldSpec::new("dst_computer", FieldKind::Destination, 4).with_dim(20),
        ],
        vec![
            filter(1, FilterOp::NotPrefix, "ANONYMOUS"),
            filter(1, FilterOp::NotPrefix, "SYSTEM@"),
            filter(1, FilterOp::NotPrefix, "LOCAL SERVICE@"),
            filter(1, FilterOp::NotPrefix, "NETWORK SERVICE@"),
            filter(1, FilterOp::NotContains, "$@"),
        ],
    )
}

/// Logon layout plus a trailing label column, as written by the generator.
pub fn synthetic_logon() -> FeatureSchema {
    let mut s = cert_logon();
    s.name = "synthetic_logon".to_string();
    s.fields.push(FieldSpec::new("label", FieldKind::Label, 5));
    s
}

/// Email layout plus a trailing label column, as written by the generator.
pub fn synthetic_email() -> FeatureSchema {
    let mut s = cert_email();
    s.name = "synthetic_email".to_string();
    s.fields.push(FieldSpec::new("label", FieldKind::Label, 12));
    s
}
