//! Identifier newtypes, the experimental group, and the timestamp format
//! shared by every line-oriented file.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::FieldError;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self, FieldError> {
                let value = value.into();
                check_field(&value)?;
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = FieldError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }

        impl TryFrom<String> for $name {
            type Error = FieldError;
            fn try_from(value: String) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> Self {
                id.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Stable topic identifier, the slug of the topic label.
    TopicId
);
string_id!(
    /// A user of the recommender.
    UserId
);

/// Opaque document identifier. Also used as a file name under `docs/`, so
/// it is restricted to `[A-Za-z0-9._-]` and may not start with a dot.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DocId(String);

impl DocId {
    pub fn new(value: impl Into<String>) -> Result<Self, FieldError> {
        let value = value.into();
        if value.is_empty() {
            return Err(FieldError::Empty);
        }
        if value == "-" || value.starts_with('.') {
            return Err(FieldError::Reserved(value));
        }
        if let Some(c) = value
            .chars()
            .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-')))
        {
            return Err(FieldError::BadChar(c));
        }
        Ok(Self(value))
    }

    /// Derives a document id from the URL it was fetched from.
    pub fn for_url(url: &str) -> Self {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(url.as_bytes());
        let mut id = String::with_capacity(17);
        id.push('d');
        for byte in &digest[..8] {
            id.push_str(&format!("{byte:02x}"));
        }
        Self(id)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for DocId {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for DocId {
    type Error = FieldError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<DocId> for String {
    fn from(id: DocId) -> Self {
        id.0
    }
}

/// Rejects values that cannot live inside one tab-separated field.
pub(crate) fn check_field(value: &str) -> Result<(), FieldError> {
    if value.is_empty() {
        return Err(FieldError::Empty);
    }
    if value == "-" {
        return Err(FieldError::Reserved(value.to_owned()));
    }
    if let Some(c) = value.chars().find(|c| matches!(c, '\t' | '\n' | '\r')) {
        return Err(FieldError::BadChar(c));
    }
    Ok(())
}

/// The two experimental conditions. Each group owns its taxonomy and
/// training set; a user belongs to exactly one group for life.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Flat,
    Ontology,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Flat, Group::Ontology];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Flat => "flat",
            Group::Ontology => "ontology",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(Group::Flat),
            "ontology" => Ok(Group::Ontology),
            other => Err(FieldError::Unknown {
                what: "group",
                value: other.to_owned(),
            }),
        }
    }
}

pub type Timestamp = DateTime<Utc>;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";
const DATE_FORMAT: &str = "%Y-%m-%d";

/// Formats a timestamp as second-precision ISO-8601 UTC, e.g. `2001-03-04T09:15:00Z`.
pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Result<Timestamp, FieldError> {
    let naive = NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .map_err(|_| FieldError::BadTimestamp(s.to_owned()))?;
    let ts = naive.and_utc();
    // The parser accepts some non-canonical spellings (e.g. unpadded fields).
    if format_timestamp(&ts) != s {
        return Err(FieldError::BadTimestamp(s.to_owned()));
    }
    Ok(ts)
}

pub fn format_date(date: &NaiveDate) -> String {
    date.format(DATE_FORMAT).to_string()
}

pub fn parse_date(s: &str) -> Result<NaiveDate, FieldError> {
    let date =
        NaiveDate::parse_from_str(s, DATE_FORMAT).map_err(|_| FieldError::BadDate(s.to_owned()))?;
    if format_date(&date) != s {
        return Err(FieldError::BadDate(s.to_owned()));
    }
    Ok(date)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_ids_are_file_name_safe() {
        assert!(DocId::new("paper-01.v2").is_ok());
        assert!(DocId::new("../etc").is_err());
        assert!(DocId::new("a/b").is_err());
        assert!(DocId::new("").is_err());
        assert!(DocId::new(".hidden").is_err());
        let derived = DocId::for_url("http://example.org/a.pdf");
        assert_eq!(derived.as_str().len(), 17);
        assert_eq!(derived, DocId::for_url("http://example.org/a.pdf"));
    }

    #[test]
    fn timestamps_are_canonical() {
        let ts = parse_timestamp("2001-03-04T09:15:00Z").unwrap();
        assert_eq!(format_timestamp(&ts), "2001-03-04T09:15:00Z");
        assert!(parse_timestamp("2001-3-4T09:15:00Z").is_err());
        assert!(parse_timestamp("2001-03-04 09:15:00").is_err());
        assert!(parse_date("2001-03-04").is_ok());
        assert!(parse_date("2001-02-30").is_err());
    }

    #[test]
    fn fields_reject_separators() {
        assert!(TopicId::new("machine-learning").is_ok());
        assert!(TopicId::new("a\tb").is_err());
        assert!(UserId::new("-").is_err());
        assert_eq!("ontology".parse::<Group>().unwrap(), Group::Ontology);
        assert!("Flat".parse::<Group>().is_err());
    }
}
