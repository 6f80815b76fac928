use thiserror::Error;

/// A single field value that cannot be represented or was not understood.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("empty field")]
    Empty,
    #[error("reserved value {0:?}")]
    Reserved(String),
    #[error("illegal character {0:?}")]
    BadChar(char),
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
    #[error("malformed timestamp {0:?}")]
    BadTimestamp(String),
    #[error("malformed date {0:?}")]
    BadDate(String),
    #[error("malformed number {0:?}")]
    BadNumber(String),
}

/// A malformed line in one of the tab-separated data files.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

/// Splits a line into exactly `N` tab-separated fields.
pub(crate) fn split_fields<const N: usize>(
    line: &str,
    line_no: usize,
) -> Result<[&str; N], ParseError> {
    let mut out = [""; N];
    let mut parts = line.split('\t');
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = parts.next().ok_or_else(|| {
            ParseError::new(line_no, format!("expected {N} fields, found {i}"))
        })?;
    }
    if parts.next().is_some() {
        let found = N + 1 + parts.count();
        return Err(ParseError::new(
            line_no,
            format!("expected {N} fields, found {found}"),
        ));
    }
    Ok(out)
}

pub(crate) fn field<T>(
    line_no: usize,
    name: &str,
    result: Result<T, FieldError>,
) -> Result<T, ParseError> {
    result.map_err(|e| ParseError::new(line_no, format!("{name}: {e}")))
}
