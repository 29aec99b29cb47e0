use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed text input; `line` is 1-based, 0 when not tied to a line.
    #[error("{source_name}:{line}: {msg}")]
    Parse { source_name: String, line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] dice_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Line-tagged parse error builder.
pub(crate) struct Source<'a> {
    pub name: &'a str,
}

impl Source<'_> {
    pub fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse { source_name: self.name.to_string(), line, msg: msg.into() }
    }

    pub fn num<T: std::str::FromStr>(&self, line: usize, what: &str, text: &str) -> Result<T> {
        text.trim().parse().map_err(|_| self.err(line, format!("invalid {what} `{text}`")))
    }
}
