use std::io::Write;

use serde::Serialize;

use crate::args::Format;

/// Where results (stdout) and notes (stderr) go.
pub struct Output {
    pub format: Format,
    pub quiet: bool,
}

impl Output {
    /// One JSON record per line in JSON mode; `table` renders the same data
    /// as text otherwise.
    pub fn record<T: Serialize>(&self, value: &T, table: impl FnOnce() -> String) -> std::io::Result<()> {
        let mut out = std::io::stdout().lock();
        match self.format {
            Format::Json => {
                let line = serde_json::to_string(value).map_err(std::io::Error::other)?;
                writeln!(out, "{line}")?;
            }
            Format::Table => {
                let text = table();
                write!(out, "{text}")?;
                if !text.ends_with('\n') {
                    writeln!(out)?;
                }
            }
        }
        out.flush()
    }

    pub fn note(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", message.as_ref());
        }
    }
}
