//! Rendering and atomic output.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A command's result in both forms; `csv` is `None` when there is no
/// tabular view.
pub struct Emit {
    pub json: Value,
    pub csv: Option<String>,
}

impl Emit {
    pub fn json(json: Value) -> Self {
        Self { json, csv: None }
    }

    pub fn both(json: Value, csv: String) -> Self {
        Self {
            json,
            csv: Some(csv),
        }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.json)? + "\n"),
            Format::Csv => match &self.csv {
                Some(c) => Ok(c.clone()),
                None => bail!("this command has no CSV output; use --format json"),
            },
        }
    }
}

/// Writes to `path` through a temporary file in the same directory, or to
/// stdout when no path is given.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    let Some(path) = path else {
        std::io::stdout().write_all(text.as_bytes())?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn csv_line<I: IntoIterator<Item = S>, S: ToString>(fields: I) -> String {
    let mut s = fields
        .into_iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    s
}
