//! Artifact writing: a metadata header followed by JSON or CSV content.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use explosion_lab::LogValue;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub convention: Option<String>,
    pub format: Format,
    /// The subcommand's resolved parameters.
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new<C: Serialize>(
        command: &str,
        seed: u64,
        convention: Option<&str>,
        format: Format,
        config: &C,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            convention: convention.map(str::to_string),
            format,
            config: serde_json::to_value(config).expect("config serializes"),
        }
    }

    /// `# key: value` lines; the config is one line of compact JSON.
    fn csv_comment(&self) -> String {
        let mut s = String::new();
        s += &format!(
            "# tool: {}\n# version: {}\n# command: {}\n# seed: {}\n",
            self.tool, self.version, self.command, self.seed
        );
        s += &format!(
            "# convention: {}\n",
            self.convention.as_deref().unwrap_or("none")
        );
        s += &format!("# config: {}\n", self.config);
        s
    }
}

/// A log-domain value as `(sign, log10 |value|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Log10 {
    pub sign: i8,
    pub log10_magnitude: f64,
}

impl From<LogValue> for Log10 {
    fn from(v: LogValue) -> Self {
        Self {
            sign: v.sign(),
            log10_magnitude: v.log10_magnitude(),
        }
    }
}

pub struct Sink {
    inner: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Self> {
        let inner: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Self { inner })
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    metadata: &'a Metadata,
    result: &'a T,
}

pub fn write_json<T: Serialize>(path: Option<&Path>, meta: &Metadata, result: &T) -> Result<()> {
    let mut sink = Sink::open(path)?;
    serde_json::to_writer_pretty(
        &mut sink.inner,
        &Envelope {
            metadata: meta,
            result,
        },
    )?;
    sink.inner.write_all(b"\n")?;
    sink.finish()
}

/// Header comments, extra `# key: value` lines, then a CSV table.
pub fn write_csv<R>(
    path: Option<&Path>,
    meta: &Metadata,
    extra: &[(&str, String)],
    rows: &[R],
) -> Result<()>
where
    R: Serialize + CsvHeader,
{
    let mut sink = Sink::open(path)?;
    sink.inner.write_all(meta.csv_comment().as_bytes())?;
    for (k, v) in extra {
        writeln!(sink.inner, "# {k}: {v}")?;
    }
    {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(&mut sink.inner);
        w.write_record(R::HEADER)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    sink.finish()
}

/// Column names, written even when there are no rows.
pub trait CsvHeader {
    const HEADER: &'static [&'static str];
}

pub fn out_path(p: &Option<PathBuf>) -> Option<&Path> {
    p.as_deref()
}
