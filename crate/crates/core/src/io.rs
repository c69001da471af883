//! On-disk formats: task JSON, transcript JSONL and the CSV tables.
//!
//! CSV outputs start with one `#` comment row carrying the run's config
//! hash and prompt version; readers skip comment rows.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FitRecord;
use crate::stats::GroupSample;
use crate::task::{SessionTranscript, TaskSet};

/// Provenance stamped on every output file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Header {
    pub config_hash: Option<String>,
    pub prompt_version: Option<String>,
}

impl Header {
    pub fn new(config_hash: impl Into<String>, prompt_version: Option<String>) -> Self {
        Header {
            config_hash: Some(config_hash.into()),
            prompt_version,
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# risklab config_hash={} prompt_version={}",
            self.config_hash.as_deref().unwrap_or("none"),
            self.prompt_version.as_deref().unwrap_or("none")
        )
    }

    /// Parses a line written by [`Header::comment_line`].
    pub fn parse(line: &str) -> Option<Header> {
        let rest = line.strip_prefix("# risklab ")?;
        let mut h = Header::default();
        for field in rest.split_whitespace() {
            let (k, v) = field.split_once('=')?;
            let v = (v != "none").then(|| v.to_string());
            match k {
                "config_hash" => h.config_hash = v,
                "prompt_version" => h.prompt_version = v,
                _ => {}
            }
        }
        Some(h)
    }
}

/// Reads the header comment of a CSV output, if it has one.
pub fn read_header(path: &Path) -> Result<Option<Header>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(f)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    Ok(Header::parse(first.trim_end()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn flush(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_task(path: &Path, task: &TaskSet) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, task)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    flush(w, path)
}

pub fn read_task(path: &Path) -> Result<TaskSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let task: TaskSet = serde_json::from_str(&text)
        .map_err(|e| Error::validation(path, e.line(), e.to_string()))?;
    task.validate()
        .map_err(|e| Error::validation(path, 0, e.to_string()))?;
    Ok(task)
}

/// Appends transcripts one JSON object per line.
pub struct TranscriptWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(TranscriptWriter {
            out: create(path)?,
            path: path.to_path_buf(),
        })
    }

    pub fn append(path: &Path) -> Result<Self> {
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(TranscriptWriter {
            out: BufWriter::new(f),
            path: path.to_path_buf(),
        })
    }

    pub fn write(&mut self, transcript: &SessionTranscript) -> Result<()> {
        serde_json::to_writer(&mut self.out, transcript)?;
        writeln!(self.out).map_err(|e| Error::io(&self.path, e))?;
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_transcripts(path: &Path, transcripts: &[SessionTranscript]) -> Result<()> {
    let mut w = TranscriptWriter::create(path)?;
    transcripts.iter().try_for_each(|t| w.write(t))
}

/// Reads and validates every line; errors name the offending line.
pub fn read_transcripts(path: &Path) -> Result<Vec<SessionTranscript>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let tr: SessionTranscript = serde_json::from_str(&line)
            .map_err(|e| Error::validation(path, i + 1, e.to_string()))?;
        tr.validate()
            .map_err(|e| Error::validation(path, i + 1, e.to_string()))?;
        out.push(tr);
    }
    Ok(out)
}

/// Writes `rows` as CSV under a header comment.
pub fn write_csv<T: Serialize>(path: &Path, header: &Header, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.comment_line()).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    let w = csv
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    flush(w, path)
}

/// Writes a table with explicit column names.
pub fn write_table(
    path: &Path,
    header: &Header,
    columns: &[String],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.comment_line()).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(columns)?;
    for r in rows {
        csv.write_record(r)?;
    }
    let w = csv
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    flush(w, path)
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(f))
}

fn csv_validation(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::validation(path, line, e.to_string())
}

/// 1-based line number of the column-name row.
fn header_line(path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().take_while(|l| l.starts_with('#')).count() + 1)
}

/// Reads typed CSV rows, checking the column names first.
pub fn read_csv<T: DeserializeOwned>(path: &Path, expected: &[&str]) -> Result<Vec<T>> {
    let mut r = reader(path)?;
    let headers = r.headers().map_err(|e| csv_validation(path, e))?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        let line = header_line(path)?;
        return Err(Error::validation(
            path,
            line,
            format!(
                "expected columns {}, found {}",
                expected.join(","),
                got.join(",")
            ),
        ));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_validation(path, e)))
        .collect()
}

/// Column names and string cells of any CSV output.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = reader(path)?;
    let headers = r
        .headers()
        .map_err(|e| csv_validation(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| csv_validation(path, e))
        })
        .collect::<Result<_>>()?;
    Ok((headers, rows))
}

pub const FIT_COLUMNS: [&str; 22] = [
    "group",
    "session",
    "model",
    "alpha",
    "lambda",
    "mu",
    "beta_gain",
    "beta_loss",
    "beta_bias",
    "beta0",
    "beta_cr",
    "beta_ev",
    "beta_rpe",
    "beta_gr",
    "gamma",
    "nll",
    "bic",
    "fit_quality",
    "n_obs",
    "n_params",
    "starts_used",
    "best_start_index",
];

pub fn write_fits(path: &Path, header: &Header, fits: &[FitRecord]) -> Result<()> {
    write_csv(path, header, fits)
}

pub fn read_fits(path: &Path) -> Result<Vec<FitRecord>> {
    read_csv(path, &FIT_COLUMNS)
}

/// One row of the statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    /// Parameter or behavioural measure the test was run on.
    pub measure: String,
    pub test: String,
    /// Groups involved, `|`-separated.
    pub comparison: String,
    pub statistic: String,
    pub value: f64,
    /// Degrees of freedom; `d1/d2` for F.
    pub df: Option<String>,
    pub p: Option<f64>,
    pub effect_size: Option<f64>,
}

pub const STAT_COLUMNS: [&str; 8] = [
    "measure",
    "test",
    "comparison",
    "statistic",
    "value",
    "df",
    "p",
    "effect_size",
];

pub fn read_stats(path: &Path) -> Result<Vec<StatRow>> {
    read_csv(path, &STAT_COLUMNS)
}

/// Per-session behavioural summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: String,
    pub session: usize,
    pub gamble_rate: f64,
    pub gamble_rate_mixed: f64,
    pub gamble_rate_gain: f64,
    pub gamble_rate_loss: f64,
    pub mean_rating: Option<f64>,
    pub hedonic_contrast: Option<f64>,
    pub final_points: f64,
}

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "group",
    "session",
    "gamble_rate",
    "gamble_rate_mixed",
    "gamble_rate_gain",
    "gamble_rate_loss",
    "mean_rating",
    "hedonic_contrast",
    "final_points",
];

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    read_csv(path, &SUMMARY_COLUMNS)
}

#[derive(Debug, Deserialize)]
struct GroupValue {
    #[allow(dead_code)]
    agent_id: String,
    value: f64,
}

/// Reads an `(agent_id, value)` CSV as a group sample.
pub fn read_group_csv(path: &Path, label: &str) -> Result<GroupSample> {
    let rows: Vec<GroupValue> = read_csv(path, &["agent_id", "value"])?;
    GroupSample::new(label, rows.into_iter().map(|r| r.value).collect())
        .map_err(|e| Error::validation(path, 0, e.to_string()))
}
