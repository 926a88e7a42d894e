//! Cohort file formats: the TOML manifest and per-subject CSV series.

use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::thread;

use chosvd_core::cohort::{CohortManifest, SeriesTable, Service, SubjectRecord, Window};
use chosvd_core::RealMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{format_window, parse_window};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub id: String,
    pub service: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pain_day30: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pain_day90: Option<f64>,
    /// Series CSV, relative to the manifest's directory.
    pub series: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incision_minute: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub schema_version: u32,
    pub samples_per_minute: usize,
    pub channel_names: Vec<String>,
    /// `START,LEN` in minutes, as for `--window`.
    pub window: String,
    pub subjects: Vec<SubjectEntry>,
}

impl ManifestFile {
    pub fn from_manifest(m: &CohortManifest) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            samples_per_minute: m.samples_per_minute,
            channel_names: m.channel_names.clone(),
            window: format_window(&m.window),
            subjects: m
                .subjects
                .iter()
                .map(|s| SubjectEntry {
                    id: s.id.clone(),
                    service: s.service.as_str().to_string(),
                    pain_day30: s.pain_day30,
                    pain_day90: s.pain_day90,
                    series: s.series_path.clone(),
                    incision_minute: s.incision_minute,
                })
                .collect(),
        }
    }

    pub fn into_manifest(self, path: &Path) -> CliResult<CohortManifest> {
        let parse_err = |reason: String| CliError::Parse { path: path.to_path_buf(), reason };
        if self.schema_version != SCHEMA_VERSION {
            return Err(parse_err(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let window: Window = parse_window(&self.window).map_err(|e| parse_err(e.to_string()))?;
        let subjects = self
            .subjects
            .into_iter()
            .map(|s| {
                let service: Service = s
                    .service
                    .parse()
                    .map_err(|e: chosvd_core::Error| parse_err(format!("subject `{}`: {e}", s.id)))?;
                Ok(SubjectRecord {
                    id: s.id,
                    service,
                    pain_day30: s.pain_day30,
                    pain_day90: s.pain_day90,
                    series_path: s.series,
                    incision_minute: s.incision_minute,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let manifest = CohortManifest {
            subjects,
            channel_names: self.channel_names,
            samples_per_minute: self.samples_per_minute,
            window,
        };
        manifest.validate().map_err(|e| parse_err(e.to_string()))?;
        Ok(manifest)
    }
}

/// Reads and validates a manifest. A missing file is a usage error.
pub fn load_manifest(path: &Path) -> CliResult<CohortManifest> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::usage(format!("manifest `{}` does not exist", path.display()))
        } else {
            CliError::Read { path: path.to_path_buf(), source: e }
        }
    })?;
    let file: ManifestFile =
        toml::from_str(&text).map_err(|e| CliError::Parse { path: path.to_path_buf(), reason: e.to_string() })?;
    file.into_manifest(path)
}

/// Parses a series CSV: header of channel names, one row per sample, empty
/// fields for missing values, `#` comment lines ignored.
pub fn parse_series(text: &str) -> Result<SeriesTable, String> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().any(String::is_empty) {
        return Err("header must name every column".to_string());
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        for (c, field) in record.iter().enumerate() {
            let value = if field.is_empty() {
                None
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| format!("row {}, column `{}`: `{field}` is not a number", row + 1, names[c]))?;
                if !v.is_finite() {
                    return Err(format!("row {}, column `{}`: non-finite value", row + 1, names[c]));
                }
                Some(v)
            };
            columns[c].push(value);
        }
    }
    Ok(SeriesTable { channel_names: names, columns })
}

/// Serialises `channels x samples` data as a series CSV. Values use the
/// shortest round-trip decimal form.
pub fn format_series(channel_names: &[String], data: &RealMatrix, header: &str) -> String {
    let mut out = String::from(header);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(channel_names).expect("in-memory write");
    for t in 0..data.cols() {
        w.write_record((0..data.rows()).map(|c| data[(c, t)].to_string()))
            .expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8"));
    out
}

fn load_series(path: &Path, record: &SubjectRecord) -> chosvd_core::Result<SeriesTable> {
    let fail = |reason: String| chosvd_core::Error::Ingest {
        subject: record.id.clone(),
        channel: None,
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| fail(format!("cannot read `{}`: {e}", path.display())))?;
    parse_series(&text).map_err(|r| fail(format!("`{}`: {r}", path.display())))
}

/// Reads every subject's series in parallel; results are in manifest order.
pub fn load_all_series(manifest: &CohortManifest, base: &Path) -> Vec<chosvd_core::Result<SeriesTable>> {
    let paths: Vec<PathBuf> = manifest
        .subjects
        .iter()
        .map(|s| base.join(&s.series_path))
        .collect();
    let workers = thread::available_parallelism().map_or(1, NonZeroUsize::get).min(paths.len()).max(1);
    let chunk = paths.len().div_ceil(workers).max(1);
    thread::scope(|scope| {
        let handles: Vec<_> = manifest
            .subjects
            .chunks(chunk)
            .zip(paths.chunks(chunk))
            .map(|(subjects, paths)| {
                scope.spawn(move || {
                    subjects
                        .iter()
                        .zip(paths)
                        .map(|(s, p)| load_series(p, s))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("series loader panicked"))
            .collect()
    })
}
