//! Cohort data model: subjects, outcome labels, service groups, windowing,
//! and assembly of the complex cohort tensor from per-subject channel data.
//!
//! Reading series files is the caller's job; [`ingest`] takes a loader
//! closure so the same logic serves files, fixtures and synthetic cohorts.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use crate::signal::{self, DEFAULT_MAX_MISSING};
use crate::{ComplexMatrix, ComplexTensor3, Error, Result, C64};

/// Pain scores at or below this are "mild".
pub const MILD_MAX: f64 = 3.0;

/// Default channel roster, in tensor row order.
pub const DEFAULT_CHANNELS: [&str; 8] = [
    "heart_rate",
    "heart_rate_spo2",
    "spo2",
    "systolic_bp",
    "diastolic_bp",
    "etco2",
    "tidal_volume",
    "et_volatile_agent",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Service {
    Thoracic,
    Orthopaedics,
    Urology,
    Colorectal,
    Transplant,
    PancreasBiliary,
    Other,
}

impl Service {
    pub const ALL: [Service; 7] = [
        Service::Thoracic,
        Service::Orthopaedics,
        Service::Urology,
        Service::Colorectal,
        Service::Transplant,
        Service::PancreasBiliary,
        Service::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Service::Thoracic => "thoracic",
            Service::Orthopaedics => "orthopaedics",
            Service::Urology => "urology",
            Service::Colorectal => "colorectal",
            Service::Transplant => "transplant",
            Service::PancreasBiliary => "pancreas_biliary",
            Service::Other => "other",
        }
    }
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Service {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .collect();
        let service = match key.as_str() {
            "thoracic" => Service::Thoracic,
            "orthopaedics" | "orthopedics" | "orthopaedic" | "orthopedic" => Service::Orthopaedics,
            "urology" | "urological" => Service::Urology,
            "colorectal" => Service::Colorectal,
            "transplant" => Service::Transplant,
            "pancreas_biliary" | "pancreas___biliary" | "pancreas_and_biliary" | "pancreas" => {
                Service::PancreasBiliary
            }
            "other" => Service::Other,
            _ => return Err(Error::invalid(alloc::format!("unknown surgical service `{s}`"))),
        };
        Ok(service)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Horizon {
    Day30,
    Day90,
}

impl Horizon {
    pub fn as_str(self) -> &'static str {
        match self {
            Horizon::Day30 => "day30",
            Horizon::Day90 => "day90",
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "day30" | "30" => Ok(Horizon::Day30),
            "day90" | "90" => Ok(Horizon::Day90),
            _ => Err(Error::invalid(alloc::format!("unknown horizon `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PainClass {
    Mild,
    Severe,
}

impl PainClass {
    pub fn is_severe(self) -> bool {
        self == PainClass::Severe
    }
}

/// Mild iff `score <= 3`.
pub fn label_pain(score: f64) -> Result<PainClass> {
    if !(0.0..=10.0).contains(&score) {
        return Err(Error::invalid(alloc::format!(
            "pain score {score} outside 0..=10"
        )));
    }
    Ok(if score <= MILD_MAX {
        PainClass::Mild
    } else {
        PainClass::Severe
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub service: Service,
    pub pain_day30: Option<f64>,
    pub pain_day90: Option<f64>,
    /// Series file reference, resolved by the loader.
    pub series_path: String,
    pub incision_minute: Option<u32>,
}

impl SubjectRecord {
    pub fn pain(&self, horizon: Horizon) -> Option<f64> {
        match horizon {
            Horizon::Day30 => self.pain_day30,
            Horizon::Day90 => self.pain_day90,
        }
    }

    /// `Some(true)` for severe, `None` when the score is absent.
    pub fn label(&self, horizon: Horizon) -> Result<Option<bool>> {
        self.pain(horizon)
            .map(|s| label_pain(s).map(PainClass::is_severe))
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WindowAnchor {
    /// `start` counts minutes from the first recorded sample.
    RecordStart,
    /// `start` counts minutes from the subject's incision time (may be negative).
    Incision,
}

/// Analysis window in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Window {
    pub anchor: WindowAnchor,
    pub start: i64,
    pub length: usize,
}

impl Window {
    /// First 75 minutes of the recording.
    pub const FULL_75: Window = Window {
        anchor: WindowAnchor::RecordStart,
        start: 0,
        length: 75,
    };

    /// 50 minutes starting 10 minutes before incision.
    pub const INCISION_50: Window = Window {
        anchor: WindowAnchor::Incision,
        start: -10,
        length: 50,
    };

    /// Sample indices covered by the window for one subject.
    pub fn sample_range(
        &self,
        incision_minute: Option<u32>,
        samples_per_minute: usize,
        available: usize,
    ) -> core::result::Result<Range<usize>, String> {
        let origin = match self.anchor {
            WindowAnchor::RecordStart => 0,
            WindowAnchor::Incision => match incision_minute {
                Some(m) => i64::from(m),
                None => return Err("window is anchored at incision but no incision_minute is given".to_string()),
            },
        };
        let start_min = origin + self.start;
        if start_min < 0 {
            return Err(alloc::format!("window starts {} minutes before the recording", -start_min));
        }
        let start = start_min as usize * samples_per_minute;
        let end = start + self.length * samples_per_minute;
        if end > available {
            return Err(alloc::format!(
                "series has {available} samples but the window needs samples {start}..{end}"
            ));
        }
        Ok(start..end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortManifest {
    pub subjects: Vec<SubjectRecord>,
    pub channel_names: Vec<String>,
    pub samples_per_minute: usize,
    pub window: Window,
}

impl CohortManifest {
    pub fn validate(&self) -> Result<()> {
        if self.channel_names.is_empty() {
            return Err(Error::invalid("manifest lists no channels"));
        }
        for (i, c) in self.channel_names.iter().enumerate() {
            if self.channel_names[..i].contains(c) {
                return Err(Error::invalid(alloc::format!("channel `{c}` listed twice")));
            }
        }
        if self.samples_per_minute == 0 {
            return Err(Error::invalid("sampling rate must be at least one sample per minute"));
        }
        if self.window.length * self.samples_per_minute < signal::MIN_SERIES_LEN {
            return Err(Error::invalid("window is shorter than four samples"));
        }
        if self.subjects.is_empty() {
            return Err(Error::invalid("manifest lists no subjects"));
        }
        for (i, s) in self.subjects.iter().enumerate() {
            if self.subjects[..i].iter().any(|o| o.id == s.id) {
                return Err(Error::invalid(alloc::format!("subject id `{}` listed twice", s.id)));
            }
            for h in [Horizon::Day30, Horizon::Day90] {
                s.label(h).map_err(|e| Error::Ingest {
                    subject: s.id.clone(),
                    channel: None,
                    reason: e.to_string(),
                })?;
            }
        }
        Ok(())
    }
}

/// Channel preprocessing applied before stacking.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Preprocess {
    /// Zero mean, unit population variance per subject and channel.
    pub standardize: bool,
    /// Raised-cosine taper over the first and last five samples.
    pub taper: bool,
    /// Largest tolerated fraction of missing samples per channel.
    pub max_missing: f64,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            standardize: true,
            taper: false,
            max_missing: DEFAULT_MAX_MISSING,
        }
    }
}

/// Gap-fills, optionally standardises and tapers, then complexifies one channel.
pub fn complexify_channel(samples: &[Option<f64>], pre: &Preprocess) -> Result<Vec<C64>> {
    if samples.len() < signal::MIN_SERIES_LEN {
        return Err(Error::invalid("channel is shorter than four samples"));
    }
    let mut x = signal::fill_gaps(samples, pre.max_missing)?;
    if pre.standardize {
        x = signal::standardize(&x)?;
    }
    if pre.taper {
        x = signal::cosine_taper(&x);
    }
    Ok(signal::analytic_signal(&x))
}

/// Builds one subject's `channels x time` complex slice. Errors name the
/// subject and the offending channel.
pub fn complexify_subject(
    subject: &str,
    channel_names: &[String],
    channels: &[Vec<Option<f64>>],
    pre: &Preprocess,
) -> Result<ComplexMatrix> {
    let len = channels.first().map_or(0, Vec::len);
    let mut rows = Vec::with_capacity(channels.len());
    for (name, samples) in channel_names.iter().zip(channels) {
        let wrap = |e: Error| Error::Ingest {
            subject: subject.to_string(),
            channel: Some(name.clone()),
            reason: match e {
                Error::DegenerateChannel(_) => "zero variance".to_string(),
                other => other.to_string(),
            },
        };
        if samples.len() != len {
            return Err(wrap(Error::shape("channels differ in length")));
        }
        rows.push(complexify_channel(samples, pre).map_err(wrap)?);
    }
    Ok(ComplexMatrix::from_fn(rows.len(), len, |i, j| rows[i][j]))
}

/// A subject's raw series: named columns of optional samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesTable {
    pub channel_names: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
}

impl SeriesTable {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.channel_names
            .iter()
            .position(|c| c == name)
            .map(|i| self.columns[i].as_slice())
    }
}

/// Cohort tensor plus the subjects it was built from, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedCohort {
    pub tensor: ComplexTensor3,
    pub subjects: Vec<SubjectRecord>,
    pub channel_names: Vec<String>,
}

impl IngestedCohort {
    /// Per-subject label for a horizon; `None` marks an excluded subject.
    pub fn labels(&self, horizon: Horizon) -> Vec<Option<bool>> {
        self.subjects
            .iter()
            .map(|s| s.label(horizon).ok().flatten())
            .collect()
    }

    pub fn groups(&self) -> Vec<(Service, Vec<usize>)> {
        group_by_service(&self.subjects)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub cohort: IngestedCohort,
    /// Subjects dropped under `skip_bad`, with the reason.
    pub skipped: Vec<Error>,
}

fn subject_slice(
    manifest: &CohortManifest,
    record: &SubjectRecord,
    table: &SeriesTable,
    pre: &Preprocess,
) -> Result<ComplexMatrix> {
    let err = |channel: Option<&str>, reason: String| Error::Ingest {
        subject: record.id.clone(),
        channel: channel.map(str::to_string),
        reason,
    };
    if let Some(unknown) = table
        .channel_names
        .iter()
        .find(|c| !manifest.channel_names.contains(c))
    {
        return Err(err(Some(unknown), "unknown channel".to_string()));
    }
    let range = manifest
        .window
        .sample_range(record.incision_minute, manifest.samples_per_minute, table.len())
        .map_err(|r| err(None, r))?;
    let mut channels = Vec::with_capacity(manifest.channel_names.len());
    for name in &manifest.channel_names {
        let column = table
            .column(name)
            .ok_or_else(|| err(Some(name), "channel missing from series".to_string()))?;
        channels.push(column[range.clone()].to_vec());
    }
    complexify_subject(&record.id, &manifest.channel_names, &channels, pre)
}

/// Loads, windows, gap-fills, standardises and complexifies every subject and
/// stacks the slices in manifest order.
///
/// Without `skip_bad` any failing subject fails the whole run and every
/// failure is returned; with it failing subjects are dropped and listed.
pub fn ingest<F>(
    manifest: &CohortManifest,
    pre: &Preprocess,
    skip_bad: bool,
    mut load: F,
) -> core::result::Result<IngestOutcome, Vec<Error>>
where
    F: FnMut(&SubjectRecord) -> Result<SeriesTable>,
{
    manifest.validate().map_err(|e| alloc::vec![e])?;
    let mut slices = Vec::new();
    let mut kept = Vec::new();
    let mut failures = Vec::new();
    for record in &manifest.subjects {
        let slice = load(record).and_then(|table| subject_slice(manifest, record, &table, pre));
        match slice {
            Ok(s) => {
                slices.push(s);
                kept.push(record.clone());
            }
            Err(e) => failures.push(e),
        }
    }
    if (!failures.is_empty() && !skip_bad) || slices.is_empty() {
        if failures.is_empty() {
            failures.push(Error::invalid("no subjects could be ingested"));
        }
        return Err(failures);
    }
    let tensor = ComplexTensor3::from_slices(&slices).map_err(|e| alloc::vec![e])?;
    Ok(IngestOutcome {
        cohort: IngestedCohort {
            tensor,
            subjects: kept,
            channel_names: manifest.channel_names.clone(),
        },
        skipped: failures,
    })
}

/// Subject indices per service, services in declaration order, members in
/// input order, empty services omitted.
pub fn group_by_service(subjects: &[SubjectRecord]) -> Vec<(Service, Vec<usize>)> {
    Service::ALL
        .iter()
        .filter_map(|&svc| {
            let members: Vec<usize> = (0..subjects.len())
                .filter(|&i| subjects[i].service == svc)
                .collect();
            (!members.is_empty()).then_some((svc, members))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn record(id: &str, service: Service, pain: Option<f64>) -> SubjectRecord {
        SubjectRecord {
            id: id.to_string(),
            service,
            pain_day30: pain,
            pain_day90: None,
            series_path: alloc::format!("{id}.csv"),
            incision_minute: Some(10),
        }
    }

    fn wave(len: usize, phase: f64) -> Vec<Option<f64>> {
        (0..len).map(|t| Some((0.3 * t as f64 + phase).sin() + 0.1 * t as f64)).collect()
    }

    fn manifest(n: usize, channels: usize, length: usize) -> CohortManifest {
        CohortManifest {
            subjects: (0..n).map(|i| record(&alloc::format!("s{i}"), Service::Thoracic, Some(i as f64))).collect(),
            channel_names: (0..channels).map(|c| alloc::format!("ch{c}")).collect(),
            samples_per_minute: 1,
            window: Window { anchor: WindowAnchor::RecordStart, start: 0, length },
        }
    }

    fn table(channels: usize, len: usize) -> SeriesTable {
        SeriesTable {
            channel_names: (0..channels).map(|c| alloc::format!("ch{c}")).collect(),
            columns: (0..channels).map(|c| wave(len, c as f64)).collect(),
        }
    }

    #[test]
    fn pain_threshold() {
        assert_eq!(label_pain(3.0).unwrap(), PainClass::Mild);
        assert_eq!(label_pain(3.01).unwrap(), PainClass::Severe);
        assert_eq!(label_pain(0.0).unwrap(), PainClass::Mild);
        assert!(label_pain(10.5).is_err());
        assert_eq!(record("a", Service::Other, None).label(Horizon::Day30).unwrap(), None);
    }

    #[test]
    fn incision_window_selects_leading_samples() {
        let r = Window::INCISION_50.sample_range(Some(10), 1, 120).unwrap();
        assert_eq!(r, 0..50);
        assert!(Window::INCISION_50.sample_range(Some(5), 1, 120).is_err());
        assert!(Window::INCISION_50.sample_range(None, 1, 120).is_err());
        assert_eq!(Window::FULL_75.sample_range(None, 2, 150).unwrap(), 0..150);
    }

    #[test]
    fn ingest_shapes_tensor() {
        let m = manifest(3, 2, 75);
        let out = ingest(&m, &Preprocess::default(), false, |_| Ok(table(2, 75))).unwrap();
        assert_eq!(out.cohort.tensor.dims(), [2, 75, 3]);
        assert!(out.skipped.is_empty());
    }

    #[test]
    fn short_subject_is_named() {
        let m = manifest(3, 2, 75);
        let errs = ingest(&m, &Preprocess::default(), false, |r| {
            Ok(table(2, if r.id == "s1" { 74 } else { 75 }))
        })
        .unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(matches!(&errs[0], Error::Ingest { subject, .. } if subject == "s1"));

        let out = ingest(&m, &Preprocess::default(), true, |r| {
            Ok(table(2, if r.id == "s1" { 74 } else { 75 }))
        })
        .unwrap();
        assert_eq!(out.cohort.tensor.dims(), [2, 75, 2]);
        assert_eq!(out.skipped.len(), 1);
    }

    #[test]
    fn gaps_unknown_and_flat_channels_are_itemised() {
        let m = manifest(3, 2, 20);
        let errs = ingest(&m, &Preprocess::default(), false, |r| {
            let mut t = table(2, 20);
            match r.id.as_str() {
                "s0" => t.columns[1][..3].iter_mut().for_each(|v| *v = None),
                "s1" => t.channel_names[0] = "mystery".into(),
                _ => t.columns[0] = vec![Some(1.0); 20],
            }
            Ok(t)
        })
        .unwrap_err();
        assert_eq!(errs.len(), 3);
        let channels: Vec<_> = errs
            .iter()
            .map(|e| match e {
                Error::Ingest { channel, .. } => channel.clone().unwrap(),
                _ => panic!("unexpected {e:?}"),
            })
            .collect();
        assert_eq!(channels, vec!["ch1", "mystery", "ch0"]);
    }

    #[test]
    fn subject_order_follows_manifest() {
        let m = manifest(4, 1, 10);
        let out = ingest(&m, &Preprocess::default(), false, |r| {
            let k: usize = r.id[1..].parse().unwrap();
            Ok(SeriesTable {
                channel_names: vec!["ch0".into()],
                columns: vec![wave(10, k as f64)],
            })
        })
        .unwrap();
        for k in 0..4 {
            let want = complexify_channel(&wave(10, k as f64), &Preprocess::default()).unwrap();
            for (j, w) in want.iter().enumerate() {
                assert_eq!(out.cohort.tensor.get(0, j, k), *w);
            }
        }
    }

    #[test]
    fn grouping() {
        let subjects = vec![
            record("a", Service::Urology, None),
            record("b", Service::Thoracic, None),
            record("c", Service::Urology, None),
        ];
        let groups = group_by_service(&subjects);
        assert_eq!(groups, vec![(Service::Thoracic, vec![1]), (Service::Urology, vec![0, 2])]);
        assert_eq!(groups.iter().map(|g| g.1.len()).sum::<usize>(), 3);
        let same = vec![record("a", Service::Other, None), record("b", Service::Other, None)];
        assert_eq!(group_by_service(&same).len(), 1);
    }

    #[test]
    fn label_counts_partition_the_cohort() {
        let subjects = [
            record("a", Service::Other, Some(1.0)),
            record("b", Service::Other, Some(5.0)),
            record("c", Service::Other, None),
        ];
        let labels: Vec<_> = subjects.iter().map(|s| s.label(Horizon::Day30).unwrap()).collect();
        let mild = labels.iter().filter(|l| **l == Some(false)).count();
        let severe = labels.iter().filter(|l| **l == Some(true)).count();
        let excluded = labels.iter().filter(|l| l.is_none()).count();
        assert_eq!((mild, severe, excluded), (1, 1, 1));
    }

    #[test]
    fn service_and_horizon_parsing() {
        assert_eq!("Pancreas & Biliary".parse::<Service>().unwrap(), Service::PancreasBiliary);
        assert_eq!("orthopedics".parse::<Service>().unwrap(), Service::Orthopaedics);
        assert!("cardiac".parse::<Service>().is_err());
        assert_eq!("Day-90".parse::<Horizon>().unwrap(), Horizon::Day90);
        for s in Service::ALL {
            assert_eq!(s.as_str().parse::<Service>().unwrap(), s);
        }
    }

    #[test]
    fn manifest_validation() {
        let mut m = manifest(2, 2, 10);
        assert!(m.validate().is_ok());
        m.channel_names[1] = "ch0".into();
        assert!(m.validate().is_err());
        let mut m = manifest(2, 2, 10);
        m.subjects[1].pain_day30 = Some(11.0);
        assert!(m.validate().is_err());
    }
}
