//! Run configuration: a TOML file, overridden by command-line flags, resolved
//! into typed options plus a canonical record written into every artifact.

use std::fs;
use std::path::{Path, PathBuf};

use chosvd_core::cohort::{Horizon, Preprocess, Window, WindowAnchor};
use chosvd_core::features::{FisherVariant, Projection, Rotation, RotationReference};
use chosvd_core::hosvd::{HosvdOptions, RankSpec};
use chosvd_core::pipeline::{AucMode, PipelineOptions, Selection};
use chosvd_core::synth::SynthSpec;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "chosvd", version, about = "Complex HOSVD phase features for multichannel cohort recordings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic planted cohort in the ingestion format.
    Synth(RunArgs),
    /// Decompose each service group and write factors, core and spectra.
    Decompose(RunArgs),
    /// Cross-validate phase-feature classifiers and write reports.
    Classify(RunArgs),
    /// Summarise the reports in a classify output directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// HOSVD ranks, e.g. `4,32,full` or `energy,energy:0.9,full`.
    #[arg(long, value_name = "R1,R2,R3")]
    pub ranks: Option<String>,
    /// Analysis window in minutes, e.g. `0,75` or `incision-10,50`.
    #[arg(long, value_name = "START,LEN", allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Rotate projections by the subject factor before taking phases.
    #[arg(long)]
    pub rotate: bool,
    /// Outcome horizon: day30, day90 or both.
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Seed for fold assignment and synthetic data (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// bilinear or normalized.
    #[arg(long)]
    pub projection: Option<String>,
    /// linear or circular.
    #[arg(long)]
    pub fisher: Option<String>,
    /// in-fold or global.
    #[arg(long)]
    pub selection: Option<String>,
    /// Drop subjects that fail ingestion instead of aborting.
    #[arg(long)]
    pub skip_bad: bool,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory written by `classify`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Synthetic input: a spec file or an inline table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SynthSource {
    Path(PathBuf),
    Inline(toml::Table),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taper: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_missing: Option<f64>,
}

/// On-disk configuration. Every key is optional; the resolved record has
/// every key except `out` filled in.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequential: Option<bool>,
    /// off, on or both.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation: Option<String>,
    /// conjugate or unit-conjugate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation_mode: Option<String>,
    /// dominant or per-feature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation_reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fisher: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<String>,
    /// pooled or fold-mean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_bad: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSource>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Manifest(PathBuf),
    Synth(SynthSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Synth,
    Analyze,
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Input,
    /// `None` keeps the manifest's window.
    pub window: Option<Window>,
    pub hosvd: HosvdOptions,
    pub rotations: Vec<Rotation>,
    pub horizons: Vec<Horizon>,
    pub pipeline: PipelineOptions,
    pub preprocess: Preprocess,
    pub skip_bad: bool,
    pub out: PathBuf,
    /// Canonical form of the above, minus `out`, for audit headers.
    pub record: ConfigFile,
}

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::usage(format!("invalid {key} `{value}`: expected {expected}"))
}

fn key(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace('_', "-")
}

pub fn parse_rank(s: &str) -> CliResult<RankSpec> {
    let k = key(s);
    if k == "full" {
        return Ok(RankSpec::Full);
    }
    if k == "energy" {
        return Ok(RankSpec::Energy(chosvd_core::hosvd::DEFAULT_ENERGY));
    }
    if let Some(tau) = k.strip_prefix("energy:") {
        return tau
            .parse::<f64>()
            .ok()
            .filter(|t| *t > 0.0 && *t <= 1.0)
            .map(RankSpec::Energy)
            .ok_or_else(|| bad("rank", s, "an energy fraction in (0, 1]"));
    }
    k.parse::<usize>()
        .ok()
        .filter(|&r| r > 0)
        .map(RankSpec::Fixed)
        .ok_or_else(|| bad("rank", s, "a positive integer, `full` or `energy[:tau]`"))
}

pub fn parse_ranks(s: &str) -> CliResult<[RankSpec; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(bad("ranks", s, "three comma-separated ranks"));
    }
    Ok([parse_rank(parts[0])?, parse_rank(parts[1])?, parse_rank(parts[2])?])
}

pub fn format_ranks(ranks: &[RankSpec; 3]) -> String {
    ranks
        .iter()
        .map(|r| match r {
            RankSpec::Fixed(n) => n.to_string(),
            RankSpec::Full => "full".to_string(),
            RankSpec::Energy(t) => format!("energy:{t}"),
        })
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_window(s: &str) -> CliResult<Window> {
    let expected = "`START,LEN` with START an integer or `incision[+-]N`";
    let (start, len) = s.split_once(',').ok_or_else(|| bad("window", s, expected))?;
    let length: usize = len
        .trim()
        .parse()
        .ok()
        .filter(|&l| l > 0)
        .ok_or_else(|| bad("window", s, expected))?;
    let start = key(start);
    let (anchor, offset) = match start.strip_prefix("incision") {
        Some("") => (WindowAnchor::Incision, 0),
        Some(rest) => {
            let n = rest.strip_prefix('+').unwrap_or(rest);
            (WindowAnchor::Incision, n.parse().map_err(|_| bad("window", s, expected))?)
        }
        None => (WindowAnchor::RecordStart, start.parse().map_err(|_| bad("window", s, expected))?),
    };
    if anchor == WindowAnchor::RecordStart && offset < 0 {
        return Err(bad("window", s, "a non-negative start for record-anchored windows"));
    }
    Ok(Window { anchor, start: offset, length })
}

pub fn format_window(w: &Window) -> String {
    match w.anchor {
        WindowAnchor::RecordStart => format!("{},{}", w.start, w.length),
        WindowAnchor::Incision if w.start == 0 => format!("incision,{}", w.length),
        WindowAnchor::Incision => format!("incision{:+},{}", w.start, w.length),
    }
}

fn parse_horizons(s: &str) -> CliResult<Vec<Horizon>> {
    if key(s) == "both" {
        return Ok(vec![Horizon::Day30, Horizon::Day90]);
    }
    s.parse::<Horizon>()
        .map(|h| vec![h])
        .map_err(|_| bad("horizon", s, "day30, day90 or both"))
}

fn format_horizons(h: &[Horizon]) -> String {
    if h.len() == 2 {
        "both".to_string()
    } else {
        h[0].as_str().to_string()
    }
}

fn parse_rotation_mode(s: &str) -> CliResult<Rotation> {
    match key(s).as_str() {
        "conjugate" => Ok(Rotation::Conjugate),
        "unit-conjugate" => Ok(Rotation::UnitConjugate),
        _ => Err(bad("rotation_mode", s, "conjugate or unit-conjugate")),
    }
}

fn parse_rotations(s: &str, mode: Rotation) -> CliResult<Vec<Rotation>> {
    match key(s).as_str() {
        "off" => Ok(vec![Rotation::Off]),
        "on" => Ok(vec![mode]),
        "both" => Ok(vec![Rotation::Off, mode]),
        _ => Err(bad("rotation", s, "off, on or both")),
    }
}

fn parse_projection(s: &str) -> CliResult<Projection> {
    match key(s).as_str() {
        "bilinear" => Ok(Projection::Bilinear),
        "normalized" | "normalised" => Ok(Projection::Normalized),
        _ => Err(bad("projection", s, "bilinear or normalized")),
    }
}

fn parse_fisher(s: &str) -> CliResult<FisherVariant> {
    match key(s).as_str() {
        "linear" => Ok(FisherVariant::Linear),
        "circular" => Ok(FisherVariant::Circular),
        _ => Err(bad("fisher", s, "linear or circular")),
    }
}

fn parse_selection(s: &str) -> CliResult<Selection> {
    match key(s).as_str() {
        "in-fold" | "infold" => Ok(Selection::InFold),
        "global" => Ok(Selection::Global),
        _ => Err(bad("selection", s, "in-fold or global")),
    }
}

fn parse_reference(s: &str) -> CliResult<RotationReference> {
    match key(s).as_str() {
        "dominant" => Ok(RotationReference::Dominant),
        "per-feature" => Ok(RotationReference::PerFeature),
        _ => Err(bad("rotation_reference", s, "dominant or per-feature")),
    }
}

fn parse_auc(s: &str) -> CliResult<AucMode> {
    match key(s).as_str() {
        "pooled" => Ok(AucMode::Pooled),
        "fold-mean" => Ok(AucMode::FoldMean),
        _ => Err(bad("auc", s, "pooled or fold-mean")),
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::usage(format!("`{}` does not exist", path.display()))
        } else {
            CliError::Read { path: path.to_path_buf(), source: e }
        }
    })?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("`{}`: {e}", path.display())))
}

fn resolve_against(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads a synthetic spec, taking the run seed when the spec names none.
fn synth_spec(source: Option<&SynthSource>, base: &Path, seed: u64) -> CliResult<toml::Table> {
    let mut table = match source {
        None => toml::Table::new(),
        Some(SynthSource::Inline(t)) => t.clone(),
        Some(SynthSource::Path(p)) => read_toml(&resolve_against(base, p))?,
    };
    if !table.contains_key("seed") {
        let seed = i64::try_from(seed).map_err(|_| CliError::usage("seed must be below 2^63 for synthetic input"))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    // Canonicalise: parse, then re-serialise every field.
    let spec: SynthSpec = table
        .clone()
        .try_into()
        .map_err(|e| CliError::usage(format!("invalid synth spec: {e}")))?;
    spec.validate()?;
    toml::Table::try_from(&spec).map_err(|e| CliError::usage(format!("invalid synth spec: {e}")))
}

impl RunConfig {
    pub fn resolve(args: &RunArgs, purpose: Purpose) -> CliResult<Self> {
        let (file, base) = match &args.config {
            Some(path) => {
                let file: ConfigFile = read_toml(path)?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, base)
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        Self::from_parts(file, &base, args, purpose)
    }

    pub fn from_parts(file: ConfigFile, base: &Path, args: &RunArgs, purpose: Purpose) -> CliResult<Self> {
        let seed = args
            .seed
            .or(file.seed)
            .ok_or_else(|| CliError::usage("a seed is required (`--seed N` or `seed = N`)"))?;
        let out = args
            .out
            .clone()
            .or_else(|| file.out.as_ref().map(|p| resolve_against(base, p)))
            .ok_or_else(|| CliError::usage("an output directory is required (`--out DIR` or `out = ...`)"))?;

        let mut record = ConfigFile { seed: Some(seed), ..ConfigFile::default() };
        let input = match (purpose, &file.manifest, &file.synth) {
            (_, Some(_), Some(_)) => return Err(CliError::usage("give either `manifest` or `synth`, not both")),
            (Purpose::Synth, Some(_), None) => {
                return Err(CliError::usage("`synth` writes a cohort; it takes a `synth` spec, not a manifest"))
            }
            (Purpose::Analyze, None, None) => {
                return Err(CliError::usage("no input: set `manifest = ...` or a `[synth]` table in the config"))
            }
            (_, Some(m), None) => {
                let path = resolve_against(base, m);
                if !path.is_file() {
                    return Err(CliError::usage(format!("manifest `{}` does not exist", path.display())));
                }
                let path = path.canonicalize().map_err(|e| CliError::Read { path: path.clone(), source: e })?;
                record.manifest = Some(path.clone());
                Input::Manifest(path)
            }
            (_, None, synth) => {
                let table = synth_spec(synth.as_ref(), base, seed)?;
                let spec: SynthSpec = table
                    .clone()
                    .try_into()
                    .map_err(|e| CliError::usage(format!("invalid synth spec: {e}")))?;
                record.synth = Some(SynthSource::Inline(table));
                Input::Synth(spec)
            }
        };

        let window = args.window.as_deref().or(file.window.as_deref()).map(parse_window).transpose()?;
        record.window = window.as_ref().map(format_window);

        let mut hosvd = HosvdOptions::default();
        if let Some(r) = args.ranks.as_deref().or(file.ranks.as_deref()) {
            hosvd.ranks = parse_ranks(r)?;
        }
        hosvd.sequential = file.sequential.unwrap_or(false);
        record.ranks = Some(format_ranks(&hosvd.ranks));
        record.sequential = Some(hosvd.sequential);

        let mode = file.rotation_mode.as_deref().map(parse_rotation_mode).transpose()?.unwrap_or(Rotation::Conjugate);
        let rotation = if args.rotate { "on" } else { file.rotation.as_deref().unwrap_or("off") };
        let rotations = parse_rotations(rotation, mode)?;
        record.rotation = Some(key(rotation));
        record.rotation_mode = Some(if mode == Rotation::UnitConjugate { "unit-conjugate" } else { "conjugate" }.into());

        let horizons = parse_horizons(args.horizon.as_deref().or(file.horizon.as_deref()).unwrap_or("both"))?;
        record.horizon = Some(format_horizons(&horizons));

        let mut pipeline = PipelineOptions::new(seed);
        pipeline.hosvd = hosvd;
        pipeline.folds = args.folds.or(file.folds).unwrap_or(pipeline.folds);
        if pipeline.folds < 2 {
            return Err(CliError::usage("folds must be at least 2"));
        }
        pipeline.top_k = file.top_k.unwrap_or(pipeline.top_k);
        if pipeline.top_k == 0 {
            return Err(CliError::usage("top_k must be positive"));
        }
        if let Some(p) = args.projection.as_deref().or(file.projection.as_deref()) {
            pipeline.features.projection = parse_projection(p)?;
        }
        if let Some(r) = file.rotation_reference.as_deref() {
            pipeline.features.reference = parse_reference(r)?;
        }
        if let Some(f) = args.fisher.as_deref().or(file.fisher.as_deref()) {
            pipeline.fisher = parse_fisher(f)?;
        }
        if let Some(s) = args.selection.as_deref().or(file.selection.as_deref()) {
            pipeline.selection = parse_selection(s)?;
        }
        if let Some(a) = file.auc.as_deref() {
            pipeline.auc = parse_auc(a)?;
        }
        record.folds = Some(pipeline.folds);
        record.top_k = Some(pipeline.top_k);
        record.projection = Some(
            match pipeline.features.projection {
                Projection::Bilinear => "bilinear",
                Projection::Normalized => "normalized",
            }
            .into(),
        );
        record.rotation_reference = Some(
            match pipeline.features.reference {
                RotationReference::Dominant => "dominant",
                RotationReference::PerFeature => "per-feature",
            }
            .into(),
        );
        record.fisher = Some(
            match pipeline.fisher {
                FisherVariant::Linear => "linear",
                FisherVariant::Circular => "circular",
            }
            .into(),
        );
        record.selection = Some(
            match pipeline.selection {
                Selection::InFold => "in-fold",
                Selection::Global => "global",
            }
            .into(),
        );
        record.auc = Some(
            match pipeline.auc {
                AucMode::Pooled => "pooled",
                AucMode::FoldMean => "fold-mean",
            }
            .into(),
        );

        let pf = file.preprocess.unwrap_or_default();
        let preprocess = Preprocess {
            standardize: pf.standardize.unwrap_or(true),
            taper: pf.taper.unwrap_or(false),
            max_missing: pf.max_missing.unwrap_or(chosvd_core::signal::DEFAULT_MAX_MISSING),
        };
        if !(0.0..1.0).contains(&preprocess.max_missing) {
            return Err(CliError::usage("preprocess.max_missing must lie in [0, 1)"));
        }
        record.preprocess = Some(PreprocessFile {
            standardize: Some(preprocess.standardize),
            taper: Some(preprocess.taper),
            max_missing: Some(preprocess.max_missing),
        });

        let skip_bad = args.skip_bad || file.skip_bad.unwrap_or(false);
        record.skip_bad = Some(skip_bad);

        Ok(RunConfig {
            input,
            window,
            hosvd,
            rotations,
            horizons,
            pipeline,
            preprocess,
            skip_bad,
            out,
            record,
        })
    }

    /// The record as a TOML document that reproduces this run via `--config`.
    pub fn record_toml(&self) -> String {
        toml::to_string(&self.record).expect("config record serialises")
    }

    /// The record as single-line JSON, for audit headers.
    pub fn record_json(&self) -> String {
        serde_json::to_value(&self.record)
            .expect("config record serialises")
            .to_string()
    }
}
