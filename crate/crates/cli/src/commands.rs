use std::fs;
use std::path::{Path, PathBuf};

use chosvd_core::cohort::{
    ingest, CohortManifest, DEFAULT_CHANNELS, IngestedCohort, SeriesTable, Service, SubjectRecord, Window,
    WindowAnchor,
};
use chosvd_core::hosvd::reconstruction_error;
use chosvd_core::pipeline::{analyze, decompose_groups, GroupOutcome};
use chosvd_core::synth::{synth_cohort, SynthCohort};
use chosvd_core::RealMatrix;
use serde_json::json;

use crate::config::{Input, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{format_series, load_all_series, load_manifest, ManifestFile};
use crate::output::{self, audit_header, audit_json, matrix_json, tensor_json, to_json, Artifacts};

/// Pain scores written for synthetic subjects.
pub const SYNTH_SEVERE_SCORE: f64 = 7.0;
pub const SYNTH_MILD_SCORE: f64 = 2.0;

pub fn synth_channel_names(n: usize) -> Vec<String> {
    if n == DEFAULT_CHANNELS.len() {
        DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|c| format!("channel_{c}")).collect()
    }
}

/// Manifest describing a synthetic cohort as exported by `synth`.
pub fn synth_manifest(cohort: &SynthCohort) -> CohortManifest {
    let [channels, samples, subjects] = cohort.spec.dims;
    let width = subjects.to_string().len().max(3);
    CohortManifest {
        subjects: (0..subjects)
            .map(|p| {
                let id = format!("s{:0width$}", p + 1);
                let score = if cohort.labels[p] { SYNTH_SEVERE_SCORE } else { SYNTH_MILD_SCORE };
                SubjectRecord {
                    series_path: format!("series/{id}.csv"),
                    id,
                    service: Service::Other,
                    pain_day30: Some(score),
                    pain_day90: Some(score),
                    incision_minute: None,
                }
            })
            .collect(),
        channel_names: synth_channel_names(channels),
        samples_per_minute: 1,
        window: Window { anchor: WindowAnchor::RecordStart, start: 0, length: samples },
    }
}

fn table_from_recording(names: &[String], m: &RealMatrix) -> SeriesTable {
    SeriesTable {
        channel_names: names.to_vec(),
        columns: (0..m.rows()).map(|c| m.row(c).iter().map(|&v| Some(v)).collect()).collect(),
    }
}

/// Cohort after ingestion, with skipped-subject notes.
pub struct Loaded {
    pub cohort: IngestedCohort,
    pub skipped: Vec<String>,
}

/// Ingests the configured input. Synthetic cohorts go through the same
/// windowing and preprocessing as exported files.
pub fn load_cohort(cfg: &RunConfig) -> CliResult<Loaded> {
    let (mut manifest, tables) = match &cfg.input {
        Input::Manifest(path) => {
            let manifest = load_manifest(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            let tables = load_all_series(&manifest, base);
            (manifest, tables)
        }
        Input::Synth(spec) => {
            let cohort = synth_cohort(spec, &cfg.preprocess)?;
            let manifest = synth_manifest(&cohort);
            let tables = cohort
                .recordings
                .iter()
                .map(|m| Ok(table_from_recording(&manifest.channel_names, m)))
                .collect();
            (manifest, tables)
        }
    };
    if let Some(w) = cfg.window {
        manifest.window = w;
    }
    let mut tables = tables.into_iter();
    let outcome = ingest(&manifest, &cfg.preprocess, cfg.skip_bad, |_| {
        tables.next().expect("one table per subject")
    })
    .map_err(CliError::Ingest)?;
    let skipped: Vec<String> = outcome.skipped.iter().map(ToString::to_string).collect();
    for s in &skipped {
        log::warn!("skipped {s}");
    }
    Ok(Loaded { cohort: outcome.cohort, skipped })
}

pub fn cmd_synth(cfg: &RunConfig) -> CliResult<Artifacts> {
    let Input::Synth(spec) = &cfg.input else {
        return Err(CliError::usage("`synth` needs a synthetic spec"));
    };
    let cohort = synth_cohort(spec, &cfg.preprocess)?;
    let manifest = synth_manifest(&cohort);
    let header = audit_header("synth", cfg);

    let mut files = Artifacts::default();
    let body = toml::to_string(&ManifestFile::from_manifest(&manifest)).expect("manifest serialises");
    files.add("manifest.toml", format!("{header}{body}"));
    for (s, rec) in manifest.subjects.iter().zip(&cohort.recordings) {
        files.add(&s.series_path, format_series(&manifest.channel_names, rec, &header));
    }
    let t = &cohort.truth;
    files.add(
        "truth.json",
        to_json(&json!({
            "audit": audit_json("synth", cfg),
            "subjects": manifest.subjects.iter().map(|s| &s.id).collect::<Vec<_>>(),
            "severe": cohort.labels,
            "multivariate": matrix_json(&t.multivariate),
            "temporal": matrix_json(&t.temporal),
            "nuisance_phases": t.nuisance_phases,
            "component_pairs": t.component_pairs,
        })),
    );
    files.add("resolved_config.toml", format!("{header}{}", cfg.record_toml()));
    Ok(files)
}

fn group_dir(name: &str) -> PathBuf {
    PathBuf::from("groups").join(name)
}

pub fn cmd_decompose(cfg: &RunConfig) -> CliResult<Artifacts> {
    let loaded = load_cohort(cfg)?;
    let cohort = &loaded.cohort;
    let groups = decompose_groups(&cohort.tensor, &cohort.subjects, &cfg.hosvd)?;
    let header = audit_header("decompose", cfg);
    let audit = audit_json("decompose", cfg);

    let mut files = Artifacts::default();
    let mut text = header.clone();
    for g in &groups {
        let f = &g.factors;
        let ids: Vec<&str> = g.members.iter().map(|&i| cohort.subjects[i].id.as_str()).collect();
        let dir = group_dir(&g.name);
        files.add(
            dir.join("factors.json"),
            to_json(&json!({
                "audit": audit,
                "group": g.name,
                "subjects": ids,
                "channels": cohort.channel_names,
                "u1": matrix_json(&f.factors[0]),
                "u2": matrix_json(&f.factors[1]),
                "u3": matrix_json(&f.factors[2]),
            })),
        );
        files.add(
            dir.join("core.json"),
            to_json(&json!({ "audit": audit, "group": g.name, "core": tensor_json(&f.core) })),
        );
        let err = reconstruction_error(f, &g.tensor)?;
        let norm = g.tensor.frobenius_norm();
        let rel = if norm > 0.0 { err / norm } else { 0.0 };
        let bound = f.truncation_bound();
        files.add(
            dir.join("spectrum.json"),
            to_json(&json!({
                "audit": audit,
                "group": g.name,
                "dims": f.dims(),
                "ranks": f.ranks(),
                "mode_singular_values": f.mode_singular_values,
                "reconstruction_error": err,
                "relative_reconstruction_error": rel,
                "truncation_bound": bound,
            })),
        );
        text.push_str(&format!(
            "\n[{}] subjects {}, dims {:?}, ranks {:?}\n  reconstruction error {err:.3e} (relative {rel:.3e}), squared bound {bound:.3e}\n",
            g.name,
            ids.len(),
            f.dims(),
            f.ranks()
        ));
        for (n, sv) in f.mode_singular_values.iter().enumerate() {
            let total: f64 = sv.iter().map(|s| s * s).sum();
            let kept: f64 = sv.iter().take(f.ranks()[n]).map(|s| s * s).sum();
            let energy = if total > 0.0 { kept / total } else { 1.0 };
            let head: Vec<String> = sv.iter().take(8).map(|s| format!("{s:.4}")).collect();
            text.push_str(&format!(
                "  mode {}: energy kept {energy:.4}; leading sigma {}\n",
                n + 1,
                head.join(" ")
            ));
        }
    }
    for s in &loaded.skipped {
        text.push_str(&format!("skipped: {s}\n"));
    }
    files.add("spectrum.txt", text);
    files.add("resolved_config.toml", format!("{header}{}", cfg.record_toml()));
    Ok(files)
}

pub fn classify_outcomes(cfg: &RunConfig) -> CliResult<(Vec<GroupOutcome>, Vec<String>)> {
    let loaded = load_cohort(cfg)?;
    let cohort = &loaded.cohort;
    let groups = decompose_groups(&cohort.tensor, &cohort.subjects, &cfg.hosvd)?;
    let outcomes = analyze(&groups, &cohort.subjects, &cfg.horizons, &cfg.rotations, &cfg.pipeline)?;
    Ok((outcomes, loaded.skipped))
}

pub fn cmd_classify(cfg: &RunConfig) -> CliResult<Artifacts> {
    let (outcomes, skipped) = classify_outcomes(cfg)?;
    let header = audit_header("classify", cfg);
    let mut files = Artifacts::default();
    files.add(
        "classify.json",
        to_json(&json!({
            "audit": audit_json("classify", cfg),
            "skipped_subjects": skipped,
            "outcomes": outcomes,
        })),
    );
    let mut text = header.clone();
    text.push('\n');
    text.push_str(&output::summary_text(&outcomes));
    for s in &skipped {
        text.push_str(&format!("skipped subject: {s}\n"));
    }
    files.add("report.txt", text);
    files.add("reports.csv", output::reports_csv(&header, &outcomes));
    files.add("folds.csv", output::folds_csv(&header, &outcomes));
    files.add("selected_features.csv", output::selected_csv(&header, &outcomes));
    files.add("scatter.csv", output::scatter_csv(&header, &outcomes));
    files.add("resolved_config.toml", format!("{header}{}", cfg.record_toml()));
    Ok(files)
}

/// Re-renders the summary of a `classify` output directory.
pub fn cmd_report(dir: &Path) -> CliResult<String> {
    let path = dir.join("classify.json");
    let text = fs::read_to_string(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::usage(format!("`{}` not found; run `classify` first", path.display()))
        } else {
            CliError::Read { path: path.clone(), source: e }
        }
    })?;
    let parse = |reason: String| CliError::Parse { path: path.clone(), reason };
    let mut doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?;
    let outcomes: Vec<GroupOutcome> =
        serde_json::from_value(doc["outcomes"].take()).map_err(|e| parse(e.to_string()))?;
    let audit = &doc["audit"];
    Ok(format!(
        "# {} {} classify\n# config: {}\n\n{}",
        audit["tool"].as_str().unwrap_or(output::TOOL),
        audit["version"].as_str().unwrap_or("?"),
        audit["config"],
        output::summary_text(&outcomes)
    ))
}
