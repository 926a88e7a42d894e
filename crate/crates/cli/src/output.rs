//! Artifact assembly. Everything is rendered in memory first and written
//! only after the whole command has succeeded, so failures leave no
//! partial output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chosvd_core::pipeline::{EvalReport, GroupOutcome};
use chosvd_core::{ComplexMatrix, ComplexTensor3};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "chosvd";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, String)>,
}

impl Artifacts {
    pub fn add(&mut self, rel: impl Into<PathBuf>, content: String) {
        self.files.push((rel.into(), content));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn write_all(&self, out: &Path) -> CliResult<()> {
        for (rel, content) in &self.files {
            let path = out.join(rel);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| CliError::Write { path: dir.to_path_buf(), source: e })?;
            }
            fs::write(&path, content).map_err(|e| CliError::Write { path: path.clone(), source: e })?;
        }
        Ok(())
    }
}

/// Comment header for text, CSV and TOML artifacts.
pub fn audit_header(command: &str, cfg: &RunConfig) -> String {
    format!("# {TOOL} {VERSION} {command}\n# config: {}\n", cfg.record_json())
}

pub fn audit_json(command: &str, cfg: &RunConfig) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "config": cfg.record,
    })
}

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serialises");
    s.push('\n');
    s
}

/// Rows of `[re, im]` pairs.
pub fn matrix_json(m: &ComplexMatrix) -> Value {
    let rows: Vec<Value> = (0..m.rows())
        .map(|i| Value::Array((0..m.cols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
        .collect();
    json!({ "rows": m.rows(), "cols": m.cols(), "data": rows })
}

/// Flat `[re, im]` list in storage order `i + I1*(j + I2*k)`.
pub fn tensor_json(t: &ComplexTensor3) -> Value {
    json!({
        "dims": t.dims(),
        "layout": "i + I1*(j + I2*k)",
        "data": t.as_slice().iter().map(|z| json!([z.re, z.im])).collect::<Vec<_>>(),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn opt_csv(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Human-readable summary of all outcomes.
pub fn summary_text(outcomes: &[GroupOutcome]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<18} {:<7} {:<7} {:>4} {:>6} {:>4} {:>4} {:>4} {:>4} {:>4} {:>5} {:>5} {:>5} {:>5}",
        "group", "horizon", "rotated", "mild", "severe", "excl", "TP", "FN", "FP", "TN", "PPV", "TPR", "TNR", "AUC"
    );
    for o in outcomes {
        match o {
            GroupOutcome::Evaluated(r) => {
                let c = r.metrics.confusion;
                let _ = writeln!(
                    s,
                    "{:<18} {:<7} {:<7} {:>4} {:>6} {:>4} {:>4} {:>4} {:>4} {:>4} {:>5} {:>5} {:>5} {:>5.2}",
                    r.group,
                    r.horizon.as_str(),
                    yes_no(r.rotated),
                    r.n_mild,
                    r.n_severe,
                    r.n_excluded,
                    c.tp,
                    c.fn_,
                    c.fp,
                    c.tn,
                    opt(r.metrics.ppv),
                    opt(r.metrics.tpr),
                    opt(r.metrics.tnr),
                    r.auc
                );
            }
            GroupOutcome::Skipped { group, horizon, rotated, reason } => {
                let _ = writeln!(
                    s,
                    "{:<18} {:<7} {:<7} skipped: {reason}",
                    group,
                    horizon.as_str(),
                    yes_no(*rotated)
                );
            }
        }
    }
    for r in outcomes.iter().filter_map(GroupOutcome::report) {
        let _ = writeln!(s, "\n[{} {} rotated={}]", r.group, r.horizon.as_str(), yes_no(r.rotated));
        for (f, sel) in r.selected_features.iter().enumerate() {
            let pairs: Vec<String> = sel.iter().map(|(a, b)| format!("({},{})", a + 1, b + 1)).collect();
            let _ = writeln!(s, "  fold {}: {}", f + 1, pairs.join(" "));
        }
        for w in &r.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
    }
    s
}

fn csv_string(header: &str, rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    rows(&mut w).expect("in-memory csv write");
    let mut out = String::from(header);
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory csv write")).expect("utf-8"));
    out
}

fn keys(r: &EvalReport) -> [String; 3] {
    [r.group.clone(), r.horizon.as_str().to_string(), r.rotated.to_string()]
}

pub fn reports_csv(header: &str, outcomes: &[GroupOutcome]) -> String {
    csv_string(header, |w| {
        w.write_record([
            "group", "horizon", "rotated", "status", "n_mild", "n_severe", "n_excluded", "tp", "fn", "fp", "tn",
            "ppv", "tpr", "tnr", "auc", "note",
        ])?;
        for o in outcomes {
            match o {
                GroupOutcome::Evaluated(r) => {
                    let c = r.metrics.confusion;
                    let [g, h, rot] = keys(r);
                    w.write_record([
                        g,
                        h,
                        rot,
                        "evaluated".into(),
                        r.n_mild.to_string(),
                        r.n_severe.to_string(),
                        r.n_excluded.to_string(),
                        c.tp.to_string(),
                        c.fn_.to_string(),
                        c.fp.to_string(),
                        c.tn.to_string(),
                        opt_csv(r.metrics.ppv),
                        opt_csv(r.metrics.tpr),
                        opt_csv(r.metrics.tnr),
                        r.auc.to_string(),
                        r.warnings.join("; "),
                    ])?;
                }
                GroupOutcome::Skipped { group, horizon, rotated, reason } => {
                    let mut row = vec![group.clone(), horizon.as_str().into(), rotated.to_string(), "skipped".into()];
                    row.extend(std::iter::repeat_n(String::new(), 11));
                    row.push(reason.clone());
                    w.write_record(row)?;
                }
            }
        }
        Ok(())
    })
}

/// Held-out scores and fold membership, one row per subject.
pub fn folds_csv(header: &str, outcomes: &[GroupOutcome]) -> String {
    csv_string(header, |w| {
        w.write_record(["group", "horizon", "rotated", "id", "fold", "severe", "score", "predicted_severe"])?;
        for r in outcomes.iter().filter_map(GroupOutcome::report) {
            for h in &r.held_out {
                let [g, hz, rot] = keys(r);
                w.write_record([
                    g,
                    hz,
                    rot,
                    h.id.clone(),
                    (h.fold + 1).to_string(),
                    h.severe.to_string(),
                    h.score.to_string(),
                    h.predicted_severe.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

/// Features chosen in each fold, 1-based component indices.
pub fn selected_csv(header: &str, outcomes: &[GroupOutcome]) -> String {
    csv_string(header, |w| {
        w.write_record(["group", "horizon", "rotated", "fold", "rank", "a", "b"])?;
        for r in outcomes.iter().filter_map(GroupOutcome::report) {
            for (f, sel) in r.selected_features.iter().enumerate() {
                for (rank, (a, b)) in sel.iter().enumerate() {
                    let [g, hz, rot] = keys(r);
                    w.write_record([
                        g,
                        hz,
                        rot,
                        (f + 1).to_string(),
                        (rank + 1).to_string(),
                        (a + 1).to_string(),
                        (b + 1).to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

/// Tidy phase table for scatter plots: one row per subject and axis.
pub fn scatter_csv(header: &str, outcomes: &[GroupOutcome]) -> String {
    csv_string(header, |w| {
        w.write_record(["group", "horizon", "rotated", "id", "severe", "axis", "a", "b", "phase"])?;
        for r in outcomes.iter().filter_map(GroupOutcome::report) {
            for p in &r.scatter {
                for (axis, (&(a, b), phase)) in r.scatter_features.iter().zip(&p.phases).enumerate() {
                    let [g, hz, rot] = keys(r);
                    w.write_record([
                        g,
                        hz,
                        rot,
                        p.id.clone(),
                        p.severe.to_string(),
                        (axis + 1).to_string(),
                        (a + 1).to_string(),
                        (b + 1).to_string(),
                        phase.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}
