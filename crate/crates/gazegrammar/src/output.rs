//! Result files: `trials.csv`, `summary.json`, `events.ndjson`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use gazegrammar_core::harness::{
    summarize_errors, ErrorSummary, GazeEvalResult, HarnessError, NoiseModel, TaskEvalResult, TaskKind,
    TaskSummary,
};
use gazegrammar_core::pipeline::SessionEvent;
use gazegrammar_core::stats::{one_way_anova_f, spearman_rank};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectSummary {
    pub subject: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub summary: ErrorSummary,
}

/// Spearman rank correlation of each target coordinate with the signed
/// error along the same axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisCorrelation {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GazeEvalSummary {
    pub noise: NoiseModel,
    pub subjects: Vec<SubjectSummary>,
    pub overall: ErrorSummary,
    /// One-way ANOVA of Euclidean error across subjects; absent with one
    /// subject or zero within-subject variance.
    pub anova_f: Option<f64>,
    pub anova_df: Option<[usize; 2]>,
    pub spearman_target_vs_error: AxisCorrelation,
}

pub fn summarize_gaze(noise: &NoiseModel, runs: &[GazeEvalResult]) -> Result<GazeEvalSummary, HarnessError> {
    let all: Vec<_> = runs.iter().flat_map(|r| r.trials.iter().cloned()).collect();
    let overall = summarize_errors(&all)?;
    let subjects = runs
        .iter()
        .enumerate()
        .map(|(i, r)| SubjectSummary {
            subject: i as u32 + 1,
            seed: r.seed,
            summary: r.summary.clone(),
        })
        .collect();
    let groups: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.trials.iter().map(|t| t.error_euclid_m).collect())
        .collect();
    let (anova_f, anova_df) = if runs.len() >= 2 {
        match one_way_anova_f(&groups) {
            Ok(f) => (Some(f), Some([runs.len() - 1, all.len() - runs.len()])),
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    let axis = |k: usize| {
        let target: Vec<f64> = all.iter().map(|t| [t.target.x, t.target.y, t.target.z][k]).collect();
        let err: Vec<f64> = all.iter().map(|t| t.error_xyz[k]).collect();
        spearman_rank(&target, &err).ok().filter(|v| v.is_finite())
    };
    Ok(GazeEvalSummary {
        noise: *noise,
        subjects,
        overall,
        anova_f,
        anova_df,
        spearman_target_vs_error: AxisCorrelation {
            x: axis(0),
            y: axis(1),
            z: axis(2),
        },
    })
}

pub fn write_gaze_trials(path: &Path, runs: &[GazeEvalResult]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "subject",
        "seed",
        "trial_id",
        "target_x_m",
        "target_y_m",
        "target_z_m",
        "est_x_m",
        "est_y_m",
        "est_z_m",
        "error_x_m",
        "error_y_m",
        "error_z_m",
        "error_euclid_m",
    ])?;
    for (i, run) in runs.iter().enumerate() {
        for t in &run.trials {
            let mut row = vec![(i + 1).to_string(), run.seed.to_string(), t.trial_id.to_string()];
            let m = &t.mean_estimate;
            for v in [t.target.x, t.target.y, t.target.z, m.x, m.y, m.z] {
                row.push(v.to_string());
            }
            for v in t.error_xyz {
                row.push(v.to_string());
            }
            row.push(t.error_euclid_m.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()
}

pub fn write_task_trials(path: &Path, task: TaskKind, result: &TaskEvalResult) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let actions = task.actions();
    let mut header = vec!["task".to_string(), "repeat".into(), "cup_cell".into(), "bowl_cell".into(), "drop_cell".into()];
    header.extend(actions.iter().map(|a| format!("{}_success", a.to_lowercase())));
    header.extend(["full_success".into(), "reach1_attempts".into(), "recovered_from_failure".into()]);
    w.write_record(&header)?;
    let cell = |c: Option<u8>| c.map(|c| c.to_string()).unwrap_or_default();
    for r in &result.records {
        let mut row = vec![
            task.name().to_string(),
            r.repeat.to_string(),
            cell(r.cup_cell),
            cell(r.bowl_cell),
            cell(r.drop_cell),
        ];
        for a in actions {
            let ok = r.per_action_success.iter().any(|x| x.action == *a && x.success);
            row.push(ok.to_string());
        }
        row.extend([
            r.full_success.to_string(),
            r.reach1_attempts.to_string(),
            r.recovered_from_failure.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()
}

#[derive(Serialize)]
struct RepeatEvent<'a> {
    repeat: u32,
    #[serde(flatten)]
    event: &'a SessionEvent,
}

/// One event per line, each tagged with the (zero-based) repeat it came from.
pub fn write_events(path: &Path, events: &[Vec<SessionEvent>]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, repeat) in events.iter().enumerate() {
        for ev in repeat {
            let line = serde_json::to_string(&RepeatEvent {
                repeat: i as u32,
                event: ev,
            })?;
            writeln!(w, "{line}")?;
        }
    }
    w.flush()
}

#[derive(Serialize)]
pub struct TaskEvalSummary<'a> {
    pub seed: u64,
    #[serde(flatten)]
    pub summary: &'a TaskSummary,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
}
