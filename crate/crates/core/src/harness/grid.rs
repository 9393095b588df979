//! Cartesian grid search over configuration fields.
//!
//! Grid files hold one field per line with `|`-separated candidate values:
//!
//! ```text
//! dropout_keep  = 0.25,0.25 | 0.5,0.5 | 0.75,0.75
//! learning_rate = 0.1 | 0.01
//! ```

use std::io::Write;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::fmt_value;
use super::train::{train, RunResult, RunStatus};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Grid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Grid> {
        let mut axes: Vec<(String, Vec<String>)> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, values) = line
                .split_once('=')
                .ok_or_else(|| Error::param(format!("grid line {}: expected key = v1 | v2", no + 1)))?;
            let key = key.trim().to_string();
            if axes.iter().any(|(k, _)| *k == key) {
                return Err(Error::param(format!("grid key '{key}' appears twice")));
            }
            let values: Vec<String> = values.split('|').map(|v| v.trim().to_string()).collect();
            if values.iter().any(String::is_empty) {
                return Err(Error::param(format!("grid key '{key}' has an empty value")));
            }
            axes.push((key, values));
        }
        Ok(Grid { axes })
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|(_, v)| v.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every combination as `(key, value)` pairs; the last axis varies
    /// fastest.
    pub fn points(&self) -> Vec<Vec<(String, String)>> {
        let mut points = vec![Vec::new()];
        if self.axes.is_empty() {
            return Vec::new();
        }
        for (key, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// Runs `run` on every grid point applied over `base`. Points that do not
/// form a valid configuration, or whose run fails, are recorded as invalid.
/// Results are sorted by best validation accuracy, descending, with invalid
/// and diverged-without-history runs last; ties keep grid order.
pub fn grid_search_with<F>(base: &ExperimentConfig, grid: &Grid, run: F) -> Result<Vec<RunResult>>
where
    F: Fn(&ExperimentConfig) -> Result<RunResult> + Sync,
{
    if grid.is_empty() {
        return Err(Error::param("grid has no points"));
    }
    let mut results: Vec<RunResult> = grid
        .points()
        .into_par_iter()
        .map(|point| {
            let mut cfg = base.clone();
            for (k, v) in &point {
                if let Err(e) = cfg.set(k, v) {
                    return RunResult::invalid(cfg, e.to_string());
                }
            }
            if let Err(e) = cfg.validate() {
                return RunResult::invalid(cfg, e.to_string());
            }
            run(&cfg).unwrap_or_else(|e| RunResult::invalid(cfg.clone(), e.to_string()))
        })
        .collect();
    let key = |r: &RunResult| if r.best_valid_acc.is_nan() { f64::NEG_INFINITY } else { r.best_valid_acc };
    results.sort_by(|a, b| key(b).total_cmp(&key(a)));
    Ok(results)
}

pub fn grid_search(base: &ExperimentConfig, grid: &Grid, train_set: &Dataset, valid_set: &Dataset) -> Result<Vec<RunResult>> {
    grid_search_with(base, grid, |cfg| train(cfg, train_set, valid_set).map(|t| t.result))
}

fn status_label(s: &RunStatus) -> String {
    match s {
        RunStatus::Completed => "completed".into(),
        RunStatus::EarlyStopped { epoch } => format!("early-stopped@{epoch}"),
        RunStatus::Diverged { epoch } => format!("diverged@{epoch}"),
        RunStatus::Invalid(_) => "invalid".into(),
    }
}

/// One row per run with the grid fields as leading columns.
pub fn write_results_csv(w: impl Write, grid: &Grid, results: &[RunResult]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header: Vec<String> = vec!["rank".into()];
    header.extend(grid.axes.iter().map(|(k, _)| k.clone()));
    header.extend(
        [
            "status",
            "best_valid_acc",
            "best_epoch",
            "final_train_loss",
            "final_train_acc",
            "final_valid_loss",
            "final_valid_acc",
            "epochs_run",
            "mean_epoch_seconds",
            "note",
        ]
        .map(String::from),
    );
    out.write_record(&header).map_err(csv_err)?;
    for (rank, r) in results.iter().enumerate() {
        let mut row = vec![(rank + 1).to_string()];
        for (k, _) in &grid.axes {
            row.push(r.config.get(k).unwrap_or_default());
        }
        let last = r.final_metrics();
        let pick = |f: fn(&super::train::EpochMetrics) -> f64| last.map_or("nan".into(), |m| fmt_value(f(m)));
        let mean_secs = if r.history.is_empty() {
            f64::NAN
        } else {
            r.history.iter().map(|m| m.epoch_seconds).sum::<f64>() / r.history.len() as f64
        };
        row.push(status_label(&r.status));
        row.push(fmt_value(r.best_valid_acc));
        row.push(r.best_epoch.to_string());
        row.push(pick(|m| m.train_loss));
        row.push(pick(|m| m.train_acc));
        row.push(pick(|m| m.valid_loss));
        row.push(pick(|m| m.valid_acc));
        row.push(r.history.len().to_string());
        row.push(fmt_value(mean_secs));
        row.push(match &r.status {
            RunStatus::Invalid(why) => why.clone(),
            _ => String::new(),
        });
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
