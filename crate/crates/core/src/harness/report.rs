//! CSV output for training histories and overtraining diagnostics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::train::EpochMetrics;
use crate::error::{Error, Result};

pub const CURVES_HEADER: &str = "epoch,train_loss,train_acc,valid_loss,valid_acc,epoch_seconds";
pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,valid_loss,valid_acc";

/// Shortest round-tripping decimal; every non-finite value becomes `nan`.
pub fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "nan".into()
    }
}

fn parse_value(s: &str) -> Result<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        v => v.parse().map_err(|_| Error::Format(format!("bad number '{v}'"))),
    }
}

pub fn write_curves(w: &mut impl Write, history: &[EpochMetrics]) -> std::io::Result<()> {
    writeln!(w, "{CURVES_HEADER}")?;
    for m in history {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            m.epoch,
            fmt_value(m.train_loss),
            fmt_value(m.train_acc),
            fmt_value(m.valid_loss),
            fmt_value(m.valid_acc),
            fmt_value(m.epoch_seconds)
        )?;
    }
    Ok(())
}

/// Same as [`write_curves`] without the timing column, so identical runs
/// produce identical bytes.
pub fn write_metrics(w: &mut impl Write, history: &[EpochMetrics]) -> std::io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for m in history {
        writeln!(
            w,
            "{},{},{},{},{}",
            m.epoch,
            fmt_value(m.train_loss),
            fmt_value(m.train_acc),
            fmt_value(m.valid_loss),
            fmt_value(m.valid_acc)
        )?;
    }
    Ok(())
}

fn emit(path: &Path, history: &[EpochMetrics], f: fn(&mut BufWriter<File>, &[EpochMetrics]) -> std::io::Result<()>) -> Result<()> {
    if history.is_empty() {
        return Err(Error::EmptyInput("emit_curves"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w, history)?;
    w.flush()?;
    Ok(())
}

pub fn emit_curves(history: &[EpochMetrics], path: impl AsRef<Path>) -> Result<()> {
    emit(path.as_ref(), history, write_curves)
}

pub fn emit_metrics(history: &[EpochMetrics], path: impl AsRef<Path>) -> Result<()> {
    emit(path.as_ref(), history, write_metrics)
}

/// Reads back the output of [`write_curves`].
pub fn parse_curves(text: &str) -> Result<Vec<EpochMetrics>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVES_HEADER) {
        return Err(Error::Format("missing curves header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Format(format!("expected 6 fields in '{line}'")));
            }
            Ok(EpochMetrics {
                epoch: f[0].parse().map_err(|_| Error::Format(format!("bad epoch '{}'", f[0])))?,
                train_loss: parse_value(f[1])?,
                train_acc: parse_value(f[2])?,
                valid_loss: parse_value(f[3])?,
                valid_acc: parse_value(f[4])?,
                epoch_seconds: parse_value(f[5])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverfitReport {
    /// 1-based epoch with the lowest validation loss (first on ties).
    pub min_valid_loss_epoch: usize,
    pub min_valid_loss: f64,
    /// `valid_loss - train_loss` at the last epoch.
    pub final_generalization_gap: f64,
    /// Final validation loss divided by the minimum.
    pub valid_loss_rebound: f64,
}

pub fn overfit_report(history: &[EpochMetrics]) -> Result<OverfitReport> {
    if history.len() < 2 {
        return Err(Error::param("an overfitting report needs at least two epochs"));
    }
    let (idx, min) = history
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, m)| {
            if m.valid_loss < bv {
                (i, m.valid_loss)
            } else {
                (bi, bv)
            }
        });
    let last = history[history.len() - 1];
    Ok(OverfitReport {
        min_valid_loss_epoch: history[idx].epoch,
        min_valid_loss: min,
        final_generalization_gap: last.valid_loss - last.train_loss,
        valid_loss_rebound: last.valid_loss / min,
    })
}
