//! File formats. Every writer is deterministic: same data, same bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::scenario::{BeliefRow, RunMetrics, TimeseriesRow};
use crate::detection::{ResidualRecord, Roc};
use crate::Result;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// A run's summary tagged with the scenario and technique it belongs to.
#[derive(Debug, Clone)]
pub struct LabelledMetrics<'a> {
    pub scenario: &'a str,
    pub technique: &'a str,
    pub metrics: &'a RunMetrics,
}

/// `metrics.csv`: one row per run.
pub fn write_metrics(path: &Path, rows: &[LabelledMetrics]) -> Result<()> {
    let dims = rows.iter().map(|r| r.metrics.mse_belief.len()).max().unwrap_or(1);
    let mut w = writer(path)?;
    let mut header = vec!["scenario".to_string(), "technique".into(), "run".into(), "rmse_tracking".into()];
    if dims == 1 {
        header.push("mse_belief".into());
    } else {
        header.extend((0..dims).map(|i| format!("mse_belief_{i}")));
    }
    header.extend(["diverged".to_string(), "steps".into()]);
    w.write_record(&header)?;
    for r in rows {
        let m = r.metrics;
        let mut rec = vec![
            r.scenario.to_string(),
            r.technique.to_string(),
            m.run.to_string(),
            m.rmse_tracking.to_string(),
        ];
        rec.extend((0..dims).map(|i| m.mse_belief.get(i).map_or(String::new(), f64::to_string)));
        rec.push(u8::from(m.diverged).to_string());
        rec.push(m.steps.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `timeseries.csv`: `t,x_true,x_est,reference,u,fault_active`.
pub fn write_timeseries(path: &Path, rows: &[TimeseriesRow]) -> Result<()> {
    write_rows(path, rows)
}

/// `residuals.csv`: `t,sensor_id,ser,ef_r,ef_R,beta,fault_truth`.
pub fn write_residuals(path: &Path, rows: &[ResidualRecord]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_residuals(path: &Path) -> Result<Vec<ResidualRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// `beliefs.csv`: `t,sensor_id,alpha,beta,weight`.
pub fn write_beliefs(path: &Path, rows: &[BeliefRow]) -> Result<()> {
    write_rows(path, rows)
}

/// `roc.csv`: `fpr,tpr,threshold`.
pub fn write_roc(path: &Path, roc: &Roc) -> Result<()> {
    write_rows(path, &roc.points)
}

/// Per-step ensemble mean absolute error: `t,mae`.
pub fn write_mae_series(path: &Path, series: &[f64], dt: f64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "mae"])?;
    for (k, v) in series.iter().enumerate() {
        w.write_record([(k as f64 * dt).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
