//! Result files of a simulated experiment.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::run::{Experiment, SummaryRow};
use crate::acquisition::Strategy;
use crate::Result;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.csv";

/// Write `records.jsonl` (one object per cycle per run), `summary.csv`
/// (per-strategy, per-cycle mean ± std) and `plot.csv` (labeled count vs
/// mean F1, one column per strategy). Returns the written paths.
pub fn write_results(dir: &Path, experiment: &Experiment, strategies: &[Strategy]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let records = dir.join(RECORDS_FILE);
    let mut out = BufWriter::new(File::create(&records)?);
    for run in &experiment.runs {
        for row in &run.cycles {
            serde_json::to_writer(&mut out, row)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;

    let summary = dir.join(SUMMARY_FILE);
    write_summary(&summary, &experiment.summary)?;
    let plot = dir.join(PLOT_FILE);
    write_plot(&plot, &experiment.summary, strategies)?;
    Ok(vec![records, summary, plot])
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let k = rows.iter().map(|r| r.mean_per_class_f1.len()).max().unwrap_or(0);
    let mut header: Vec<String> =
        ["strategy", "cycle", "labeled_count", "repetitions", "mean_f1", "std_f1", "alpha"].map(String::from).to_vec();
    header.extend((0..k).map(|c| format!("mean_f1_class_{c}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.strategy.to_string(),
            r.cycle.to_string(),
            r.labeled_count.to_string(),
            r.repetitions.to_string(),
            r.mean_f1.to_string(),
            r.std_f1.to_string(),
            r.alpha.map(|a| a.to_string()).unwrap_or_default(),
        ];
        rec.extend((0..k).map(|c| r.mean_per_class_f1.get(c).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_plot(path: &Path, rows: &[SummaryRow], strategies: &[Strategy]) -> Result<()> {
    let mut counts: Vec<usize> = rows.iter().map(|r| r.labeled_count).collect();
    counts.sort_unstable();
    counts.dedup();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["labeled_count".to_string()];
    header.extend(strategies.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for n in counts {
        let mut rec = vec![n.to_string()];
        for s in strategies {
            let v = rows.iter().find(|r| r.strategy == *s && r.labeled_count == n);
            rec.push(v.map(|r| r.mean_f1.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
