//! CSV rows and the companion plot script.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// One metric reading. `metric` is the squared error of the mean estimate,
/// the mean localization error (sensor) or an agreement indicator (block
/// agreement), depending on the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: String,
    pub seed: u64,
    pub n_samples: usize,
    pub metric: f64,
    pub density_evals: u64,
}

/// Orders rows by method, then seed, then sample count.
pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| (&a.method, a.seed, a.n_samples).cmp(&(&b.method, b.seed, b.n_samples)));
}

pub fn write_csv(rows: &[Row], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(BenchError::from))
        .collect()
}

/// Matplotlib script plotting the per-method median metric against sample count.
pub fn plot_script(csv_name: &str, title: &str) -> String {
    format!(
        r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("{csv_name}")
fig, ax = plt.subplots(figsize=(7, 4.5))
for method, g in df.groupby("method"):
    med = g.groupby("n_samples")["metric"].median()
    ax.plot(med.index, med.values, marker="o", label=method)
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("number of samples")
ax.set_ylabel("median metric over seeds")
ax.set_title("{title}")
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig("{stem}.png", dpi=150)
"#,
        stem = csv_name.trim_end_matches(".csv"),
    )
}

/// Writes the CSV and its plot script into `dir`; returns both paths.
pub fn write_outputs(
    rows: &[Row],
    dir: &Path,
    csv_name: &str,
    title: &str,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let csv_path = dir.join(csv_name);
    write_csv(rows, &csv_path)?;
    let plot_path = dir.join(format!("{}.plot.py", csv_name.trim_end_matches(".csv")));
    std::fs::write(&plot_path, plot_script(csv_name, title))
        .map_err(|e| BenchError::io(&plot_path, e))?;
    Ok((csv_path, plot_path))
}

/// Median of `metric` over rows matching `method` at sample count `n`.
pub fn median_metric(rows: &[Row], method: &str, n: usize) -> Option<f64> {
    let mut v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.n_samples == n)
        .map(|r| r.metric)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    })
}

/// Mean of `metric` over rows matching `method` at sample count `n`.
pub fn mean_metric(rows: &[Row], method: &str, n: usize) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.n_samples == n)
        .map(|r| r.metric)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Last row per (method, seed): the final reading of each series.
pub fn final_rows(rows: &[Row]) -> Vec<&Row> {
    let mut out: Vec<&Row> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some(last) if last.method == r.method && last.seed == r.seed => {
                if r.n_samples >= last.n_samples {
                    *last = r;
                }
            }
            _ => out.push(r),
        }
    }
    out
}
