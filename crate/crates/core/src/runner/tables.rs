//! Repeated-run statistics tables: descriptive summary per run and Welch
//! comparisons against a baseline run.

use std::io::Write;
use std::path::Path;

use super::{Result, RunError};
use crate::eval::{descriptive_stats, welch_t_test};

/// Read a `run_id,score` CSV into runs in first-appearance order.
pub fn read_run_scores(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f64>)>> {
    let p = path.as_ref();
    let bad = |reason: String| RunError::Malformed { path: p.display().to_string(), reason };
    let mut rdr = csv::Reader::from_path(p).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(ri), Some(si)) = (col("run_id"), col("score")) else {
        return Err(bad("expected run_id and score columns".into()));
    };
    let mut runs: Vec<(String, Vec<f64>)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let run = rec.get(ri).unwrap_or("").trim().to_string();
        let score: f64 = rec
            .get(si)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| bad(format!("row {}: score is not a number", line + 2)))?;
        match runs.iter_mut().find(|(r, _)| *r == run) {
            Some((_, v)) => v.push(score),
            None => runs.push((run, vec![score])),
        }
    }
    Ok(runs)
}

pub fn write_descriptive_csv<W: Write>(w: W, runs: &[(String, Vec<f64>)], alpha: f64) -> Result<()> {
    let mut w = w;
    let pct = (1.0 - alpha) * 100.0;
    writeln!(w, "run_id,n,mean,sd,cv_percent,ci{pct}_low,ci{pct}_high")?;
    for (run, xs) in runs {
        let s = descriptive_stats(xs, alpha)?;
        let cv = s.cv.map_or(String::new(), |c| format!("{c:.5}"));
        writeln!(w, "{run},{},{:.5},{:.5},{cv},{:.5},{:.5}", s.n, s.mean, s.sd, s.ci_low, s.ci_high)?;
    }
    Ok(())
}

pub fn write_welch_csv<W: Write>(w: W, runs: &[(String, Vec<f64>)], baseline: &str, alpha: f64) -> Result<()> {
    let mut w = w;
    let base = runs
        .iter()
        .find(|(r, _)| r == baseline)
        .ok_or_else(|| RunError::Eval(format!("baseline run {baseline:?} not found")))?;
    writeln!(w, "comparison,t_statistic,df,p_value,significant")?;
    for (run, xs) in runs.iter().filter(|(r, _)| r != baseline) {
        let t = welch_t_test(&base.1, xs, alpha)?;
        writeln!(
            w,
            "Run {baseline} vs Run {run},{:.5},{:.5},{:.5},{}",
            t.t,
            t.df,
            t.p,
            if t.significant { "Significant" } else { "Not significant" }
        )?;
    }
    Ok(())
}
