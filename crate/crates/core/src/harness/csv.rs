//! CSV output. Floats are written with Rust's shortest round-trip formatting,
//! so parsing a column gives back the exact values; absent values are empty.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::{IterationRecord, RunMetrics};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "trial,iter,loss,grad_norm_sq,nonstragglers,qa,residual";
const SUMMARY_HEADER: &str = "iter,loss_mean,loss_std,grad_norm_sq_mean,grad_norm_sq_std";

/// `<path>.summary`
pub fn summary_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".summary");
    PathBuf::from(s)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write per-row metrics to `path` and per-iteration mean/std to
/// `<path>.summary`. A `bound` column is added when the run carries theory.
pub fn emit_csv(metrics: &RunMetrics, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let with_bound = metrics.trials.iter().any(|t| t.theory.is_some());
    let mut out = String::from(CSV_HEADER);
    if with_bound {
        out.push_str(",bound");
    }
    out.push('\n');
    for r in metrics.records() {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            r.trial,
            r.iter,
            r.loss,
            r.grad_norm_sq,
            opt(r.responders),
            opt(r.qa),
            opt(r.residual)
        );
        if with_bound {
            let _ = write!(out, ",{}", opt(r.bound));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))?;

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for s in metrics.summary() {
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            s.iter, s.loss_mean, s.loss_std, s.grad_norm_sq_mean, s.grad_norm_sq_std
        );
    }
    let spath = summary_path(path);
    std::fs::write(&spath, summary).map_err(|e| Error::io(spath, e))
}

/// Parse a file written by [`emit_csv`]. Columns not in the CSV
/// (`encoding_residual`, `error_sum_norm_sq`) come back as `None`.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<IterationRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let with_bound = match header {
        h if h == CSV_HEADER => false,
        h if h.strip_suffix(",bound") == Some(CSV_HEADER) => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unexpected header {other:?}"),
            })
        }
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        let want = if with_bound { 8 } else { 7 };
        if fields.len() != want {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {want} fields, got {}", fields.len()),
            });
        }
        let bad = |f: &str| Error::Parse {
            line: lineno,
            msg: format!("bad field {f:?}"),
        };
        let int = |f: &str| f.parse::<usize>().map_err(|_| bad(f));
        let float = |f: &str| f.parse::<f64>().map_err(|_| bad(f));
        let opt_float = |f: &str| if f.is_empty() { Ok(None) } else { float(f).map(Some) };
        out.push(IterationRecord {
            trial: int(fields[0])?,
            iter: int(fields[1])?,
            loss: float(fields[2])?,
            grad_norm_sq: float(fields[3])?,
            responders: if fields[4].is_empty() { None } else { Some(int(fields[4])?) },
            qa: opt_float(fields[5])?,
            residual: opt_float(fields[6])?,
            encoding_residual: None,
            error_sum_norm_sq: None,
            bound: if with_bound { opt_float(fields[7])? } else { None },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::TrialMetrics;

    fn rec(trial: usize, iter: usize, loss: f64) -> IterationRecord {
        IterationRecord {
            trial,
            iter,
            loss,
            grad_norm_sq: loss * 3.0,
            responders: Some(4),
            qa: Some(0.1),
            residual: None,
            encoding_residual: None,
            error_sum_norm_sq: None,
            bound: None,
        }
    }

    #[test]
    fn one_trial_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let m = RunMetrics {
            label: "x".into(),
            trials: vec![TrialMetrics {
                trial: 0,
                records: vec![rec(0, 0, 1.0 / 3.0), rec(0, 1, 0.1 + 0.2)],
                theory: None,
            }],
        };
        emit_csv(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_csv(&path).unwrap(), m.trials[0].records);
        let summary = std::fs::read_to_string(summary_path(&path)).unwrap();
        assert_eq!(summary.lines().count(), 3);
    }

    #[test]
    fn empty_metrics_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        emit_csv(&RunMetrics::default(), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CSV_HEADER}\n"));
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn unwritable_path_reports_path() {
        let err = emit_csv(&RunMetrics::default(), "/nonexistent-dir/x.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
