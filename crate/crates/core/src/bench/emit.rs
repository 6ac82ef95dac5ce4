//! Result files: raw rows, per-(method, level) aggregates, tuning choices,
//! timings and run metadata. Every file name carries the config hash.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Criterion, ExperimentConfig, Method, TuningMode};
use super::sweep::{ResultRow, SweepOutcome, TuningChoice};
use crate::error::{Error, Result};

/// Mean, standard error and count of one metric over the present values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub count: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let count = v.len();
        if count == 0 {
            return Self {
                mean: None,
                std_error: None,
                count,
            };
        }
        let mean = v.iter().sum::<f64>() / count as f64;
        let std_error = if count < 2 {
            0.0
        } else {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        };
        Self {
            mean: Some(mean),
            std_error: Some(std_error),
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub method: Method,
    pub missing_fraction: f64,
    pub replications: usize,
    pub nmse_w: Summary,
    pub nmse_gamma: Summary,
    pub prediction_nmse: Summary,
    pub rmse: Summary,
}

/// Groups rows by (method, level) in row order. Rows should already be
/// sorted, as [`super::run_sweep`] returns them.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut out: Vec<AggregateRow> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let (m, l) = (rows[start].method, rows[start].missing_fraction);
        let end = start + rows[start..]
            .iter()
            .take_while(|r| r.method == m && r.missing_fraction == l)
            .count();
        let group = &rows[start..end];
        out.push(AggregateRow {
            method: m,
            missing_fraction: l,
            replications: group.len(),
            nmse_w: Summary::of(group.iter().map(|r| r.nmse_w)),
            nmse_gamma: Summary::of(group.iter().map(|r| r.nmse_gamma)),
            prediction_nmse: Summary::of(group.iter().map(|r| r.prediction_nmse)),
            rmse: Summary::of(group.iter().map(|r| r.rmse)),
        });
        start = end;
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::invalid(format!("{}: {other:?}", path.display())),
    }
}

/// Raw rows as CSV. Runtimes are left out so that identical configs give
/// identical bytes; see [`write_timings_csv`].
pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "missing_fraction",
        "replication",
        "nmse_w",
        "nmse_gamma",
        "prediction_nmse",
        "rmse",
        "mu",
        "lambda",
        "delta",
        "rank",
        "converged",
        "error",
    ])?;
    for r in rows {
        w.write_record([
            r.method.tag().to_string(),
            r.missing_fraction.to_string(),
            r.replication.to_string(),
            opt(r.nmse_w),
            opt(r.nmse_gamma),
            opt(r.prediction_nmse),
            opt(r.rmse),
            r.hyper.mu.to_string(),
            r.hyper.lambda.to_string(),
            r.hyper.delta.to_string(),
            r.hyper.rank.map(|k| k.to_string()).unwrap_or_default(),
            r.converged.map(|c| c.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["method".to_string(), "missing_fraction".into(), "replications".into()];
    for m in ["nmse_w", "nmse_gamma", "prediction_nmse", "rmse"] {
        for s in ["mean", "se", "count"] {
            header.push(format!("{m}_{s}"));
        }
    }
    w.write_record(&header)?;
    for a in rows {
        let mut rec = vec![a.method.tag().to_string(), a.missing_fraction.to_string(), a.replications.to_string()];
        for s in [a.nmse_w, a.nmse_gamma, a.prediction_nmse, a.rmse] {
            rec.push(opt(s.mean));
            rec.push(opt(s.std_error));
            rec.push(s.count.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tuning_csv<W: Write>(choices: &[TuningChoice], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "missing_fraction",
        "mu",
        "lambda",
        "delta",
        "rank",
        "score",
        "grid_size",
        "degenerate_points",
    ])?;
    for c in choices {
        w.write_record([
            c.method.tag().to_string(),
            c.level.map(|l| l.to_string()).unwrap_or_else(|| "all".into()),
            c.candidate.mu.to_string(),
            c.candidate.lambda.to_string(),
            c.candidate.delta.to_string(),
            c.candidate.rank.map(|k| k.to_string()).unwrap_or_default(),
            c.score.to_string(),
            c.grid_size.to_string(),
            c.degenerate_points.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "missing_fraction", "replication", "runtime_ms"])?;
    for r in rows {
        w.write_record([
            r.method.tag().to_string(),
            r.missing_fraction.to_string(),
            r.replication.to_string(),
            format!("{:.3}", r.runtime_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Metadata<'a> {
    config_hash: String,
    tuning: TuningMode,
    criterion: Criterion,
    rows: usize,
    choices: &'a [TuningChoice],
    config: &'a ExperimentConfig,
}

/// Paths written by [`emit_results`].
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub results: PathBuf,
    pub aggregate: PathBuf,
    pub tuning: PathBuf,
    pub timings: PathBuf,
    pub metadata: PathBuf,
}

/// Writes every result file of a sweep into `dir`, creating it if needed.
pub fn emit_results(outcome: &SweepOutcome, config: &ExperimentConfig, dir: &Path) -> Result<EmittedFiles> {
    if outcome.rows.is_empty() {
        return Err(Error::invalid("no result rows to write"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hash = config.hash();
    let stem = if config.name.is_empty() { "sweep" } else { config.name.as_str() };
    let file = |kind: &str, ext: &str| dir.join(format!("{stem}-{hash}-{kind}.{ext}"));
    let files = EmittedFiles {
        results: file("results", "csv"),
        aggregate: file("aggregate", "csv"),
        tuning: file("tuning", "csv"),
        timings: file("timings", "csv"),
        metadata: file("metadata", "json"),
    };
    let create = |p: &Path| fs::File::create(p).map_err(|e| Error::io(p, e));

    write_rows_csv(&outcome.rows, create(&files.results)?).map_err(csv_err(&files.results))?;
    write_aggregate_csv(&aggregate(&outcome.rows), create(&files.aggregate)?).map_err(csv_err(&files.aggregate))?;
    write_tuning_csv(&outcome.choices, create(&files.tuning)?).map_err(csv_err(&files.tuning))?;
    write_timings_csv(&outcome.rows, create(&files.timings)?).map_err(csv_err(&files.timings))?;

    let meta = Metadata {
        config_hash: hash,
        tuning: outcome.tuning,
        criterion: outcome.criterion,
        rows: outcome.rows.len(),
        choices: &outcome.choices,
        config,
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(&files.metadata, text).map_err(|e| Error::io(&files.metadata, e))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::sweep::Candidate;

    fn row(method: Method, level: f64, rep: usize, nmse: Option<f64>) -> ResultRow {
        ResultRow {
            method,
            missing_fraction: level,
            replication: rep,
            nmse_w: nmse,
            nmse_gamma: nmse,
            prediction_nmse: nmse,
            rmse: nmse,
            hyper: Candidate {
                mu: 0.1,
                lambda: 0.01,
                delta: 0.0,
                rank: None,
            },
            runtime_ms: 1.5,
            converged: nmse.map(|_| true),
            error: nmse.is_none().then(|| "degenerate".into()),
        }
    }

    #[test]
    fn four_rows_give_four_aggregates_with_zero_se() {
        let rows = vec![
            row(Method::MeanImpute, 0.1, 0, Some(0.5)),
            row(Method::MeanImpute, 0.2, 0, Some(0.6)),
            row(Method::Rlgr, 0.1, 0, Some(0.3)),
            row(Method::Rlgr, 0.2, 0, Some(0.4)),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 4);
        assert!(agg.iter().all(|a| a.nmse_w.std_error == Some(0.0)));
        let mut buf = Vec::new();
        write_aggregate_csv(&agg, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    #[test]
    fn absent_metrics_are_skipped_and_counted() {
        let rows = vec![
            row(Method::Rlgr, 0.1, 0, Some(1.0)),
            row(Method::Rlgr, 0.1, 1, None),
            row(Method::Rlgr, 0.1, 2, Some(3.0)),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 1);
        let s = agg[0].nmse_w;
        assert_eq!((s.mean, s.count), (Some(2.0), 2));
        assert_eq!(agg[0].replications, 3);
        // sample sd sqrt(2), divided by sqrt(2)
        assert!((s.std_error.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn raw_csv_marks_absent_values_empty() {
        let mut buf = Vec::new();
        write_rows_csv(&[row(Method::Rlgr1, 0.3, 4, None)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line, "rlgr1,0.3,4,,,,,0.1,0.01,0,,,degenerate");
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let outcome = SweepOutcome {
            rows: vec![row(Method::Rlgr, 0.1, 0, Some(0.2))],
            choices: vec![],
            tuning: TuningMode::PerLevel,
            criterion: Criterion::ModelNmse,
        };
        let cfg = ExperimentConfig::synthetic_default();
        let err = emit_results(&outcome, &cfg, &blocker.join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn file_names_embed_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = SweepOutcome {
            rows: vec![row(Method::Rlgr, 0.1, 0, Some(0.2))],
            choices: vec![],
            tuning: TuningMode::PerLevel,
            criterion: Criterion::ModelNmse,
        };
        let cfg = ExperimentConfig::synthetic_default();
        let files = emit_results(&outcome, &cfg, dir.path()).unwrap();
        let name = files.results.file_name().unwrap().to_string_lossy().into_owned();
        assert!(name.contains(&cfg.hash()));
        assert!(files.metadata.exists() && files.timings.exists());
    }
}
