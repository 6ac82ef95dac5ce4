//! Per-task CSV files: a header row of feature names followed by a final
//! `target` column. Empty feature cells and `NA` (any case) are missing.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::{DatasetBundle, Provenance, Split};
use crate::error::{Error, Result};
use crate::estimators::MaskedTaskData;
use crate::taskgraph::TaskGraph;

pub const TARGET_COLUMN: &str = "target";

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na")
}

/// Reads one task file, returning its header (feature names) and data.
pub fn read_task_csv(path: &Path) -> Result<(Vec<String>, MaskedTaskData)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let schema = |reason: String| Error::Schema {
        path: path.to_path_buf(),
        reason,
    };
    let invalid = |reason: String| Error::InvalidData {
        path: path.to_path_buf(),
        reason,
    };
    if header.len() < 2 {
        return Err(schema("need at least one feature column and a target column".into()));
    }
    if header.last().map(String::as_str) != Some(TARGET_COLUMN) {
        return Err(schema(format!("last column must be named `{TARGET_COLUMN}`")));
    }
    let p = header.len() - 1;

    let mut values = Vec::new();
    let mut observed = Vec::new();
    let mut response = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        if record.len() != header.len() {
            return Err(schema(format!(
                "line {line} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        for cell in record.iter().take(p) {
            if is_missing(cell) {
                values.push(f64::NAN);
                observed.push(false);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| invalid(format!("line {line}: cannot parse `{cell}` as a number")))?;
                if !v.is_finite() {
                    return Err(invalid(format!("line {line}: non-finite value `{cell}`")));
                }
                values.push(v);
                observed.push(true);
            }
        }
        let target = &record[p];
        if is_missing(target) {
            return Err(invalid(format!("line {line}: target value is missing")));
        }
        let y: f64 = target
            .parse()
            .map_err(|_| invalid(format!("line {line}: cannot parse target `{target}`")))?;
        if !y.is_finite() {
            return Err(invalid(format!("line {line}: non-finite target `{target}`")));
        }
        response.push(y);
    }
    let n = response.len();
    if n == 0 {
        return Err(invalid("file has no data rows".into()));
    }
    let data = MaskedTaskData::new(
        DMatrix::from_row_slice(n, p, &values),
        DMatrix::from_row_slice(n, p, &observed),
        DVector::from_vec(response),
    )?;
    Ok((header[..p].to_vec(), data))
}

/// Loads one task per file. All files must share the same header. The graph
/// defaults to a chain over the files in the given order; replace it with
/// [`DatasetBundle::with_graph`].
pub fn load_task_csv<P: AsRef<Path>>(paths: &[P]) -> Result<DatasetBundle> {
    if paths.is_empty() {
        return Err(Error::invalid("no task files given"));
    }
    let mut header: Option<Vec<String>> = None;
    let mut tasks = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let (h, data) = read_task_csv(path)?;
        match &header {
            None => header = Some(h),
            Some(first) if *first != h => {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    reason: "header differs from the first task file".into(),
                })
            }
            Some(_) => {}
        }
        tasks.push(data);
    }
    let graph = TaskGraph::chain(tasks.len())?;
    DatasetBundle::new(tasks, graph, Split::Full, Provenance::Csv)
}

/// Writes `<prefix>_task<i>.csv` (1-based) for every task in `dir` with
/// features named `f0..f{p-1}`. Missing cells are left empty.
pub fn write_task_csv(bundle: &DatasetBundle, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = bundle.n_features();
    let mut header: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
    header.push(TARGET_COLUMN.to_owned());
    let mut paths = Vec::with_capacity(bundle.task_count());
    for (i, task) in bundle.tasks.iter().enumerate() {
        let path = dir.join(format!("{prefix}_task{}.csv", i + 1));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&header)?;
        for r in 0..task.n_samples() {
            let mut row: Vec<String> = (0..p)
                .map(|c| {
                    if task.is_observed(r, c) {
                        format!("{}", task.values()[(r, c)])
                    } else {
                        String::new()
                    }
                })
                .collect();
            row.push(format!("{}", task.response()[r]));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
