use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetBundle, Split};
use crate::error::{Error, Result};
use crate::estimators::MaskedTaskData;

/// Observed-entry l2 norm of every feature column, per task.
pub fn column_norms(bundle: &DatasetBundle) -> Result<Vec<DVector<f64>>> {
    bundle
        .tasks
        .iter()
        .map(|t| {
            let norms = DVector::from_fn(t.n_features(), |c, _| {
                (0..t.n_samples())
                    .filter(|&r| t.is_observed(r, c))
                    .map(|r| t.values()[(r, c)].powi(2))
                    .sum::<f64>()
                    .sqrt()
            });
            match norms.iter().position(|v| !(*v > 0.0)) {
                Some(column) => Err(Error::DegenerateColumn {
                    column,
                    reason: "observed entries have zero l2 norm".into(),
                }),
                None => Ok(norms),
            }
        })
        .collect()
}

/// Divides each task's feature columns by the given per-task scales.
/// Masked entries are left as they are.
pub fn apply_column_scales(bundle: &DatasetBundle, scales: &[DVector<f64>]) -> Result<DatasetBundle> {
    if scales.len() != bundle.task_count() {
        return Err(Error::invalid("one scale vector per task is required"));
    }
    let tasks = bundle
        .tasks
        .iter()
        .zip(scales)
        .map(|(t, s)| {
            if s.len() != t.n_features() {
                return Err(Error::invalid("scale vector length does not match feature count"));
            }
            let values = DMatrix::from_fn(t.n_samples(), t.n_features(), |r, c| {
                let v = t.values()[(r, c)];
                if t.is_observed(r, c) {
                    v / s[c]
                } else {
                    v
                }
            });
            MaskedTaskData::new(values, t.mask().clone(), t.response().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    DatasetBundle::new(tasks, bundle.graph.clone(), bundle.split, bundle.provenance)
}

/// Scales every feature column (per task, observed entries only) to unit
/// l2 norm.
pub fn l2_normalize(bundle: &DatasetBundle) -> Result<DatasetBundle> {
    apply_column_scales(bundle, &column_norms(bundle)?)
}

/// Splits the rows of every task independently: `floor(train_fraction * n)`
/// rows go to the training side, the rest to the test side.
pub fn train_test_split(
    bundle: &DatasetBundle,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetBundle, DatasetBundle)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train_fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(bundle.task_count());
    let mut test = Vec::with_capacity(bundle.task_count());
    for (i, t) in bundle.tasks.iter().enumerate() {
        let n = t.n_samples();
        let n_train = (train_fraction * n as f64).floor() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::invalid(format!(
                "task {i}: splitting {n} rows at {train_fraction} leaves an empty side"
            )));
        }
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let (a, b) = rows.split_at(n_train);
        let (mut a, mut b) = (a.to_vec(), b.to_vec());
        a.sort_unstable();
        b.sort_unstable();
        train.push(select(t, &a)?);
        test.push(select(t, &b)?);
    }
    Ok((
        DatasetBundle::new(train, bundle.graph.clone(), Split::Train, bundle.provenance)?,
        DatasetBundle::new(test, bundle.graph.clone(), Split::Test, bundle.provenance)?,
    ))
}

fn select(t: &MaskedTaskData, rows: &[usize]) -> Result<MaskedTaskData> {
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| t.response()[r]));
    MaskedTaskData::new(t.values().select_rows(rows), t.mask().select_rows(rows), y)
}
