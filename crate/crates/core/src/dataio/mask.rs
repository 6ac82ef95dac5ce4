use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatasetBundle;
use crate::error::{Error, Result};
use crate::estimators::MaskedTaskData;

/// Hides `floor(fraction * observed)` additional entries of each task, chosen
/// uniformly without replacement among its currently observed entries.
/// Already-missing entries stay missing.
pub fn inject_mcar(bundle: &DatasetBundle, fraction: f64, seed: u64) -> Result<DatasetBundle> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid(format!("fraction {fraction} outside [0, 1)")));
    }
    if fraction == 0.0 {
        return Ok(bundle.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(bundle.task_count());
    for task in &bundle.tasks {
        let n = task.n_samples();
        // Column-major positions of observed entries.
        let observed: Vec<usize> = task
            .mask()
            .iter()
            .enumerate()
            .filter_map(|(idx, &m)| m.then_some(idx))
            .collect();
        let count = (fraction * observed.len() as f64).floor() as usize;
        let mut mask = task.mask().clone();
        for pick in sample(&mut rng, observed.len(), count) {
            let idx = observed[pick];
            mask[(idx % n, idx / n)] = false;
        }
        tasks.push(MaskedTaskData::new(
            task.values().clone(),
            mask,
            task.response().clone(),
        )?);
    }
    DatasetBundle::new(tasks, bundle.graph.clone(), bundle.split, bundle.provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{synth_generate, SynthSpec};
    use crate::taskgraph::TaskGraph;

    fn default_bundle() -> DatasetBundle {
        synth_generate(&SynthSpec::default(), &TaskGraph::chain(5).unwrap(), 1).unwrap().0
    }

    #[test]
    fn zero_fraction_is_identity() {
        let b = default_bundle();
        assert_eq!(inject_mcar(&b, 0.0, 3).unwrap(), b);
    }

    #[test]
    fn exact_count_on_full_task() {
        let b = inject_mcar(&default_bundle(), 0.4, 3).unwrap();
        for t in &b.tasks {
            assert_eq!(t.missing_count(), 2000);
            assert_eq!(t.missing_rate(), 0.4);
        }
    }

    #[test]
    fn stacking_on_existing_missingness() {
        let b = inject_mcar(&default_bundle(), 0.09, 3).unwrap();
        let c = inject_mcar(&b, 0.10, 4).unwrap();
        for (before, after) in b.tasks.iter().zip(&c.tasks) {
            assert_eq!(before.missing_count(), 450);
            // 450 + floor(0.1 * 4550)
            assert_eq!(after.missing_count(), 905);
            assert!((after.missing_rate() - (0.09 + 0.10 * 0.91)).abs() < 1e-12);
            for (m0, m1) in before.mask().iter().zip(after.mask().iter()) {
                assert!(*m0 || !*m1, "an entry was unmasked");
            }
        }
    }

    #[test]
    fn degenerate_column_is_an_error() {
        use nalgebra::{DMatrix, DVector};
        let task = MaskedTaskData::complete(DMatrix::from_element(1, 2, 1.0), DVector::zeros(1)).unwrap();
        let b = DatasetBundle::new(
            vec![task],
            TaskGraph::chain(1).unwrap(),
            crate::dataio::Split::Full,
            crate::dataio::Provenance::Synthetic,
        )
        .unwrap();
        assert!(matches!(
            inject_mcar(&b, 0.5, 0),
            Err(Error::DegenerateColumn { .. })
        ));
    }

    #[test]
    fn rejects_fraction_one() {
        assert!(inject_mcar(&default_bundle(), 1.0, 0).is_err());
    }
}
