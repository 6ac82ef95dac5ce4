use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solver::ModelMatrix;

/// `|W_hat - W*|_F^2 / |W*|_F^2`.
pub fn nmse_model(estimate: &ModelMatrix, truth: &ModelMatrix) -> Result<f64> {
    let (e, t) = (estimate.coefficients(), truth.coefficients());
    if e.shape() != t.shape() {
        return Err(Error::invalid("model shapes differ"));
    }
    let denom = t.norm_squared();
    if denom == 0.0 {
        return Err(Error::invalid("reference model is zero"));
    }
    Ok((e - t).norm_squared() / denom)
}

/// Mean over tasks of `|G_hat_i - G*_i|_F^2 / |G*_i|_F^2`.
pub fn nmse_cov(estimates: &[DMatrix<f64>], truths: &[DMatrix<f64>]) -> Result<f64> {
    if estimates.len() != truths.len() || truths.is_empty() {
        return Err(Error::invalid("need equally many estimates and references"));
    }
    let mut total = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        if e.shape() != t.shape() {
            return Err(Error::invalid("covariance shapes differ"));
        }
        let denom = t.norm_squared();
        if denom == 0.0 {
            return Err(Error::invalid("reference covariance is zero"));
        }
        total += (e - t).norm_squared() / denom;
    }
    Ok(total / truths.len() as f64)
}

/// `sum_i |y_hat_i - y_i|^2 / |y_i|^2`.
pub fn prediction_nmse(predictions: &[DVector<f64>], actuals: &[DVector<f64>]) -> Result<f64> {
    check_pairs(predictions, actuals)?;
    predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| {
            let denom = a.norm_squared();
            if denom == 0.0 {
                return Err(Error::invalid("reference response is zero"));
            }
            Ok((p - a).norm_squared() / denom)
        })
        .sum()
}

/// Root mean squared error over all predictions of all tasks.
pub fn rmse(predictions: &[DVector<f64>], actuals: &[DVector<f64>]) -> Result<f64> {
    check_pairs(predictions, actuals)?;
    let count: usize = actuals.iter().map(|a| a.len()).sum();
    if count == 0 {
        return Err(Error::invalid("no predictions"));
    }
    let sse: f64 = predictions.iter().zip(actuals).map(|(p, a)| (p - a).norm_squared()).sum();
    Ok((sse / count as f64).sqrt())
}

fn check_pairs(predictions: &[DVector<f64>], actuals: &[DVector<f64>]) -> Result<()> {
    if predictions.len() != actuals.len() || actuals.is_empty() {
        return Err(Error::invalid("need equally many prediction and response vectors"));
    }
    if predictions.iter().zip(actuals).any(|(p, a)| p.len() != a.len()) {
        return Err(Error::invalid("prediction and response lengths differ"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(vals: &[f64]) -> ModelMatrix {
        ModelMatrix::new(DMatrix::from_column_slice(vals.len(), 1, vals)).unwrap()
    }

    #[test]
    fn model_nmse_examples() {
        let t = m(&[1.0, -2.0, 0.0]);
        assert_eq!(nmse_model(&t, &t).unwrap(), 0.0);
        assert_eq!(nmse_model(&m(&[0.0, 0.0, 0.0]), &t).unwrap(), 1.0);
        assert_eq!(nmse_model(&m(&[2.0, -4.0, 0.0]), &t).unwrap(), 1.0);
        assert!(nmse_model(&t, &m(&[0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn cov_nmse_examples() {
        let a = DMatrix::identity(2, 2);
        assert_eq!(nmse_cov(&[a.clone()], &[a.clone()]).unwrap(), 0.0);
        assert_eq!(nmse_cov(&[DMatrix::zeros(2, 2)], &[a.clone()]).unwrap(), 1.0);
        assert_eq!(
            nmse_cov(&[a.clone(), DMatrix::zeros(2, 2)], &[a.clone(), a.clone()]).unwrap(),
            0.5
        );
        assert!(nmse_cov(&[a.clone()], &[DMatrix::zeros(2, 2)]).is_err());
    }

    #[test]
    fn prediction_nmse_examples() {
        let y = DVector::from_vec(vec![1.0, 3.0]);
        assert_eq!(prediction_nmse(&[y.clone()], &[y.clone()]).unwrap(), 0.0);
        assert_eq!(prediction_nmse(&[DVector::zeros(2)], &[y.clone()]).unwrap(), 1.0);
        let yhat = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(prediction_nmse(&[yhat.clone()], &[y.clone()]).unwrap(), 0.4);
        assert!(prediction_nmse(&[yhat], &[DVector::zeros(2)]).is_err());
    }

    #[test]
    fn rmse_pools_tasks() {
        let a = [DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![0.0])];
        let b = [DVector::from_vec(vec![3.0, 0.0]), DVector::from_vec(vec![0.0])];
        assert!((rmse(&a, &b).unwrap() - 3.0f64.sqrt()).abs() < 1e-15);
    }
}
