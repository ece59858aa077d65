use crate::error::{Error, Result};

/// Share of correctly classified instances from a confusion matrix.
pub fn accuracy(tp: u64, tn: u64, fp: u64, fn_: u64) -> Result<f64> {
    let total = tp + tn + fp + fn_;
    if total == 0 {
        return Err(Error::Domain("confusion matrix is empty".into()));
    }
    Ok((tp + tn) as f64 / total as f64)
}

/// Mean squared error between targets and predictions.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::Dimension { left: y.len(), right: y_hat.len() });
    }
    if y.is_empty() {
        return Err(Error::Domain("mse of empty sequences".into()));
    }
    let sum: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / y.len() as f64)
}
