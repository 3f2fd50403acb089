use crate::error::{Error, Result};

/// Root mean squared error over the pairs where `available` is true.
///
/// Pass `None` to use every pair.
pub fn rmse(pred: &[f64], actual: &[f64], available: Option<&[bool]>) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::InvalidInput(format!(
            "prediction length {} differs from actual length {}",
            pred.len(),
            actual.len()
        )));
    }
    if let Some(mask) = available {
        if mask.len() != pred.len() {
            return Err(Error::InvalidInput(
                "availability mask length mismatch".into(),
            ));
        }
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..pred.len() {
        if available.is_some_and(|m| !m[i]) {
            continue;
        }
        let d = pred[i] - actual[i];
        sum += d * d;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InsufficientData {
            what: "rmse".into(),
            needed: 1,
            got: 0,
        });
    }
    Ok((sum / count as f64).sqrt())
}
