use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fraction of exact matches.
pub fn accuracy<T: Real, L: PartialEq>(predicted: &[L], truth: &[L]) -> Result<T> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(T::from_count(hits) / T::from_count(truth.len()))
}

/// Predicted probability of the observed (1-based) class.
pub fn true_class_probability<T: Real>(probabilities: &[T], label: u32) -> T {
    probabilities[label as usize - 1]
}
