use crate::dataset::GradeRange;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Cohen's kappa with quadratic disagreement weights `(i-j)^2 / (R-1)^2`.
pub fn quadratic_weighted_kappa<T: Real>(predicted: &[i64], truth: &[i64], range: GradeRange) -> Result<T> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.len() < 2 {
        return Err(Error::invalid("quadratic weighted kappa needs at least 2 samples"));
    }
    if let Some(g) = predicted.iter().chain(truth).find(|g| !range.contains(**g)) {
        return Err(Error::invalid(format!("grade {g} outside range {range}")));
    }
    let r = range.levels();
    let n = truth.len();
    let mut observed = vec![0usize; r * r];
    let mut hist_p = vec![0usize; r];
    let mut hist_t = vec![0usize; r];
    for (&p, &t) in predicted.iter().zip(truth) {
        let (i, j) = ((p - range.min) as usize, (t - range.min) as usize);
        observed[i * r + j] += 1;
        hist_p[i] += 1;
        hist_t[j] += 1;
    }
    let denom = T::from_count((r - 1) * (r - 1));
    let nf = T::from_count(n);
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..r {
        for j in 0..r {
            let w = T::from_count((i as isize - j as isize).unsigned_abs().pow(2)) / denom;
            num += w * T::from_count(observed[i * r + j]);
            den += w * T::from_count(hist_p[i]) * T::from_count(hist_t[j]) / nf;
        }
    }
    if den == T::zero() {
        return if predicted == truth {
            Ok(T::one())
        } else {
            Err(Error::Degenerate("zero expected disagreement".into()))
        };
    }
    Ok(T::one() - num / den)
}

/// `1 - |clamp(pred) - truth| / (max - min)`: 1 for an exact grade, 0 at the
/// far end of the range.
pub fn regression_closeness<T: Real>(predicted: T, truth: i64, range: GradeRange) -> Result<T> {
    if range.width() <= 0 {
        return Err(Error::Degenerate(format!("grade range {range}")));
    }
    let lo = T::lit(range.min as f64);
    let hi = T::lit(range.max as f64);
    let p = predicted.max(lo).min(hi);
    let t = T::lit(truth as f64);
    let v = T::one() - (p - t).abs() / (hi - lo);
    Ok(v.max(T::zero()).min(T::one()))
}
