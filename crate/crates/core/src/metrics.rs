//! Alignment and summary statistics.

use crate::scalar::Scalar;
use crate::tensor::Vector;

/// `a·b / (‖a‖‖b‖)`, or `None` when either vector is zero.
pub fn cosine_alignment<S: Scalar>(a: &Vector<S>, b: &Vector<S>) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let na = a.norm().to_f64_lossy();
    let nb = b.norm().to_f64_lossy();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return None;
    }
    let c = a.dot(b).ok()?.to_f64_lossy() / (na * nb);
    Some(c.clamp(-1.0, 1.0))
}

/// Mean and standard error of the mean (sample standard deviation over
/// `√n`; zero for a single value).
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Index of the largest entry.
pub fn argmax<S: Scalar>(v: &Vector<S>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_cases() {
        let v = Vector::from_f64(&[0.3, -2.0, 1.0]);
        assert!((cosine_alignment(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_alignment(&v, &v.scaled(-1.0)).unwrap() + 1.0).abs() < 1e-15);
        let c = cosine_alignment(&Vector::<f64>::from_f64(&[1.0, 0.0]), &Vector::from_f64(&[1.0, 1.0])).unwrap();
        assert!((c - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            cosine_alignment(&Vector::<f64>::zeros(2), &Vector::from_f64(&[1.0, 1.0])),
            None
        );
    }

    #[test]
    fn sem_by_hand() {
        // mean 2.5, sample variance 5/3, sem = sqrt(5/12)
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_sem(&[7.0]), (7.0, 0.0));
    }
}
