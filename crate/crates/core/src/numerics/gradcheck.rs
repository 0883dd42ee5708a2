use crate::error::{Error, Result};

use super::Tensor;

/// Central-difference gradient `(f(x+εe) − f(x−εe)) / 2ε`, one element at a time.
pub fn finite_difference_gradient<F>(mut f: F, x: &Tensor<f64>, step: f64) -> Result<Tensor<f64>>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Oracle(format!("step must be positive, got {step}")));
    }
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - step;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Oracle(format!(
                "non-finite function value around element {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Tensor::new(x.dims().to_vec(), grad)
}

/// `max|a − b| / max(max|a|, max|b|)`; zero when both tensors are zero.
pub fn relative_error(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> Result<f64> {
    let diff = analytic.max_abs_diff(numeric)?;
    let scale = analytic.max_abs().max(numeric.max_abs());
    if scale == 0.0 {
        return Ok(diff);
    }
    Ok(diff / scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares() {
        let x = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let g =
            finite_difference_gradient(|t| t.data().iter().map(|v| v * v).sum(), &x, 1e-5).unwrap();
        assert!((g.data()[0] - 2.0).abs() < 1e-8);
        assert!((g.data()[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn non_finite_is_oracle_error() {
        let x = Tensor::new(vec![1], vec![0.0]).unwrap();
        let err = finite_difference_gradient(|t| 1.0 / (t.data()[0] - 1e-5), &x, 1e-5);
        assert!(matches!(err, Err(Error::Oracle(_))));
        assert!(finite_difference_gradient(|_| 0.0, &x, 0.0).is_err());
    }
}
