use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Worst `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
    pub max_rel_error: f64,
    /// (parameter, flat index) of the worst entry.
    pub worst: (usize, usize),
    pub checked: usize,
}

/// Compares the analytic gradient returned by `f` against central
/// differences `(f(x+h) − f(x−h)) / 2h` for every parameter entry.
///
/// `f` returns the scalar value and its gradients for the given parameters.
pub fn grad_check<F>(f: F, params: &[Tensor], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor]) -> Result<(f64, Vec<Tensor>)>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::Argument(format!("step {h} must be positive")));
    }
    let (value, analytic) = f(params)?;
    if !value.is_finite() {
        return Err(Error::Numeric("objective is not finite".into()));
    }
    let mut work = params.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (0, 0), checked: 0 };
    for p in 0..params.len() {
        for j in 0..params[p].numel() {
            let orig = params[p].data()[j];
            work[p].data_mut()[j] = orig + h;
            let plus = f(&work)?.0;
            work[p].data_mut()[j] = orig - h;
            let minus = f(&work)?.0;
            work[p].data_mut()[j] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric("objective is not finite".into()));
            }
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[p].data()[j];
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (p, j);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(params: &[Tensor]) -> Result<(f64, Vec<Tensor>)> {
        let x = params[0].data();
        let coef = [1.0, 2.0, -3.0, 0.5, 4.0];
        let value = x.iter().zip(coef).map(|(x, c)| c * x * x + x).sum();
        let grad = x.iter().zip(coef).map(|(x, c)| 2.0 * c * x + 1.0).collect();
        Ok((value, vec![Tensor::new(vec![5], grad)?]))
    }

    #[test]
    fn exact_for_quadratics() {
        let params = vec![Tensor::new(vec![5], vec![0.3, -1.2, 2.0, 0.0, 5.5]).unwrap()];
        let r = grad_check(quadratic, &params, 1e-5).unwrap();
        assert!(r.max_rel_error <= 1e-9, "{r:?}");
        assert_eq!(r.checked, 5);
    }

    #[test]
    fn detects_corrupted_gradient() {
        let params = vec![Tensor::new(vec![5], vec![3.0, 3.0, 3.0, 3.0, 3.0]).unwrap()];
        let corrupted = |p: &[Tensor]| {
            let (v, mut g) = quadratic(p)?;
            g[0].data_mut().iter_mut().for_each(|x| *x *= 1.1);
            Ok((v, g))
        };
        let r = grad_check(corrupted, &params, 1e-5).unwrap();
        // |1.1a − a| / (1.1|a|) = 0.1/1.1
        assert!((r.max_rel_error - 0.1 / 1.1).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn rejects_bad_step() {
        let params = vec![Tensor::scalar(1.0)];
        assert!(grad_check(quadratic, &params, 0.0).is_err());
    }
}
