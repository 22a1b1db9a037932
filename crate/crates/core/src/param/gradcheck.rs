use super::ParamTensor;

/// Denominator floor for [`relative_error`]. Gradients smaller than this are
/// compared in absolute terms.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / scale
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h` for every coordinate.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Compares the gradients held in `params[..].grad` with central finite
/// differences of `loss` and returns the largest relative error.
///
/// `loss` must be deterministic: any sampled noise or batch content has to be
/// pinned by the caller.
pub fn finite_diff_check(
    mut loss: impl FnMut(&[ParamTensor]) -> f64,
    params: &[ParamTensor],
    h: f64,
) -> f64 {
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for t in 0..params.len() {
        for k in 0..params[t].len() {
            let x = params[t].values[k];
            probe[t].values[k] = x + h;
            let up = loss(&probe);
            probe[t].values[k] = x - h;
            let down = loss(&probe);
            probe[t].values[k] = x;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(params[t].grad[k], numeric));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let mut p = ParamTensor::from_values("q", &[4], vec![0.3, -1.2, 2.0, 0.01]).unwrap();
        p.grad = p.values.iter().map(|v| 2.0 * v).collect();
        let err = finite_diff_check(
            |ps| ps[0].values.iter().map(|v| v * v).sum(),
            std::slice::from_ref(&p),
            1e-5,
        );
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut p = ParamTensor::from_values("q", &[1], vec![1.0]).unwrap();
        p.grad[0] = 3.0;
        let err = finite_diff_check(|ps| ps[0].values[0].powi(2), std::slice::from_ref(&p), 1e-5);
        assert!(err > 0.3);
    }

    #[test]
    fn numeric_gradient_of_cubic() {
        let g = numeric_gradient(|x| x[0].powi(3) + x[1], &[2.0, 5.0], 1e-5);
        assert!((g[0] - 12.0).abs() < 1e-8);
        assert!((g[1] - 1.0).abs() < 1e-8);
    }
}
