//! Central finite-difference utilities. These evaluate a scalar function at
//! perturbed points only — they never touch the reverse-mode path they are
//! used to check.

/// Central-difference gradient of `f` at `x` with the given step.
pub fn central_diff_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut point = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = point[i];
        point[i] = orig + step;
        let up = f(&point);
        point[i] = orig - step;
        let down = f(&point);
        point[i] = orig;
        grad.push((up - down) / (2.0 * step));
    }
    grad
}

/// Largest relative error between two gradient vectors, with a floor on the
/// denominator so near-zero entries compare absolutely.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_gradient_of_a_quadratic() {
        let mut f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let x = vec![1.0, -2.0, 0.5];
        let g = central_diff_grad(&mut f, &x, 1e-6);
        let expect = [2.0, -4.0, 1.0];
        assert!(max_rel_err(&g, &expect, 1e-9) < 1e-8);
    }
}
