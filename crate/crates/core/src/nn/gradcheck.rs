//! Central finite-difference gradient checking.

use super::layers::Parameters;
use crate::tensor::Matrix;

pub const FD_STEP: f64 = 1e-6;

/// Denominator floor for [`relative_error`], so exact zeros compare by
/// absolute difference.
pub const REL_FLOOR: f64 = 1e-3;

/// Central differences of `f` with respect to every entry of `at`.
pub fn numeric_grad(at: &Matrix, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut probe = at.clone();
    let mut grad = Matrix::zeros(at.rows(), at.cols());
    for i in 0..at.as_slice().len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + FD_STEP;
        let plus = f(&probe);
        probe.as_mut_slice()[i] = orig - FD_STEP;
        let minus = f(&probe);
        probe.as_mut_slice()[i] = orig;
        grad.as_mut_slice()[i] = (plus - minus) / (2.0 * FD_STEP);
    }
    grad
}

/// Central differences of `loss` with respect to every parameter of `net`,
/// in [`Parameters::params_mut`] order. Every parameter is restored exactly.
pub fn numeric_param_grads<N: Parameters>(
    net: &mut N,
    mut loss: impl FnMut(&mut N) -> f64,
) -> Vec<Matrix> {
    let shapes: Vec<(usize, usize)> = net.param_values().iter().map(|m| m.shape()).collect();
    let mut grads = Vec::with_capacity(shapes.len());
    for (p, &(rows, cols)) in shapes.iter().enumerate() {
        let mut grad = Matrix::zeros(rows, cols);
        for i in 0..rows * cols {
            let orig = net.params_mut()[p].value.as_slice()[i];
            net.params_mut()[p].value.as_mut_slice()[i] = orig + FD_STEP;
            let plus = loss(net);
            net.params_mut()[p].value.as_mut_slice()[i] = orig - FD_STEP;
            let minus = loss(net);
            net.params_mut()[p].value.as_mut_slice()[i] = orig;
            grad.as_mut_slice()[i] = (plus - minus) / (2.0 * FD_STEP);
        }
        grads.push(grad);
    }
    grads
}

/// Current accumulated gradients of `net`, in [`Parameters::params_mut`]
/// order.
pub fn analytic_param_grads<N: Parameters>(net: &mut N) -> Vec<Matrix> {
    net.params_mut().iter().map(|p| p.grad.clone()).collect()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Largest elementwise [`relative_error`] between two equally shaped
/// matrices.
pub fn max_relative_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

pub fn assert_grad_close(analytic: &Matrix, numeric: &Matrix, tol: f64) {
    let err = max_relative_error(analytic, numeric);
    assert!(
        err < tol,
        "gradient mismatch: max relative error {err:e} >= {tol:e}\nanalytic {analytic:?}\nnumeric {numeric:?}"
    );
}
