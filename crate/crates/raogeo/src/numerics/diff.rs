//! Central finite differences for gradients, Hessians, and matrix fields.

use nalgebra::{DMatrix, DVector};

/// Step for central first differences: eps^(1/3) scaled by coordinate size.
pub fn step_first(x: f64) -> f64 {
    f64::EPSILON.powf(1.0 / 3.0) * x.abs().max(1.0)
}

/// Step for central second differences: eps^(1/4) scaled by coordinate size.
///
/// The cube-root step that is optimal for first differences lets the
/// eps/h^2 rounding term grow to ~1e-6, which is too coarse for the
/// 1e-6 cross-method agreement targets; the quarter-root step balances
/// truncation against rounding at ~1e-8.
pub fn step_second(x: f64) -> f64 {
    f64::EPSILON.powf(0.25) * x.abs().max(1.0)
}

/// Central-difference gradient with per-coordinate steps.
pub fn gradient(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: &[f64]) -> DVector<f64> {
    let d = x.len();
    DVector::from_fn(d, |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h[i];
        xm[i] -= h[i];
        (f(&xp) - f(&xm)) / (2.0 * h[i])
    })
}

/// Central-difference Hessian (symmetric by construction).
pub fn hessian(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let f0 = f(x);
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h[i];
        xm[i] -= h[i];
        out[(i, i)] = (f(&xp) - 2.0 * f0 + f(&xm)) / (h[i] * h[i]);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut pp = x.clone();
            let mut pm = x.clone();
            let mut mp = x.clone();
            let mut mm = x.clone();
            pp[i] += h[i];
            pp[j] += h[j];
            pm[i] += h[i];
            pm[j] -= h[j];
            mp[i] -= h[i];
            mp[j] += h[j];
            mm[i] -= h[i];
            mm[j] -= h[j];
            let v = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h[i] * h[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Directional derivative of a matrix field by central differences with one
/// Richardson extrapolation step (fourth-order accurate).
pub fn matrix_derivative_richardson(
    g: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    x: &DVector<f64>,
    dir: usize,
    h: f64,
) -> DMatrix<f64> {
    let central = |step: f64| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[dir] += step;
        xm[dir] -= step;
        (g(&xp) - g(&xm)) / (2.0 * step)
    };
    let coarse = central(h);
    let fine = central(0.5 * h);
    (fine * 4.0 - coarse) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_quadratic() {
        let f = |x: &DVector<f64>| x[0] * x[0] + 3.0 * x[0] * x[1];
        let x = DVector::from_vec(vec![1.5, -2.0]);
        let h: Vec<f64> = x.iter().map(|&v| step_first(v)).collect();
        let g = gradient(&f, &x, &h);
        assert!((g[0] - (2.0 * 1.5 - 6.0)).abs() < 1e-8);
        assert!((g[1] - 4.5).abs() < 1e-8);
    }

    #[test]
    fn hessian_of_smooth_function() {
        let f = |x: &DVector<f64>| (x[0] * x[1]).sin() + x[0].powi(3);
        let x = DVector::from_vec(vec![0.7, 0.3]);
        let h: Vec<f64> = x.iter().map(|&v| step_second(v)).collect();
        let hess = hessian(&f, &x, &h);
        let s = (0.7f64 * 0.3).sin();
        let c = (0.7f64 * 0.3).cos();
        // d2/dx2 = -y^2 sin(xy) + 6x ; d2/dxdy = cos(xy) - xy sin(xy) ; d2/dy2 = -x^2 sin(xy)
        assert!((hess[(0, 0)] - (-0.09 * s + 4.2)).abs() < 1e-6);
        assert!((hess[(0, 1)] - (c - 0.21 * s)).abs() < 1e-6);
        assert!((hess[(1, 1)] - (-0.49 * s)).abs() < 1e-6);
        assert_eq!(hess[(0, 1)], hess[(1, 0)]);
    }

    #[test]
    fn richardson_matrix_derivative() {
        let g = |x: &DVector<f64>| {
            DMatrix::from_fn(2, 2, |i, j| if i == j { x[0].exp() } else { x[0] * x[0] })
        };
        let x = DVector::from_vec(vec![0.4]);
        let d = matrix_derivative_richardson(&g, &x, 0, 1e-3);
        assert!((d[(0, 0)] - 0.4f64.exp()).abs() < 1e-10);
        assert!((d[(0, 1)] - 0.8).abs() < 1e-10);
    }
}
