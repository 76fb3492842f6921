//! Finite-difference second derivatives.
//!
//! Two routes are provided: central differences of function values (the
//! reference scheme) and central differences of an analytic gradient (the
//! production scheme, one order of accuracy cheaper to stabilize because no
//! second-order cancellation of large function values occurs). Both use the
//! same per-coordinate step rule `h_k = rel_step * max(1, |x_k|)`.

use nalgebra::DMatrix;

/// Per-coordinate steps for a point.
pub fn scaled_steps(x: &[f64], rel_step: f64) -> Vec<f64> {
    x.iter().map(|v| rel_step * v.abs().max(1.0)).collect()
}

/// Hessian by central differences of function values.
pub fn hessian_of_values<F>(f: F, x: &[f64], rel_step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let h = scaled_steps(x, rel_step);
    let f0 = f(x);
    let mut m = DMatrix::zeros(n, n);
    let mut xt = x.to_vec();

    for i in 0..n {
        xt[i] = x[i] + h[i];
        let fp = f(&xt);
        xt[i] = x[i] - h[i];
        let fm = f(&xt);
        xt[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            xt[i] = x[i] + h[i];
            xt[j] = x[j] + h[j];
            let fpp = f(&xt);
            xt[j] = x[j] - h[j];
            let fpm = f(&xt);
            xt[i] = x[i] - h[i];
            xt[j] = x[j] + h[j];
            let fmp = f(&xt);
            xt[j] = x[j] - h[j];
            let fmm = f(&xt);
            xt[i] = x[i];
            xt[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Hessian by central differences of an analytic gradient, plus the largest
/// relative asymmetry of the raw (pre-symmetrization) matrix.
pub struct GradHessian {
    pub matrix: DMatrix<f64>,
    pub asymmetry: f64,
}

pub fn hessian_of_gradient<G>(grad: G, x: &[f64], rel_step: f64) -> GradHessian
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let h = scaled_steps(x, rel_step);
    let mut raw = DMatrix::zeros(n, n);
    let mut xt = x.to_vec();
    for j in 0..n {
        xt[j] = x[j] + h[j];
        let gp = grad(&xt);
        xt[j] = x[j] - h[j];
        let gm = grad(&xt);
        xt[j] = x[j];
        for i in 0..n {
            raw[(i, j)] = (gp[i] - gm[i]) / (2.0 * h[j]);
        }
    }

    let scale = raw.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((raw[(i, j)] - raw[(j, i)]).abs() / scale);
        }
    }
    let sym = (&raw + raw.transpose()) * 0.5;
    GradHessian {
        matrix: sym,
        asymmetry: asym,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(x) = 1/2 x^T A x + b^T x with a fixed symmetric A: both schemes must
    // recover A essentially exactly (f is quadratic).
    fn quad_setup() -> (DMatrix<f64>, Vec<f64>) {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                -4.0, 0.5, 0.2, -0.1, //
                0.5, -3.0, 0.0, 0.3, //
                0.2, 0.0, -2.5, 0.1, //
                -0.1, 0.3, 0.1, -5.0,
            ],
        );
        let b = vec![0.3, -1.0, 2.0, 0.7];
        (a, b)
    }

    fn quad_f(a: &DMatrix<f64>, b: &[f64], x: &[f64]) -> f64 {
        let n = x.len();
        let mut v = 0.0;
        for i in 0..n {
            v += b[i] * x[i];
            for j in 0..n {
                v += 0.5 * x[i] * a[(i, j)] * x[j];
            }
        }
        v
    }

    fn quad_grad(a: &DMatrix<f64>, b: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| b[i] + (0..n).map(|j| a[(i, j)] * x[j]).sum::<f64>())
            .collect()
    }

    #[test]
    fn values_hessian_exact_on_quadratic() {
        let (a, b) = quad_setup();
        let x = [0.4, -1.2, 2.0, 0.05];
        let h = hessian_of_values(|x| quad_f(&a, &b, x), &x, 1e-4);
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (h[(i, j)] - a[(i, j)]).abs() < 1e-8,
                    "H[{i},{j}] = {} vs {}",
                    h[(i, j)],
                    a[(i, j)]
                );
            }
        }
    }

    #[test]
    fn gradient_hessian_exact_on_quadratic() {
        let (a, b) = quad_setup();
        let x = [0.0, 1.0, -0.5, 3.0];
        let gh = hessian_of_gradient(|x| quad_grad(&a, &b, x), &x, 1e-4);
        assert!(gh.asymmetry < 1e-10);
        for i in 0..4 {
            for j in 0..4 {
                assert!((gh.matrix[(i, j)] - a[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn schemes_agree_on_a_smooth_nonquadratic() {
        let f = |x: &[f64]| (x[0].sin() * x[1]).exp() + x[0] * x[0] * x[1];
        let g = |x: &[f64]| {
            let e = (x[0].sin() * x[1]).exp();
            vec![
                e * x[0].cos() * x[1] + 2.0 * x[0] * x[1],
                e * x[0].sin() + x[0] * x[0],
            ]
        };
        let x = [0.7, -0.3];
        let hv = hessian_of_values(f, &x, 1e-4);
        let hg = hessian_of_gradient(g, &x, 1e-4).matrix;
        for i in 0..2 {
            for j in 0..2 {
                let denom = hv[(i, j)].abs().max(1.0);
                assert!(
                    ((hv[(i, j)] - hg[(i, j)]) / denom).abs() < 1e-6,
                    "H[{i},{j}]: {} vs {}",
                    hv[(i, j)],
                    hg[(i, j)]
                );
            }
        }
    }
}
