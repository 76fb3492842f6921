//! Small derivative-free maximizer used by the constrained EM M-step.
//!
//! Nelder-Mead with the standard reflection/expansion/contraction/shrink
//! coefficients. The start point is kept as a simplex vertex, so the result
//! never falls below the initial objective value — the EM monotonicity
//! argument relies on that.

/// Outcome of a simplex search.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximize `f` starting at `x0` with initial per-coordinate displacements
/// `steps`. `rel_tol` bounds the relative objective spread across the simplex
/// at termination.
pub fn nelder_mead_max<F>(
    f: F,
    x0: &[f64],
    steps: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    debug_assert_eq!(steps.len(), n);
    let g = |x: &[f64]| -f(x); // minimize -f

    // Initial simplex: x0 and x0 displaced along each coordinate.
    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    verts.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if steps[i] != 0.0 { steps[i] } else { 1e-3 };
        verts.push(v);
    }
    let mut vals: Vec<f64> = verts.iter().map(|v| g(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        iterations += 1;

        // Order vertices by value (ascending: best first).
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| verts[i].clone()).collect();
        let ordered_vals: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
        verts = ordered;
        vals = ordered_vals;

        let spread = (vals[n] - vals[0]).abs();
        if spread <= rel_tol * (vals[0].abs().max(1.0)) {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for v in verts.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&verts[n])
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let f_r = g(&reflect);

        if f_r < vals[0] {
            // Try expanding further in the same direction.
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&verts[n])
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            let f_e = g(&expand);
            if f_e < f_r {
                verts[n] = expand;
                vals[n] = f_e;
            } else {
                verts[n] = reflect;
                vals[n] = f_r;
            }
        } else if f_r < vals[n - 1] {
            verts[n] = reflect;
            vals[n] = f_r;
        } else {
            // Contract toward the centroid.
            let contract: Vec<f64> = if f_r < vals[n] {
                centroid
                    .iter()
                    .zip(&reflect)
                    .map(|(c, r)| c + rho * (r - c))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&verts[n])
                    .map(|(c, w)| c + rho * (w - c))
                    .collect()
            };
            let f_c = g(&contract);
            if f_c < vals[n].min(f_r) {
                verts[n] = contract;
                vals[n] = f_c;
            } else {
                // Shrink toward the best vertex.
                let best = verts[0].clone();
                for i in 1..=n {
                    for (x, b) in verts[i].iter_mut().zip(&best) {
                        *x = b + sigma * (*x - b);
                    }
                    vals[i] = g(&verts[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    SimplexResult {
        x: verts[best].clone(),
        value: -vals[best],
        iterations,
        converged,
    }
}
