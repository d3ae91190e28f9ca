use super::BOX_DESCENT_MAX_ITER;
use crate::error::{Error, Result};

/// Result of a box-constrained descent.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Whether the projected-gradient norm reached the tolerance.
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(*lo, *hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected-gradient infinity norm `|P(x - g) - x|`.
fn pg_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((xi, gi), (lo, hi))| ((xi - gi).clamp(*lo, *hi) - xi).abs())
        .fold(0.0, f64::max)
}

/// Minimizes a convex differentiable function over a box, starting at the box midpoint.
pub fn minimize_convex_box(
    f: impl FnMut(&[f64]) -> f64,
    grad: impl FnMut(&[f64], &mut [f64]),
    lower: &[f64],
    upper: &[f64],
    tol: f64,
) -> Result<BoxMinimum> {
    let x0: Vec<f64> = lower
        .iter()
        .zip(upper)
        .map(|(l, u)| 0.5 * (l + u))
        .collect();
    minimize_convex_box_from(f, grad, lower, upper, &x0, tol)
}

/// Projected gradient with Barzilai-Borwein steps and Armijo backtracking
/// along the projection arc. Stops when the projected-gradient norm is at
/// most `tol` or after [`BOX_DESCENT_MAX_ITER`] steps.
pub fn minimize_convex_box_from(
    mut f: impl FnMut(&[f64]) -> f64,
    mut grad: impl FnMut(&[f64], &mut [f64]),
    lower: &[f64],
    upper: &[f64],
    x0: &[f64],
    tol: f64,
) -> Result<BoxMinimum> {
    let n = lower.len();
    if upper.len() != n || x0.len() != n {
        return Err(Error::InvalidInput("box descent dimension mismatch".into()));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
        return Err(Error::InvalidInput(
            "box lower bound exceeds upper bound".into(),
        ));
    }
    let non_finite = |what: &str| {
        Err(Error::NumericalDomain(format!(
            "box descent: non-finite {what}"
        )))
    };

    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut fx = f(&x);
    let mut g = vec![0.0; n];
    grad(&x, &mut g);
    if !fx.is_finite() {
        return non_finite("objective");
    }
    if g.iter().any(|v| !v.is_finite()) {
        return non_finite("gradient");
    }

    let mut step = 1.0 / g.iter().map(|v| v.abs()).fold(1e-300, f64::max);
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = pg_norm(&x, &g, lower, upper) <= tol;

    while !converged && iterations < BOX_DESCENT_MAX_ITER {
        iterations += 1;
        let mut alpha = step;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] - alpha * g[i];
            }
            project(&mut trial, lower, upper);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
            let decrease = dot(&g, &moved);
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * decrease {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No representable descent along the projected arc.
            break;
        }
        let ft = f(&trial);
        grad(&trial, &mut g_new);
        if g_new.iter().any(|v| !v.is_finite()) {
            return non_finite("gradient");
        }
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let ss = dot(&s, &s);
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-30, 1e30)
        } else {
            alpha * 4.0
        };
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_new);
        let stalled = ss == 0.0 && ft == fx;
        fx = ft;
        converged = pg_norm(&x, &g, lower, upper) <= tol;
        if stalled {
            break;
        }
    }
    Ok(BoxMinimum {
        x,
        value: fx,
        iterations,
        converged,
    })
}
