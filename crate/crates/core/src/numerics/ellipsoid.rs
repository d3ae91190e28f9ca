use nalgebra::{DMatrix, DVector};

/// Answer of a cut oracle queried at an ellipsoid center.
#[derive(Debug, Clone, PartialEq)]
pub enum CutOracleResult {
    /// The center is feasible; `subgradient` is a supergradient of the
    /// concave objective there.
    Objective { value: f64, subgradient: Vec<f64> },
    /// The center violates a linear constraint `a^T x <= b` by `violation`
    /// (`a^T c - b`); `subgradient` is `a`.
    Feasibility {
        violation: f64,
        subgradient: Vec<f64>,
    },
}

/// Ellipsoid `{x : (x - c)^T P^-1 (x - c) <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidState {
    pub center: DVector<f64>,
    pub shape_matrix: DMatrix<f64>,
    pub iteration: usize,
}

impl EllipsoidState {
    /// Ball of the given radius around `center`.
    pub fn ball(center: &[f64], radius: f64) -> Self {
        let n = center.len();
        Self {
            center: DVector::from_column_slice(center),
            shape_matrix: DMatrix::identity(n, n) * (radius * radius),
            iteration: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `sqrt(a^T P a)`, the half-width of the ellipsoid along `a`.
    pub fn width_along(&self, a: &DVector<f64>) -> f64 {
        a.dot(&(&self.shape_matrix * a)).max(0.0).sqrt()
    }

    /// Keeps the part `{x : a^T (x - c) <= -depth}` and replaces the
    /// ellipsoid by the minimum-volume ellipsoid containing it.
    ///
    /// Returns `false` (leaving the state unchanged) when the kept part is
    /// empty or the cut degenerates.
    pub fn cut(&mut self, a: &DVector<f64>, depth: f64) -> bool {
        let n = self.dim() as f64;
        let width = self.width_along(a);
        if !(width > 0.0) || !width.is_finite() {
            return false;
        }
        let alpha = (depth / width).max(0.0);
        if alpha >= 1.0 {
            return false;
        }
        let b = (&self.shape_matrix * a) / width;
        if self.dim() == 1 {
            // Interval update: keep the sub-interval on the allowed side.
            let r = self.shape_matrix[(0, 0)].sqrt();
            let sign = a[0].signum();
            let new_r = r * (1.0 - alpha) / 2.0;
            self.center[0] -= sign * (r * (1.0 + alpha) / 2.0);
            self.shape_matrix[(0, 0)] = new_r * new_r;
        } else {
            let tau = (1.0 + n * alpha) / (n + 1.0);
            let sigma = 2.0 * (1.0 + n * alpha) / ((n + 1.0) * (1.0 + alpha));
            let delta = n * n * (1.0 - alpha * alpha) / (n * n - 1.0);
            self.center -= &b * tau;
            let bbt = &b * b.transpose();
            self.shape_matrix = (&self.shape_matrix - bbt * sigma) * delta;
            // Keep the matrix exactly symmetric against rounding drift.
            let sym = (&self.shape_matrix + self.shape_matrix.transpose()) * 0.5;
            self.shape_matrix = sym;
        }
        self.iteration += 1;
        true
    }
}

/// Result of [`ellipsoid_max`].
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidOutcome {
    /// Best feasible point seen (the initial center if none was feasible).
    pub point: Vec<f64>,
    /// Objective at `point`; `-inf` when no feasible center was visited.
    pub value: f64,
    /// Upper bound on the objective over the remaining ellipsoid at exit.
    pub bound: f64,
    pub iterations: usize,
    /// Whether the stopping test was met before the iteration cap.
    pub converged: bool,
}

/// Maximizes a concave function with the central-cut ellipsoid method.
///
/// Objective cuts are deepened by the gap to the best value seen;
/// feasibility cuts are deep cuts on the violated linear constraint.
/// Terminates when `sqrt(g^T P g) <= tol * max(1, |best|)` at a feasible
/// center, when a zero supergradient is returned, or after `max_iter` cuts.
pub fn ellipsoid_max(
    mut oracle: impl FnMut(&[f64]) -> CutOracleResult,
    center0: &[f64],
    radius0: f64,
    tol: f64,
    max_iter: usize,
) -> EllipsoidOutcome {
    let mut state = EllipsoidState::ball(center0, radius0);
    let mut best_point = center0.to_vec();
    let mut best = f64::NEG_INFINITY;
    let mut bound = f64::INFINITY;
    let mut converged = false;

    while state.iteration < max_iter {
        let c: Vec<f64> = state.center.iter().copied().collect();
        let (a, depth) = match oracle(&c) {
            CutOracleResult::Objective { value, subgradient } => {
                let g = DVector::from_vec(subgradient);
                if value > best {
                    best = value;
                    best_point = c;
                }
                let width = state.width_along(&g);
                bound = bound.min(value + width);
                if width == 0.0 || width <= tol * best.abs().max(1.0) {
                    converged = true;
                    break;
                }
                // Improving points satisfy g^T (x - c) >= best - value.
                (-g, best - value)
            }
            CutOracleResult::Feasibility {
                violation,
                subgradient,
            } => (DVector::from_vec(subgradient), violation),
        };
        if !state.cut(&a, depth) {
            // Nothing of the ellipsoid can improve on the incumbent.
            converged = best.is_finite();
            break;
        }
    }
    EllipsoidOutcome {
        point: best_point,
        value: best,
        bound: bound.max(best),
        iterations: state.iteration,
        converged,
    }
}
