/// Golden-section search for the minimum of a unimodal function on `[lo, hi]`.
///
/// Stops when the bracket width falls below `rel_tol * max(|lo|, |hi|)`.
/// The endpoints are evaluated too, so boundary minima of convex functions
/// are returned exactly. Returns `(argmin, min)`.
pub fn golden_section_min(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut best = (a, f(a));
    let fb = f(b);
    if fb < best.1 {
        best = (b, fb);
    }
    if b - a <= 0.0 {
        return best;
    }
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..400 {
        if b - a <= rel_tol * a.abs().max(b.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_minimum() {
        let (x, fx) = golden_section_min(|x| (x - 0.3).powi(2) + 1.0, 0.0, 2.0, 1e-12);
        // A smooth minimum is only resolvable to about sqrt(machine epsilon).
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_minimum() {
        let (x, _) = golden_section_min(|x| x, 1.0, 5.0, 1e-10);
        assert_eq!(x, 1.0);
        let (x, _) = golden_section_min(|x| -x, 1.0, 5.0, 1e-10);
        assert_eq!(x, 5.0);
    }

    #[test]
    fn tiny_scale() {
        let (x, _) = golden_section_min(|x| (x - 3e-9).abs(), 1e-9, 1e-8, 1e-10);
        assert!((x - 3e-9).abs() < 1e-17);
    }
}
